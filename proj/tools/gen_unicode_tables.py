#!/usr/bin/env python3
"""Regenerates src/core/unicode_data.inc from Python's unicodedata.

Emits two tables:
  - kWordRanges: sorted, inclusive codepoint ranges of word characters
    (general categories L* and Nd)
  - kLowerMap: sorted (codepoint, lowercase) pairs for every codepoint whose
    single-codepoint lowercase form differs from itself

Run from the repository root:  python3 tools/gen_unicode_tables.py
"""

import sys
import unicodedata

OUT = "src/core/unicode_data.inc"


def is_word(cp: int) -> bool:
    cat = unicodedata.category(chr(cp))
    return cat.startswith("L") or cat == "Nd"


def main() -> int:
    ranges = []
    start = None
    for cp in range(0x110000):
        if is_word(cp):
            if start is None:
                start = cp
        else:
            if start is not None:
                ranges.append((start, cp - 1))
                start = None
    if start is not None:
        ranges.append((start, 0x10FFFF))

    lower = []
    for cp in range(0x110000):
        lo = chr(cp).lower()
        if len(lo) == 1 and ord(lo) != cp:
            lower.append((cp, ord(lo)))

    with open(OUT, "w") as f:
        f.write("// Generated by tools/gen_unicode_tables.py (Unicode %s). Do not edit.\n"
                % unicodedata.unidata_version)
        f.write("static constexpr uint32_t kWordRanges[][2] = {\n")
        for a, b in ranges:
            f.write("  {0x%X, 0x%X},\n" % (a, b))
        f.write("};\n\n")
        f.write("static constexpr uint32_t kLowerMap[][2] = {\n")
        for a, b in lower:
            f.write("  {0x%X, 0x%X},\n" % (a, b))
        f.write("};\n")

    print("wrote %s: %d ranges, %d lowercase pairs" % (OUT, len(ranges), len(lower)))
    return 0


if __name__ == "__main__":
    sys.exit(main())
