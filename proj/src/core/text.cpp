#include "text.hpp"

#include <algorithm>
#include <cstdint>

#include "error.hpp"

namespace creastress::text {

namespace {

#include "unicode_data.inc"

bool is_word_cp(uint32_t cp) {
    auto begin = std::begin(kWordRanges);
    auto end = std::end(kWordRanges);
    auto it = std::upper_bound(begin, end, cp, [](uint32_t v, const uint32_t (&r)[2]) {
        return v < r[0];
    });
    if (it == begin) return false;
    --it;
    return cp >= (*it)[0] && cp <= (*it)[1];
}

uint32_t lower_cp(uint32_t cp) {
    auto begin = std::begin(kLowerMap);
    auto end = std::end(kLowerMap);
    auto it = std::lower_bound(begin, end, cp, [](const uint32_t (&e)[2], uint32_t v) {
        return e[0] < v;
    });
    if (it != end && (*it)[0] == cp) return (*it)[1];
    return cp;
}

// Decodes one UTF-8 codepoint at pos. On malformed input consumes a single
// byte and reports it as invalid (returns false).
bool decode_utf8(std::string_view s, std::size_t& pos, uint32_t& cp) {
    const auto b0 = static_cast<unsigned char>(s[pos]);
    std::size_t len;
    if (b0 < 0x80) {
        cp = b0;
        ++pos;
        return true;
    } else if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        ++pos;
        return false;
    }
    if (pos + len > s.size()) {
        ++pos;
        return false;
    }
    for (std::size_t i = 1; i < len; ++i) {
        const auto b = static_cast<unsigned char>(s[pos + i]);
        if ((b & 0xC0) != 0x80) {
            ++pos;
            return false;
        }
        cp = (cp << 6) | (b & 0x3F);
    }
    // Reject overlong encodings and surrogates to stay canonical.
    static constexpr uint32_t kMin[5] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < kMin[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
        ++pos;
        return false;
    }
    pos += len;
    return true;
}

void encode_utf8(uint32_t cp, std::string& out) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

}  // namespace

TokenStream tokenize(std::string_view utf8) {
    TokenStream out;
    std::string current;
    std::size_t pos = 0;
    while (pos < utf8.size()) {
        uint32_t cp = 0;
        const bool ok = decode_utf8(utf8, pos, cp);
        if (ok && is_word_cp(cp)) {
            encode_utf8(lower_cp(cp), current);
        } else if (!current.empty()) {
            out.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) out.push_back(std::move(current));
    return out;
}

std::size_t word_count(std::string_view utf8) { return tokenize(utf8).size(); }

std::string lowercase(std::string_view utf8) {
    std::string out;
    out.reserve(utf8.size());
    std::size_t pos = 0;
    while (pos < utf8.size()) {
        const std::size_t start = pos;
        uint32_t cp = 0;
        if (decode_utf8(utf8, pos, cp)) {
            encode_utf8(lower_cp(cp), out);
        } else {
            out.append(utf8.substr(start, pos - start));
        }
    }
    return out;
}

NgramSet ngrams(const TokenStream& stream, std::size_t n) {
    if (n == 0) throw Error(Errc::invalid_argument, "ngrams: n must be >= 1");
    NgramSet set;
    set.n = n;
    if (stream.size() < n) return set;
    for (std::size_t i = 0; i + n <= stream.size(); ++i) {
        std::string gram = stream[i];
        for (std::size_t j = 1; j < n; ++j) {
            gram += ' ';
            gram += stream[i + j];
        }
        set.grams.insert(std::move(gram));
    }
    return set;
}

std::map<std::string, double> unigram_distribution(const TokenStream& stream) {
    if (stream.empty())
        throw Error(Errc::invalid_argument, "unigram_distribution: empty token stream");
    std::map<std::string, std::size_t> counts;
    for (const auto& tok : stream) ++counts[tok];
    std::map<std::string, double> dist;
    const auto total = static_cast<double>(stream.size());
    for (const auto& [tok, count] : counts) dist[tok] = static_cast<double>(count) / total;
    return dist;
}

}  // namespace creastress::text
