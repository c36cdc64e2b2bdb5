#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace creastress::text {

// Ordered lowercase word tokens. Every token is a contiguous run of Unicode
// letters/digits from the source text; punctuation and whitespace are gone.
using TokenStream = std::vector<std::string>;

// One shared tokenizer for every metric and report. Splits on anything that
// is not a Unicode letter or decimal digit (so hyphenated words split at the
// hyphen) and lowercases each codepoint. Invalid UTF-8 bytes act as
// separators. Empty input yields an empty stream.
TokenStream tokenize(std::string_view utf8);

// tokenize(text).size()
std::size_t word_count(std::string_view utf8);

// Single-codepoint Unicode lowercasing of arbitrary UTF-8 text.
std::string lowercase(std::string_view utf8);

struct NgramSet {
    std::size_t n = 0;
    // Each gram is its n tokens joined with ' '; set semantics deduplicate.
    std::set<std::string> grams;
};

// All length-n windows of the stream, deduplicated. Streams shorter than n
// yield the empty set. Throws Errc::invalid_argument for n == 0.
NgramSet ngrams(const TokenStream& stream, std::size_t n);

// Relative frequency of each token. Probabilities sum to 1 within 1e-12.
// Throws Errc::invalid_argument for an empty stream.
std::map<std::string, double> unigram_distribution(const TokenStream& stream);

}  // namespace creastress::text
