#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "types.hpp"

namespace creastress::corpus {

struct AdConcept {
    std::string id;                  // unique, opaque
    std::string text;                // non-empty after trim
    std::size_t word_count = 0;      // recomputed from the shared tokenizer
    std::vector<std::string> tags;
};

struct Marker {
    std::string ad_id;
    std::string text;                // at most 10 tokens
    MarkerCategory category = MarkerCategory::metaphorical;
};

struct CorpusStats {
    std::size_t n_ads = 0;
    double mean_word_count = 0.0;
    double mean_entropy = 0.0;  // bits, mean of per-ad unigram entropy
};

enum class CorpusFormat { jsonl, csv };

// Picks csv for a .csv extension, jsonl otherwise.
CorpusFormat detect_format(const std::filesystem::path& path);

// Reads and validates ad concepts in file order. Errors carry the offending
// line number (malformed record, empty/whitespace text) or id (duplicate).
// An empty file is an error. word_count is always recomputed.
std::vector<AdConcept> load_corpus(const std::filesystem::path& path, CorpusFormat format);

// Canonical JSONL form: one {"id","text","tags"?} object per line.
void write_corpus(const std::filesystem::path& path, const std::vector<AdConcept>& ads);

struct MarkerSet {
    std::vector<Marker> markers;        // file order == priority order
    std::vector<std::string> warnings;  // per-ad counts outside 3..4
};

// Markers JSONL: {"ad_id","text","category"} per line. Every ad_id must
// resolve to a loaded ad; texts over 10 tokens and unknown categories are
// errors. Per-ad counts of 1..6 are accepted, with a warning outside 3..4.
MarkerSet load_markers(const std::filesystem::path& path, const std::vector<AdConcept>& ads);

void write_markers(const std::filesystem::path& path, const std::vector<Marker>& markers);

// Markers grouped per ad, preserving the priority order within each ad.
std::map<std::string, std::vector<Marker>> group_markers(const std::vector<Marker>& markers);

// Stable identifier for the i-th marker of an ad: "<ad_id>#<i>".
std::string marker_id(const std::string& ad_id, std::size_t index);

// Throws for an empty list.
CorpusStats corpus_stats(const std::vector<AdConcept>& ads);

}  // namespace creastress::corpus
