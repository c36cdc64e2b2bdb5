#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "corpus.hpp"
#include "records.hpp"
#include "types.hpp"

namespace creastress::metrics {

// Optional synonym source for the meteor synonym stage. File format: one
// synonym set per line, whitespace-separated lowercase stems.
class SynonymLexicon {
public:
    static SynonymLexicon load(const std::filesystem::path& path);

    // True when the two stems share at least one synonym set.
    bool related(const std::string& stem_a, const std::string& stem_b) const;

    std::size_t set_count() const { return set_count_; }

private:
    std::map<std::string, std::vector<int>> sets_of_;
    std::size_t set_count_ = 0;
};

enum class MatchStage { exact, stem, synonym };

struct MeteorParams {
    double alpha = 0.9;
    double beta = 3.0;
    double gamma = 0.5;
    // Alignment stages applied in order over still-unmatched tokens. The
    // synonym stage requires an attached lexicon.
    std::vector<MatchStage> stages = {MatchStage::exact, MatchStage::stem};
    std::shared_ptr<const SynonymLexicon> synonyms;
};

// Adds the synonym stage backed by the given lexicon.
MeteorParams with_synonyms(MeteorParams params, std::shared_ptr<const SynonymLexicon> lexicon);

// TF-IDF cosine over the two-document pair: raw term counts, smoothed
// idf(t) = ln((1+N)/(1+df(t))) + 1 with N = 2, L2-normalized vectors.
// Throws Errc::invalid_argument when either text has no tokens.
double tfidf_cosine(std::string_view original, std::string_view generated);

// Alignment-based overlap of hypothesis against reference. Stages match
// one-to-one, each maximizing matches and, among maximal matchings,
// minimizing crossings (ties: leftmost hypothesis positions). Not symmetric.
// Throws Errc::invalid_argument when either text has no tokens.
double meteor(std::string_view reference, std::string_view hypothesis,
              const MeteorParams& params = {});

// Shannon entropy (bits) of the unigram distribution. Empty and
// single-repeated-token texts score 0.
double shannon_entropy(std::string_view text);

struct Uniqueness {
    double value = 0.0;
    bool degenerate = false;  // both 4-gram sets empty
};

// U = 1 - |Ngen ∩ Norig| / |Ngen ∪ Norig| over 4-gram sets. Both sets empty
// scores 0 with the degenerate flag; exactly one empty set scores 1.
Uniqueness fourgram_uniqueness(std::string_view original, std::string_view generated);

// One metric cell: a value or an error marker, never a fabricated zero.
struct MetricValue {
    double value = 0.0;
    std::string error;

    bool ok() const { return error.empty(); }
};

struct MetricRecord {
    std::string ad_id;
    std::string model_id;
    Phase phase = Phase::forget;
    Level level = Level::mild;
    int run_index = 1;
    MetricValue cosine;
    MetricValue meteor;
    MetricValue entropy;
    MetricValue ngram_uniqueness;
    bool ngram_degenerate_pair = false;
};

// All four metrics of a generated text against the original text; per-metric
// failures land in the error markers instead of throwing.
MetricRecord score_texts(const std::string& original, const std::string& generated,
                         const MeteorParams& params = {});

// All four metrics of a generation against its original ad (the original is
// always the baseline). Per-metric failures land in the error markers.
MetricRecord score_pair(const corpus::AdConcept& original, const GenerationRecord& generated,
                        const MeteorParams& params = {});

// Baseline row: the ad scored against itself at level 'original'.
MetricRecord score_identity(const corpus::AdConcept& ad, Phase phase, int run_index,
                            const MeteorParams& params = {});

}  // namespace creastress::metrics
