#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "types.hpp"

namespace creastress {

// One model output with full provenance. input_text is the exact text the
// prompt embedded: the original ad for forget records, the predecessor output
// for expansion records (the chain invariant).
struct GenerationRecord {
    std::string ad_id;
    std::string model_id;
    Phase phase = Phase::forget;
    Level level = Level::mild;
    int run_index = 1;
    std::string input_text;
    std::string output_text;
    std::string prompt;
    double temperature = 0.7;
    int max_tokens = 1024;
    std::int64_t seed_hint = -1;  // -1 = unset
    double latency_ms = 0.0;
    int attempt_count = 1;
    std::map<std::string, std::string> provider_metadata;
    std::string created_at;
};

struct MarkerJudgment {
    std::string marker_id;  // "<ad_id>#<index>"
    std::string ad_id;
    std::string model_id;
    Level level = Level::mild;
    int run_index = 1;
    Verdict verdict = Verdict::absent;
    double score = 0.0;  // fixed image of verdict
    std::string judge = "llm";  // "llm" or "human"
    bool verified = false;
    std::string justification;
    std::string error;  // non-empty when the judge reply was unusable
};

struct EmergentIdea {
    std::string ad_id;
    std::string model_id;
    int run_index = 1;
    std::string text;
    MarkerCategory category = MarkerCategory::metaphorical;  // never brand_specific
};

}  // namespace creastress
