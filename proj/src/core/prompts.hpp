#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "corpus.hpp"
#include "types.hpp"

namespace creastress::prompts {

// Per-level protocol constants: how much the contraction removes and what
// fraction of the original length each expansion step aims for.
struct LevelSpec {
    int reduction_pct;
    double expansion_fraction;
};

// mild {35, 0.30}, moderate {70, 0.60}, extreme {95, 1.00}. Throws
// Errc::invalid_argument for Level::original.
const LevelSpec& level_spec(Level level);

struct WordTarget {
    int words = 1;
    bool clamped = false;  // floor hit 0 and was raised to 1
};

// target = floor(expansion_fraction * original_word_count); extreme keeps the
// full count. original_word_count must be >= 1.
WordTarget expansion_word_target(Level level, int original_word_count);

// Phase-1 contraction prompt. The concept is embedded verbatim.
std::string contraction_prompt(std::string_view concept_text, Level level);

// Phase-2 expansion prompts. input is the predecessor text in the chain.
std::string plain_expansion_prompt(std::string_view input, Level level,
                                   int original_word_count);
std::string marker_expansion_prompt(std::string_view input,
                                    const std::vector<corpus::Marker>& markers, Level level,
                                    int original_word_count);

// Level-dependent marker subset: mild keeps the first min(2, n) markers,
// moderate the first min(3, n), extreme all n. Order is extraction order
// (most essential first). Throws on an empty list.
std::vector<corpus::Marker> marker_schedule(const std::vector<corpus::Marker>& markers,
                                            Level level);

// Judge prompts (wording is this artifact's; the reply formats below are the
// parse contract).
std::string marker_extraction_prompt(std::string_view concept_text);
std::string marker_judgment_prompt(std::string_view marker_text,
                                   std::string_view generated_text);
std::string emergent_idea_prompt(std::string_view original, std::string_view expansion);

// --- Reply parsing -------------------------------------------------------

struct ParsedMarker {
    std::string text;
    MarkerCategory category;
};

struct MarkerReply {
    std::vector<ParsedMarker> markers;  // at most 4
    std::vector<std::string> warnings;
};

// Parses "text | category" lines against the five-category set. Lines without
// the separator, with an unknown category, or with marker text over 10 words
// are rejected with a warning; markers past the fourth are dropped with a
// warning.
MarkerReply parse_marker_reply(std::string_view reply);

struct VerdictReply {
    Verdict verdict = Verdict::absent;
    std::string justification;
};

// First non-blank line must start with one of present/partly/absent
// (case-insensitive). Throws Errc::parse otherwise.
VerdictReply parse_verdict_reply(std::string_view reply);

struct EmergentReply {
    std::vector<ParsedMarker> ideas;  // category never brand_specific
    std::vector<std::string> warnings;
};

// Parses "idea | category" lines against the four-category set ("NONE" or an
// empty reply yields zero ideas).
EmergentReply parse_emergent_reply(std::string_view reply);

}  // namespace creastress::prompts
