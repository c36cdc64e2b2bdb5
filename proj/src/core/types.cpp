#include "types.hpp"

#include "error.hpp"

namespace creastress {

std::string_view to_string(Phase p) {
    switch (p) {
        case Phase::forget: return "forget";
        case Phase::expand_plain: return "expand_plain";
        case Phase::expand_marker: return "expand_marker";
    }
    return "?";
}

std::string_view to_string(Level l) {
    switch (l) {
        case Level::original: return "original";
        case Level::mild: return "mild";
        case Level::moderate: return "moderate";
        case Level::extreme: return "extreme";
    }
    return "?";
}

std::string_view to_string(MarkerCategory c) {
    switch (c) {
        case MarkerCategory::metaphorical: return "metaphorical";
        case MarkerCategory::emotional: return "emotional";
        case MarkerCategory::visual: return "visual";
        case MarkerCategory::slogan_like: return "slogan_like";
        case MarkerCategory::brand_specific: return "brand_specific";
    }
    return "?";
}

std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::present: return "present";
        case Verdict::partly: return "partly";
        case Verdict::absent: return "absent";
    }
    return "?";
}

Phase phase_from_string(std::string_view s) {
    if (s == "forget") return Phase::forget;
    if (s == "expand_plain") return Phase::expand_plain;
    if (s == "expand_marker") return Phase::expand_marker;
    throw Error(Errc::parse, "unknown phase: " + std::string(s));
}

Level level_from_string(std::string_view s) {
    if (s == "original") return Level::original;
    if (s == "mild") return Level::mild;
    if (s == "moderate") return Level::moderate;
    if (s == "extreme") return Level::extreme;
    throw Error(Errc::parse, "unknown level: " + std::string(s));
}

MarkerCategory marker_category_from_string(std::string_view s) {
    if (s == "metaphorical") return MarkerCategory::metaphorical;
    if (s == "emotional") return MarkerCategory::emotional;
    if (s == "visual") return MarkerCategory::visual;
    if (s == "slogan_like") return MarkerCategory::slogan_like;
    if (s == "brand_specific") return MarkerCategory::brand_specific;
    throw Error(Errc::parse, "unknown marker category: " + std::string(s));
}

Verdict verdict_from_string(std::string_view s) {
    if (s == "present") return Verdict::present;
    if (s == "partly") return Verdict::partly;
    if (s == "absent") return Verdict::absent;
    throw Error(Errc::parse, "unknown verdict: " + std::string(s));
}

double verdict_score(Verdict v) {
    switch (v) {
        case Verdict::present: return 1.0;
        case Verdict::partly: return 0.5;
        case Verdict::absent: return 0.0;
    }
    return 0.0;
}

}  // namespace creastress
