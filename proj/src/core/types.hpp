#pragma once

#include <string>
#include <string_view>

namespace creastress {

enum class Phase { forget, expand_plain, expand_marker };

// 'original' appears only in metric/report rows as the baseline level; the
// protocol itself runs mild/moderate/extreme.
enum class Level { original, mild, moderate, extreme };

enum class MarkerCategory { metaphorical, emotional, visual, slogan_like, brand_specific };

enum class Verdict { present, partly, absent };

std::string_view to_string(Phase p);
std::string_view to_string(Level l);
std::string_view to_string(MarkerCategory c);
std::string_view to_string(Verdict v);

Phase phase_from_string(std::string_view s);
Level level_from_string(std::string_view s);
MarkerCategory marker_category_from_string(std::string_view s);
Verdict verdict_from_string(std::string_view s);

// Fixed verdict -> survival score mapping (present / partly / absent).
double verdict_score(Verdict v);

// The three protocol levels in execution order.
inline constexpr Level kRunLevels[3] = {Level::mild, Level::moderate, Level::extreme};

}  // namespace creastress
