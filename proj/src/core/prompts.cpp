#include "prompts.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "error.hpp"
#include "text.hpp"

namespace creastress::prompts {

namespace {

std::string upper(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return out;
}

std::string_view contraction_instruction(Level level) {
    switch (level) {
        case Level::mild:
            return "Remove about 35% of the details. Provide ONLY the contracted version "
                   "without any explanations.";
        case Level::moderate:
            return "Remove about 70% of the details. Provide ONLY the contracted version "
                   "without any explanations.";
        case Level::extreme:
            return "Remove about 95% of the details. Provide ONLY the contracted version "
                   "without any explanations.";
        default:
            throw Error(Errc::invalid_argument, "contraction has no 'original' level");
    }
}

std::string_view plain_instruction(Level level) {
    switch (level) {
        case Level::mild:
            return "Add 1-2 simple, meaningful details. Maintain the core message. "
                   "Keep it concise - around 1-2 sentences. Try to stay brief and direct. "
                   "Provide ONLY the rewritten version without any explanations or preamble.";
        case Level::moderate:
            return "Build on the previous version with 2-3 sentences of engaging or "
                   "descriptive elements. Introduce a fresh perspective or unexpected twist "
                   "while staying close to the original meaning. Provide ONLY the rewritten "
                   "version without any explanations or preamble.";
        case Level::extreme:
            return "Build on the previous version with 3-4 imaginative sentences. Add "
                   "surprising or expressive details. Use lateral thinking or vivid "
                   "storytelling while preserving the original intent. Provide ONLY the "
                   "rewritten version without any explanations or preamble.";
        default:
            throw Error(Errc::invalid_argument, "expansion has no 'original' level");
    }
}

std::string_view marker_instruction(Level level) {
    switch (level) {
        case Level::mild:
            return "Add 1-2 simple, meaningful details. Maintain the core message. "
                   "Include 1-2 of the most essential creative markers. "
                   "Keep it concise - around 1-2 sentences. Try to stay brief and direct. "
                   "Provide ONLY the rewritten version without any explanations or preamble.";
        case Level::moderate:
            return "Build on the previous version with 2-3 sentences of engaging or "
                   "descriptive elements. Introduce a fresh perspective or unexpected twist "
                   "while still reflecting the core message. Include 2-3 creative markers "
                   "naturally in the flow. Provide ONLY the rewritten version without any "
                   "explanations or preamble.";
        case Level::extreme:
            return "Build on the previous version with 3-4 imaginative sentences. "
                   "Add surprising or expressive details. Use lateral thinking or vivid "
                   "storytelling. Ensure that all the provided creative markers are included "
                   "meaningfully. Provide ONLY the rewritten version without any "
                   "explanations or preamble.";
        default:
            throw Error(Errc::invalid_argument, "expansion has no 'original' level");
    }
}

std::string expansion_header(std::string_view instruction, Level level,
                             int original_word_count) {
    const WordTarget target = expansion_word_target(level, original_word_count);
    std::string p;
    p += "You are a creative assistant.\n";
    p += "Your task is to expand the following advertisement while keeping its core idea "
         "intact.\n";
    p += "Expansion Level: " + upper(to_string(level)) + "\n";
    p += "Instructions: ";
    p += instruction;
    p += "\n";
    p += "The original ad was approximately " + std::to_string(original_word_count) +
         " words long. Aim for approximately " + std::to_string(target.words) + " words.\n";
    p += "Do not significantly exceed this length.\n";
    return p;
}

std::string input_block(std::string_view input) {
    std::string p;
    p += "Input:\n\"";
    p += input;
    p += "\"\nExpanded version:";
    return p;
}

std::string one_line(std::string_view s) {
    std::string out(s);
    std::replace(out.begin(), out.end(), '\n', ' ');
    std::replace(out.begin(), out.end(), '\r', ' ');
    return out;
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_lines(std::string_view s) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto nl = s.find('\n', start);
        if (nl == std::string_view::npos) {
            lines.push_back(s.substr(start));
            break;
        }
        lines.push_back(s.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i)
        if (std::tolower(static_cast<unsigned char>(s[i])) !=
            std::tolower(static_cast<unsigned char>(prefix[i])))
            return false;
    return true;
}

// Strips list decoration a chatty judge might add: "- ", "* ", "3. ", "3) ".
std::string_view strip_bullet(std::string_view line) {
    if (line.size() >= 2 && (line[0] == '-' || line[0] == '*') && line[1] == ' ')
        return trim(line.substr(2));
    std::size_t i = 0;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    if (i > 0 && i < line.size() && (line[i] == '.' || line[i] == ')'))
        return trim(line.substr(i + 1));
    return line;
}

}  // namespace

const LevelSpec& level_spec(Level level) {
    static const LevelSpec mild{35, 0.30};
    static const LevelSpec moderate{70, 0.60};
    static const LevelSpec extreme{95, 1.00};
    switch (level) {
        case Level::mild: return mild;
        case Level::moderate: return moderate;
        case Level::extreme: return extreme;
        default:
            throw Error(Errc::invalid_argument, "'original' carries no level constants");
    }
}

WordTarget expansion_word_target(Level level, int original_word_count) {
    if (original_word_count < 1)
        throw Error(Errc::invalid_argument, "original_word_count must be >= 1");
    if (level == Level::extreme) return {original_word_count, false};
    const int target = static_cast<int>(
        std::floor(level_spec(level).expansion_fraction * original_word_count));
    if (target < 1) return {1, true};
    return {target, false};
}

std::string contraction_prompt(std::string_view concept_text, Level level) {
    if (trim(concept_text).empty())
        throw Error(Errc::invalid_argument, "contraction_prompt: empty concept");
    std::string p;
    p += "Your task is to contract this advertisement concept to the specified level of "
         "contraction.\n";
    p += "Contraction level: " + upper(to_string(level)) + "\n";
    p += contraction_instruction(level);
    p += "\nOriginal ad concept: ";
    p += concept_text;
    p += "\nContracted version:";
    return p;
}

std::string plain_expansion_prompt(std::string_view input, Level level,
                                   int original_word_count) {
    return expansion_header(plain_instruction(level), level, original_word_count) +
           input_block(input);
}

std::string marker_expansion_prompt(std::string_view input,
                                    const std::vector<corpus::Marker>& markers, Level level,
                                    int original_word_count) {
    if (markers.empty())
        throw Error(Errc::invalid_argument, "marker_expansion_prompt: empty marker subset");
    std::string p = expansion_header(marker_instruction(level), level, original_word_count);
    p += "Please incorporate the following creative markers into your expansion.\n";
    p += "These represent the most essential ideas from the original ad and must be "
         "preserved (you may paraphrase them, but the meaning must stay intact):\n";
    p += "Creative Markers:\n";
    for (const auto& m : markers) {
        p += "- ";
        p += one_line(m.text);
        p += "\n";
    }
    p += input_block(input);
    return p;
}

std::vector<corpus::Marker> marker_schedule(const std::vector<corpus::Marker>& markers,
                                            Level level) {
    if (markers.empty())
        throw Error(Errc::invalid_argument, "marker_schedule: empty marker list");
    std::size_t keep = markers.size();
    if (level == Level::mild) keep = std::min<std::size_t>(2, markers.size());
    else if (level == Level::moderate) keep = std::min<std::size_t>(3, markers.size());
    else if (level == Level::original)
        throw Error(Errc::invalid_argument, "marker_schedule: no 'original' level");
    return {markers.begin(), markers.begin() + static_cast<std::ptrdiff_t>(keep)};
}

std::string marker_extraction_prompt(std::string_view concept_text) {
    if (trim(concept_text).empty())
        throw Error(Errc::invalid_argument, "marker_extraction_prompt: empty concept");
    std::string p;
    p += "You are analyzing an advertisement concept.\n";
    p += "Identify the 3-4 most essential creative markers: the short phrases that carry "
         "the ad's creative core.\n";
    p += "Each marker must be at most 10 words long and tagged with exactly one category "
         "from: metaphorical, emotional, visual, slogan_like, brand_specific.\n";
    p += "List the markers most essential first.\n";
    p += "Reply with one marker per line in the format: text | category\n";
    p += "Do not add explanations or numbering.\n";
    p += "Ad concept:\n\"";
    p += concept_text;
    p += "\"\nMarkers:";
    return p;
}

std::string marker_judgment_prompt(std::string_view marker_text,
                                   std::string_view generated_text) {
    std::string p;
    p += "You are judging whether a creative marker from an original advertisement "
         "survives in a rewritten version.\n";
    p += "\"present\" means the marker's meaning is clearly preserved (a paraphrase "
         "counts), \"partly\" means it survives only in weakened or fragmentary form, "
         "\"absent\" means it is gone.\n";
    p += "Reply with exactly one of: present, partly, absent on the first line. You may "
         "add a one-line justification on the second line.\n";
    p += "Marker:\n\"";
    p += one_line(marker_text);
    p += "\"\nRewritten text:\n\"";
    p += generated_text;
    p += "\"\nVerdict:";
    return p;
}

std::string emergent_idea_prompt(std::string_view original, std::string_view expansion) {
    std::string p;
    p += "Compare an original advertisement with its expanded rewrite.\n";
    p += "List only emergent ideas: novel elements that appear in the expansion but are "
         "absent from the original.\n";
    p += "Tag each idea with exactly one category from: metaphorical, emotional, visual, "
         "slogan_like.\n";
    p += "Exclude anything already present in the original, even as a paraphrase.\n";
    p += "Reply with one idea per line in the format: idea | category\n";
    p += "Reply with NONE if there are no emergent ideas.\n";
    p += "Original:\n\"";
    p += original;
    p += "\"\nExpansion:\n\"";
    p += expansion;
    p += "\"\nEmergent ideas:";
    return p;
}

MarkerReply parse_marker_reply(std::string_view reply) {
    MarkerReply out;
    int line_no = 0;
    for (const auto raw : split_lines(reply)) {
        ++line_no;
        const auto line = strip_bullet(trim(raw));
        if (line.empty()) continue;
        const auto sep = line.rfind('|');
        if (sep == std::string_view::npos) {
            out.warnings.push_back("line " + std::to_string(line_no) +
                                   ": missing 'text | category' separator");
            continue;
        }
        const auto text = trim(line.substr(0, sep));
        const auto cat_name = trim(line.substr(sep + 1));
        if (text.empty()) {
            out.warnings.push_back("line " + std::to_string(line_no) + ": empty marker text");
            continue;
        }
        MarkerCategory category;
        try {
            category = marker_category_from_string(cat_name);
        } catch (const Error&) {
            out.warnings.push_back("line " + std::to_string(line_no) +
                                   ": unknown category '" + std::string(cat_name) + "'");
            continue;
        }
        if (text::word_count(text) > 10) {
            out.warnings.push_back("line " + std::to_string(line_no) +
                                   ": marker over 10 words, dropped");
            continue;
        }
        if (out.markers.size() >= 4) {
            out.warnings.push_back("line " + std::to_string(line_no) +
                                   ": more than 4 markers, extras dropped");
            continue;
        }
        out.markers.push_back({std::string(text), category});
    }
    return out;
}

VerdictReply parse_verdict_reply(std::string_view reply) {
    const auto lines = split_lines(reply);
    std::size_t first = 0;
    while (first < lines.size() && trim(lines[first]).empty()) ++first;
    if (first == lines.size())
        throw Error(Errc::parse, "verdict reply is empty");
    const auto line = trim(lines[first]);

    VerdictReply out;
    std::string_view rest;
    if (starts_with_ci(line, "partly")) {
        out.verdict = Verdict::partly;
        rest = line.substr(6);
    } else if (starts_with_ci(line, "present")) {
        out.verdict = Verdict::present;
        rest = line.substr(7);
    } else if (starts_with_ci(line, "absent")) {
        out.verdict = Verdict::absent;
        rest = line.substr(6);
    } else {
        throw Error(Errc::parse,
                    "verdict reply does not start with present/partly/absent: '" +
                        std::string(line.substr(0, 40)) + "'");
    }

    // "partly present" spells the same verdict.
    if (out.verdict == Verdict::partly && starts_with_ci(trim(rest), "present"))
        rest = trim(rest).substr(7);
    rest = trim(rest);
    while (!rest.empty() && (rest.front() == '-' || rest.front() == ':' ||
                             rest.front() == '.' || rest.front() == ','))
        rest = trim(rest.substr(1));
    // Non-ASCII dashes a judge might use.
    while (starts_with_ci(rest, "—") || starts_with_ci(rest, "–"))
        rest = trim(rest.substr(3));

    std::string justification(rest);
    for (std::size_t i = first + 1; i < lines.size(); ++i) {
        const auto extra = trim(lines[i]);
        if (extra.empty()) continue;
        if (!justification.empty()) justification += ' ';
        justification += std::string(extra);
    }
    out.justification = justification;
    return out;
}

EmergentReply parse_emergent_reply(std::string_view reply) {
    EmergentReply out;
    int line_no = 0;
    for (const auto raw : split_lines(reply)) {
        ++line_no;
        const auto line = strip_bullet(trim(raw));
        if (line.empty()) continue;
        if (line == "NONE" || line == "none") continue;
        const auto sep = line.rfind('|');
        if (sep == std::string_view::npos) {
            out.warnings.push_back("line " + std::to_string(line_no) +
                                   ": missing 'idea | category' separator");
            continue;
        }
        const auto text = trim(line.substr(0, sep));
        const auto cat_name = trim(line.substr(sep + 1));
        if (text.empty()) {
            out.warnings.push_back("line " + std::to_string(line_no) + ": empty idea text");
            continue;
        }
        MarkerCategory category;
        try {
            category = marker_category_from_string(cat_name);
        } catch (const Error&) {
            out.warnings.push_back("line " + std::to_string(line_no) +
                                   ": unknown category '" + std::string(cat_name) + "'");
            continue;
        }
        if (category == MarkerCategory::brand_specific) {
            out.warnings.push_back("line " + std::to_string(line_no) +
                                   ": brand_specific is not an emergent-idea category");
            continue;
        }
        out.ideas.push_back({std::string(text), category});
    }
    return out;
}

}  // namespace creastress::prompts
