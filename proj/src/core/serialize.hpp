#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metrics.hpp"
#include "records.hpp"

namespace creastress::serialize {

using json = nlohmann::ordered_json;

json to_json(const GenerationRecord& rec);
GenerationRecord generation_from_json(const json& j);

json to_json(const MarkerJudgment& judgment);
MarkerJudgment judgment_from_json(const json& j);

json to_json(const EmergentIdea& idea);
EmergentIdea emergent_from_json(const json& j);

// Metric cells serialize as numbers; errored cells become null with the
// message under "errors".
json to_json(const metrics::MetricRecord& rec);
metrics::MetricRecord metric_from_json(const json& j);

// Whole-file JSONL helpers. Readers skip blank lines and throw Errc::parse
// with a line number on malformed input; writers end every line with '\n'.
std::vector<json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<json>& lines);
void append_jsonl(const std::filesystem::path& path, const json& line);

}  // namespace creastress::serialize
