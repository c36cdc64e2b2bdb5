#include "serialize.hpp"

#include <fstream>

#include "error.hpp"

namespace creastress::serialize {

namespace {

template <typename T>
T field(const json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end()) throw Error(Errc::parse, std::string("missing field '") + key + "'");
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw Error(Errc::parse, std::string("field '") + key + "' has the wrong type");
    }
}

template <typename T>
T field_or(const json& j, const char* key, T fallback) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw Error(Errc::parse, std::string("field '") + key + "' has the wrong type");
    }
}

void put_metric(json& j, json& errors, const char* key, const metrics::MetricValue& v) {
    if (v.ok()) {
        j[key] = v.value;
    } else {
        j[key] = nullptr;
        errors[key] = v.error;
    }
}

metrics::MetricValue take_metric(const json& j, const char* key) {
    metrics::MetricValue v;
    const auto it = j.find(key);
    if (it != j.end() && it->is_number()) v.value = it->get<double>();
    if (const auto errs = j.find("errors"); errs != j.end()) {
        if (const auto e = errs->find(key); e != errs->end()) v.error = e->get<std::string>();
    }
    if (!v.ok()) v.value = 0.0;
    return v;
}

}  // namespace

json to_json(const GenerationRecord& rec) {
    json j;
    j["ad_id"] = rec.ad_id;
    j["model_id"] = rec.model_id;
    j["phase"] = to_string(rec.phase);
    j["level"] = to_string(rec.level);
    j["run_index"] = rec.run_index;
    j["input_text"] = rec.input_text;
    j["output_text"] = rec.output_text;
    j["prompt"] = rec.prompt;
    j["temperature"] = rec.temperature;
    j["max_tokens"] = rec.max_tokens;
    j["seed_hint"] = rec.seed_hint;
    j["latency_ms"] = rec.latency_ms;
    j["attempt_count"] = rec.attempt_count;
    j["provider_metadata"] = rec.provider_metadata;
    j["created_at"] = rec.created_at;
    return j;
}

GenerationRecord generation_from_json(const json& j) {
    GenerationRecord rec;
    rec.ad_id = field<std::string>(j, "ad_id");
    rec.model_id = field<std::string>(j, "model_id");
    rec.phase = phase_from_string(field<std::string>(j, "phase"));
    rec.level = level_from_string(field<std::string>(j, "level"));
    rec.run_index = field<int>(j, "run_index");
    rec.input_text = field<std::string>(j, "input_text");
    rec.output_text = field<std::string>(j, "output_text");
    rec.prompt = field_or<std::string>(j, "prompt", "");
    rec.temperature = field_or<double>(j, "temperature", 0.7);
    rec.max_tokens = field_or<int>(j, "max_tokens", 1024);
    rec.seed_hint = field_or<std::int64_t>(j, "seed_hint", -1);
    rec.latency_ms = field_or<double>(j, "latency_ms", 0.0);
    rec.attempt_count = field_or<int>(j, "attempt_count", 1);
    rec.provider_metadata =
        field_or<std::map<std::string, std::string>>(j, "provider_metadata", {});
    rec.created_at = field_or<std::string>(j, "created_at", "");
    return rec;
}

json to_json(const MarkerJudgment& judgment) {
    json j;
    j["marker_id"] = judgment.marker_id;
    j["ad_id"] = judgment.ad_id;
    j["model_id"] = judgment.model_id;
    j["level"] = to_string(judgment.level);
    j["run_index"] = judgment.run_index;
    j["verdict"] = to_string(judgment.verdict);
    j["score"] = judgment.score;
    j["judge"] = judgment.judge;
    j["verified"] = judgment.verified;
    j["justification"] = judgment.justification;
    if (!judgment.error.empty()) j["error"] = judgment.error;
    return j;
}

MarkerJudgment judgment_from_json(const json& j) {
    MarkerJudgment out;
    out.marker_id = field<std::string>(j, "marker_id");
    out.ad_id = field<std::string>(j, "ad_id");
    out.model_id = field<std::string>(j, "model_id");
    out.level = level_from_string(field<std::string>(j, "level"));
    out.run_index = field<int>(j, "run_index");
    out.verdict = verdict_from_string(field<std::string>(j, "verdict"));
    out.score = field_or<double>(j, "score", verdict_score(out.verdict));
    out.judge = field_or<std::string>(j, "judge", "llm");
    out.verified = field_or<bool>(j, "verified", false);
    out.justification = field_or<std::string>(j, "justification", "");
    out.error = field_or<std::string>(j, "error", "");
    return out;
}

json to_json(const EmergentIdea& idea) {
    json j;
    j["ad_id"] = idea.ad_id;
    j["model_id"] = idea.model_id;
    j["run_index"] = idea.run_index;
    j["text"] = idea.text;
    j["category"] = to_string(idea.category);
    return j;
}

EmergentIdea emergent_from_json(const json& j) {
    EmergentIdea idea;
    idea.ad_id = field<std::string>(j, "ad_id");
    idea.model_id = field<std::string>(j, "model_id");
    idea.run_index = field<int>(j, "run_index");
    idea.text = field<std::string>(j, "text");
    idea.category = marker_category_from_string(field<std::string>(j, "category"));
    return idea;
}

json to_json(const metrics::MetricRecord& rec) {
    json j;
    j["ad_id"] = rec.ad_id;
    j["model_id"] = rec.model_id;
    j["phase"] = to_string(rec.phase);
    j["level"] = to_string(rec.level);
    j["run_index"] = rec.run_index;
    json errors = json::object();
    put_metric(j, errors, "cosine", rec.cosine);
    put_metric(j, errors, "meteor", rec.meteor);
    put_metric(j, errors, "entropy", rec.entropy);
    put_metric(j, errors, "ngram_uniqueness", rec.ngram_uniqueness);
    j["ngram_degenerate_pair"] = rec.ngram_degenerate_pair;
    if (!errors.empty()) j["errors"] = errors;
    return j;
}

metrics::MetricRecord metric_from_json(const json& j) {
    metrics::MetricRecord rec;
    rec.ad_id = field<std::string>(j, "ad_id");
    rec.model_id = field<std::string>(j, "model_id");
    rec.phase = phase_from_string(field<std::string>(j, "phase"));
    rec.level = level_from_string(field<std::string>(j, "level"));
    rec.run_index = field<int>(j, "run_index");
    rec.cosine = take_metric(j, "cosine");
    rec.meteor = take_metric(j, "meteor");
    rec.entropy = take_metric(j, "entropy");
    rec.ngram_uniqueness = take_metric(j, "ngram_uniqueness");
    rec.ngram_degenerate_pair = field_or<bool>(j, "ngram_degenerate_pair", false);
    return rec;
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io, "cannot open " + path.string());
    std::vector<json> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw Error(Errc::parse,
                        path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& lines) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io, "cannot write " + path.string());
    for (const auto& j : lines) out << j.dump() << '\n';
    if (!out) throw Error(Errc::io, "write failed: " + path.string());
}

void append_jsonl(const std::filesystem::path& path, const json& line) {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw Error(Errc::io, "cannot write " + path.string());
    out << line.dump() << '\n';
    if (!out) throw Error(Errc::io, "write failed: " + path.string());
}

}  // namespace creastress::serialize
