#include "orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <ctime>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <thread>
#include <utility>

#include "error.hpp"
#include "gateway.hpp"
#include "metrics.hpp"
#include "prompts.hpp"
#include "serialize.hpp"
#include "text.hpp"

namespace creastress::orchestrator {

namespace fs = std::filesystem;
using serialize::json;

namespace {

bool is_mock_model(const std::string& id) { return id.rfind("mock", 0) == 0; }

std::string iso_utc(std::time_t t) {
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

class Clock {
public:
    virtual ~Clock() = default;
    virtual std::string next() = 0;
};

class SystemClock : public Clock {
public:
    std::string next() override {
        return iso_utc(std::chrono::system_clock::to_time_t(std::chrono::system_clock::now()));
    }
};

// Fixed-epoch counter, ticked in commit order, so mock run stores serialize
// byte-identically on every execution.
class LogicalClock : public Clock {
public:
    explicit LogicalClock(long start) : seq_(start) {}
    std::string next() override { return iso_utc(kEpoch + seq_++); }

private:
    static constexpr std::time_t kEpoch = 946684800;  // 2000-01-01T00:00:00Z
    long seq_;
};

std::unique_ptr<Clock> clock_for(const std::string& model, long committed_so_far) {
    if (is_mock_model(model)) return std::make_unique<LogicalClock>(committed_so_far);
    return std::make_unique<SystemClock>();
}

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (const char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

std::int64_t derive_seed_hint(std::uint64_t run_seed, const std::string& model, int run,
                              const std::string& ad_id, Phase phase, Level level) {
    std::string key = model + "|" + std::to_string(run) + "|" + ad_id + "|" +
                      std::string(to_string(phase)) + "|" + std::string(to_string(level));
    return static_cast<std::int64_t>((fnv1a64(key) ^ run_seed) & 0x7fffffffffffffffull);
}

// Runs work(0..n-1) on up to `concurrency` workers; commit(i, result) runs on
// the calling thread in strict index order, so files fill deterministically
// no matter how the workers interleave.
template <typename Result>
void run_indexed(std::size_t n, int concurrency,
                 const std::function<Result(std::size_t)>& work,
                 const std::function<void(std::size_t, Result&)>& commit) {
    if (n == 0) return;
    const int workers =
        std::max(1, std::min<int>(concurrency, static_cast<int>(n)));

    std::vector<std::optional<Result>> results(n);
    std::mutex mutex;
    std::condition_variable cv;
    std::atomic<std::size_t> cursor{0};

    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = cursor.fetch_add(1);
                if (i >= n) return;
                Result r = work(i);  // contract: work() never throws
                {
                    std::lock_guard lock(mutex);
                    results[i] = std::move(r);
                }
                cv.notify_all();
            }
        });
    }
    for (std::size_t i = 0; i < n; ++i) {
        std::unique_lock lock(mutex);
        cv.wait(lock, [&] { return results[i].has_value(); });
        Result r = std::move(*results[i]);
        results[i].reset();
        lock.unlock();
        commit(i, r);
    }
    for (auto& t : pool) t.join();
}

struct ChainResult {
    std::vector<GenerationRecord> records;
    std::vector<json> failures;
    int skipped = 0;
};

json failure_entry(const std::string& stage, const std::string& model, int run,
                   const std::string& ad_id, const std::string& detail,
                   const std::string& error) {
    json j;
    j["stage"] = stage;
    j["model"] = model;
    j["run"] = run;
    j["ad_id"] = ad_id;
    if (!detail.empty()) j["detail"] = detail;
    j["error"] = error;
    return j;
}

std::string normalized_lower(std::string_view s) {
    const auto toks = text::tokenize(s);
    std::string out;
    for (const auto& t : toks) {
        if (!out.empty()) out += ' ';
        out += t;
    }
    return out;
}

// --- minimal RFC 4180 CSV ------------------------------------------------

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string out = "\"";
    for (const char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

std::vector<std::vector<std::string>> csv_parse(const std::string& body,
                                                const std::string& where) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    std::size_t i = 0;
    const auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    const auto end_row = [&] {
        end_field();
        // Skip fully blank rows (trailing newline artifacts).
        if (row.size() != 1 || !row[0].empty()) rows.push_back(row);
        row.clear();
    };
    while (i < body.size()) {
        const char c = body[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < body.size() && body[i + 1] == '"') {
                    field += '"';
                    i += 2;
                    continue;
                }
                quoted = false;
                ++i;
                continue;
            }
            field += c;
            ++i;
            continue;
        }
        if (c == '"' && !field_started && field.empty()) {
            quoted = true;
            field_started = true;
            ++i;
            continue;
        }
        if (c == ',') {
            end_field();
            ++i;
            continue;
        }
        if (c == '\r') {
            ++i;
            continue;
        }
        if (c == '\n') {
            end_row();
            ++i;
            continue;
        }
        field += c;
        field_started = true;
        ++i;
    }
    if (quoted) throw Error(Errc::parse, where + ": unterminated quoted field");
    if (field_started || !field.empty() || !row.empty()) end_row();
    return rows;
}

}  // namespace

// --- Variant -------------------------------------------------------------

std::string_view to_string(Variant v) {
    return v == Variant::plain ? "plain" : "marker";
}

Variant variant_from_string(std::string_view s) {
    if (s == "plain") return Variant::plain;
    if (s == "marker") return Variant::marker;
    throw Error(Errc::parse, "unknown variant '" + std::string(s) + "' (plain|marker)");
}

// --- RunConfig -----------------------------------------------------------

void RunConfig::validate() const {
    if (models.empty()) throw Error(Errc::invalid_argument, "config: no models given");
    for (const auto& m : models)
        if (m.empty()) throw Error(Errc::invalid_argument, "config: empty model id");
    if (runs_per_model < 1)
        throw Error(Errc::invalid_argument, "config: runs_per_model must be >= 1");
    if (temperature < 0)
        throw Error(Errc::invalid_argument, "config: temperature must be >= 0");
    if (max_tokens < 1) throw Error(Errc::invalid_argument, "config: max_tokens must be >= 1");
    if (concurrency_limit < 1)
        throw Error(Errc::invalid_argument, "config: concurrency_limit must be >= 1");
}

json RunConfig::to_json() const {
    json j;
    j["models"] = models;
    j["runs_per_model"] = runs_per_model;
    j["temperature"] = temperature;
    j["max_tokens"] = max_tokens;
    j["concurrency_limit"] = concurrency_limit;
    j["seed"] = seed;
    j["corpus_path"] = corpus_path;
    j["models_config"] = models_config;
    return j;
}

RunConfig RunConfig::from_json(const nlohmann::ordered_json& j) {
    RunConfig cfg;
    try {
        if (j.contains("models")) cfg.models = j.at("models").get<std::vector<std::string>>();
        if (j.contains("runs_per_model")) cfg.runs_per_model = j.at("runs_per_model").get<int>();
        if (j.contains("temperature")) cfg.temperature = j.at("temperature").get<double>();
        if (j.contains("max_tokens")) cfg.max_tokens = j.at("max_tokens").get<int>();
        if (j.contains("concurrency_limit"))
            cfg.concurrency_limit = j.at("concurrency_limit").get<int>();
        if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("corpus_path")) cfg.corpus_path = j.at("corpus_path").get<std::string>();
        if (j.contains("models_config")) cfg.models_config = j.at("models_config");
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::parse, std::string("config: ") + e.what());
    }
    return cfg;
}

// --- RunStore ------------------------------------------------------------

RunStore::RunStore(fs::path dir, RunConfig config)
    : dir_(std::move(dir)), config_(std::move(config)) {}

RunStore RunStore::create(const fs::path& dir, RunConfig config) {
    config.validate();
    fs::create_directories(dir);
    std::ofstream out(dir / "config.json", std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io, "cannot write " + (dir / "config.json").string());
    out << config.to_json().dump(2) << '\n';
    return RunStore(dir, std::move(config));
}

RunStore RunStore::open(const fs::path& dir) {
    std::ifstream in(dir / "config.json");
    if (!in)
        throw Error(Errc::state, "not a run directory (no config.json): " + dir.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(Errc::parse, (dir / "config.json").string() + ": " + e.what());
    }
    RunConfig cfg = RunConfig::from_json(j);
    cfg.validate();
    return RunStore(dir, std::move(cfg));
}

fs::path RunStore::records_path(Phase phase, const std::string& model, int run) const {
    const char* base = nullptr;
    switch (phase) {
        case Phase::forget: base = "phase1"; break;
        case Phase::expand_plain: base = "phase2_plain"; break;
        case Phase::expand_marker: base = "phase2_marker"; break;
    }
    return dir_ / base / model / ("run" + std::to_string(run)) / "records.jsonl";
}

std::vector<GenerationRecord> RunStore::read_records(Phase phase, const std::string& model,
                                                     int run) const {
    const auto path = records_path(phase, model, run);
    if (!fs::exists(path)) return {};
    std::vector<GenerationRecord> out;
    for (const auto& j : serialize::read_jsonl(path))
        out.push_back(serialize::generation_from_json(j));
    return out;
}

std::vector<corpus::Marker> RunStore::read_markers() const {
    if (!fs::exists(markers_path())) return {};
    std::vector<corpus::Marker> out;
    for (const auto& j : serialize::read_jsonl(markers_path())) {
        corpus::Marker m;
        m.ad_id = j.at("ad_id").get<std::string>();
        m.text = j.at("text").get<std::string>();
        m.category = marker_category_from_string(j.at("category").get<std::string>());
        out.push_back(std::move(m));
    }
    return out;
}

std::vector<MarkerJudgment> RunStore::read_judgments() const {
    if (!fs::exists(judgments_path())) return {};
    std::vector<MarkerJudgment> out;
    for (const auto& j : serialize::read_jsonl(judgments_path()))
        out.push_back(serialize::judgment_from_json(j));
    return out;
}

std::vector<EmergentIdea> RunStore::read_emergent() const {
    if (!fs::exists(emergent_path())) return {};
    std::vector<EmergentIdea> out;
    for (const auto& j : serialize::read_jsonl(emergent_path()))
        out.push_back(serialize::emergent_from_json(j));
    return out;
}

json RunStore::read_manifest() const {
    if (!fs::exists(manifest_path())) {
        json j;
        j["failures"] = json::array();
        j["warnings"] = json::array();
        j["marker_excluded"] = json::array();
        return j;
    }
    std::ifstream in(manifest_path());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(Errc::parse, manifest_path().string() + ": " + e.what());
    }
    for (const char* key : {"failures", "warnings", "marker_excluded"})
        if (!j.contains(key)) j[key] = json::array();
    return j;
}

void RunStore::merge_manifest(const std::vector<json>& failures,
                              const std::vector<std::string>& warnings,
                              const std::vector<std::string>& marker_excluded) const {
    if (failures.empty() && warnings.empty() && marker_excluded.empty() &&
        fs::exists(manifest_path()))
        return;
    json manifest = read_manifest();
    for (const auto& f : failures) manifest["failures"].push_back(f);
    for (const auto& w : warnings) manifest["warnings"].push_back(w);
    std::set<std::string> excluded;
    for (const auto& e : manifest["marker_excluded"]) excluded.insert(e.get<std::string>());
    excluded.insert(marker_excluded.begin(), marker_excluded.end());
    manifest["marker_excluded"] = excluded;
    std::ofstream out(manifest_path(), std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io, "cannot write " + manifest_path().string());
    out << manifest.dump(2) << '\n';
}

// --- Phase 1 -------------------------------------------------------------

PhaseStats run_phase1(RunStore& store, const std::vector<corpus::AdConcept>& ads) {
    const RunConfig& cfg = store.config();
    if (ads.empty()) throw Error(Errc::invalid_argument, "phase1: empty corpus");

    PhaseStats stats;
    std::vector<json> failures;
    auto gate = std::make_shared<gateway::AdmissionGate>(cfg.concurrency_limit);

    for (const auto& model : cfg.models) {
        auto backend = gateway::make_backend(model, cfg.models_config, gate);
        for (int run = 1; run <= cfg.runs_per_model; ++run) {
            const auto existing = store.read_records(Phase::forget, model, run);
            std::set<std::pair<std::string, Level>> done;
            for (const auto& r : existing) done.insert({r.ad_id, r.level});

            const auto path = store.records_path(Phase::forget, model, run);
            fs::create_directories(path.parent_path());
            auto clock = clock_for(model, static_cast<long>(existing.size()));

            const std::function<ChainResult(std::size_t)> work =
                [&](std::size_t i) -> ChainResult {
                const auto& ad = ads[i];
                ChainResult out;
                for (const Level level : kRunLevels) {
                    if (done.count({ad.id, level})) {
                        ++out.skipped;
                        continue;
                    }
                    try {
                        GenerationRecord rec;
                        rec.ad_id = ad.id;
                        rec.model_id = model;
                        rec.phase = Phase::forget;
                        rec.level = level;
                        rec.run_index = run;
                        rec.input_text = ad.text;
                        rec.prompt = prompts::contraction_prompt(ad.text, level);
                        rec.temperature = cfg.temperature;
                        rec.max_tokens = cfg.max_tokens;
                        rec.seed_hint = derive_seed_hint(cfg.seed, model, run, ad.id,
                                                         Phase::forget, level);
                        const gateway::PromptRequest req{model, rec.prompt, cfg.temperature,
                                                         cfg.max_tokens, rec.seed_hint};
                        const auto resp = backend->complete(req);
                        rec.output_text = resp.text;
                        rec.latency_ms = resp.latency_ms;
                        rec.attempt_count = resp.attempt_count;
                        rec.provider_metadata = resp.provider_metadata;
                        out.records.push_back(std::move(rec));
                    } catch (const std::exception& e) {
                        out.failures.push_back(failure_entry(
                            "phase1", model, run, ad.id, std::string(to_string(level)),
                            e.what()));
                    }
                }
                return out;
            };
            const std::function<void(std::size_t, ChainResult&)> commit =
                [&](std::size_t, ChainResult& r) {
                for (auto& rec : r.records) {
                    rec.created_at = clock->next();
                    serialize::append_jsonl(path, serialize::to_json(rec));
                    ++stats.generated;
                }
                stats.skipped += r.skipped;
                stats.failed += static_cast<int>(r.failures.size());
                failures.insert(failures.end(), r.failures.begin(), r.failures.end());
            };
            run_indexed<ChainResult>(ads.size(), cfg.concurrency_limit, work, commit);
        }
    }
    store.merge_manifest(failures, {}, {});
    return stats;
}

// --- Phase 2 -------------------------------------------------------------

PhaseStats run_phase2(RunStore& store, const std::vector<corpus::AdConcept>& ads,
                      Variant variant) {
    const RunConfig& cfg = store.config();
    if (ads.empty()) throw Error(Errc::invalid_argument, "phase2: empty corpus");

    const Phase phase = variant == Variant::plain ? Phase::expand_plain : Phase::expand_marker;

    std::map<std::string, std::vector<corpus::Marker>> marker_groups;
    std::set<std::string> excluded;
    if (variant == Variant::marker) {
        if (!fs::exists(store.markers_path()))
            throw Error(Errc::state, "marker variant requires " +
                                         store.markers_path().string() +
                                         "; run extract-markers first");
        const auto set = corpus::load_markers(store.markers_path(), ads);
        marker_groups = corpus::group_markers(set.markers);
        for (const auto& e : store.read_manifest()["marker_excluded"])
            excluded.insert(e.get<std::string>());
        for (const auto& ad : ads)
            if (!excluded.count(ad.id) && !marker_groups.count(ad.id))
                throw Error(Errc::state, "no markers for ad '" + ad.id +
                                             "'; run extract-markers before the marker "
                                             "variant");
    }

    PhaseStats stats;
    std::vector<json> failures;
    auto gate = std::make_shared<gateway::AdmissionGate>(cfg.concurrency_limit);

    for (const auto& model : cfg.models) {
        auto backend = gateway::make_backend(model, cfg.models_config, gate);
        for (int run = 1; run <= cfg.runs_per_model; ++run) {
            std::map<std::string, std::string> phase1_extreme;
            for (const auto& r : store.read_records(Phase::forget, model, run))
                if (r.level == Level::extreme) phase1_extreme[r.ad_id] = r.output_text;

            std::map<std::pair<std::string, Level>, std::string> existing_out;
            const auto existing = store.read_records(phase, model, run);
            for (const auto& r : existing) existing_out[{r.ad_id, r.level}] = r.output_text;

            const auto path = store.records_path(phase, model, run);
            fs::create_directories(path.parent_path());
            auto clock = clock_for(model, static_cast<long>(existing.size()));

            const std::function<ChainResult(std::size_t)> work =
                [&](std::size_t i) -> ChainResult {
                const auto& ad = ads[i];
                ChainResult out;
                if (variant == Variant::marker && excluded.count(ad.id)) {
                    out.skipped += 3;  // one per level
                    return out;
                }
                const auto p1 = phase1_extreme.find(ad.id);
                if (p1 == phase1_extreme.end()) {
                    out.failures.push_back(failure_entry(
                        variant == Variant::plain ? "phase2_plain" : "phase2_marker", model,
                        run, ad.id, "", "missing phase-1 extreme record"));
                    return out;
                }
                std::string input = p1->second;
                for (const Level level : kRunLevels) {
                    const auto prior = existing_out.find({ad.id, level});
                    if (prior != existing_out.end()) {
                        input = prior->second;
                        ++out.skipped;
                        continue;
                    }
                    try {
                        GenerationRecord rec;
                        rec.ad_id = ad.id;
                        rec.model_id = model;
                        rec.phase = phase;
                        rec.level = level;
                        rec.run_index = run;
                        rec.input_text = input;
                        rec.prompt =
                            variant == Variant::plain
                                ? prompts::plain_expansion_prompt(
                                      input, level, static_cast<int>(ad.word_count))
                                : prompts::marker_expansion_prompt(
                                      input,
                                      prompts::marker_schedule(marker_groups.at(ad.id), level),
                                      level, static_cast<int>(ad.word_count));
                        rec.temperature = cfg.temperature;
                        rec.max_tokens = cfg.max_tokens;
                        rec.seed_hint =
                            derive_seed_hint(cfg.seed, model, run, ad.id, phase, level);
                        const gateway::PromptRequest req{model, rec.prompt, cfg.temperature,
                                                         cfg.max_tokens, rec.seed_hint};
                        const auto resp = backend->complete(req);
                        rec.output_text = resp.text;
                        rec.latency_ms = resp.latency_ms;
                        rec.attempt_count = resp.attempt_count;
                        rec.provider_metadata = resp.provider_metadata;
                        input = rec.output_text;
                        out.records.push_back(std::move(rec));
                    } catch (const std::exception& e) {
                        out.failures.push_back(failure_entry(
                            variant == Variant::plain ? "phase2_plain" : "phase2_marker",
                            model, run, ad.id,
                            std::string(to_string(level)) + "; chain abandoned", e.what()));
                        break;  // later levels depend on this output
                    }
                }
                return out;
            };
            const std::function<void(std::size_t, ChainResult&)> commit =
                [&](std::size_t, ChainResult& r) {
                for (auto& rec : r.records) {
                    rec.created_at = clock->next();
                    serialize::append_jsonl(path, serialize::to_json(rec));
                    ++stats.generated;
                }
                stats.skipped += r.skipped;
                stats.failed += static_cast<int>(r.failures.size());
                failures.insert(failures.end(), r.failures.begin(), r.failures.end());
            };
            run_indexed<ChainResult>(ads.size(), cfg.concurrency_limit, work, commit);
        }
    }
    store.merge_manifest(failures, {}, {});
    return stats;
}

// --- Marker extraction ---------------------------------------------------

ExtractStats extract_markers(RunStore& store, const std::vector<corpus::AdConcept>& ads,
                             const std::string& judge_model,
                             const std::vector<std::string>& sample_ids) {
    const RunConfig& cfg = store.config();
    if (ads.empty()) throw Error(Errc::invalid_argument, "extract-markers: empty corpus");

    std::vector<const corpus::AdConcept*> selected;
    if (sample_ids.empty()) {
        for (const auto& ad : ads) selected.push_back(&ad);
    } else {
        std::map<std::string, const corpus::AdConcept*> by_id;
        for (const auto& ad : ads) by_id[ad.id] = &ad;
        for (const auto& id : sample_ids) {
            const auto it = by_id.find(id);
            if (it == by_id.end())
                throw Error(Errc::invalid_argument,
                            "extract-markers: unknown ad id '" + id + "'");
            selected.push_back(it->second);
        }
    }

    std::set<std::string> have;
    for (const auto& m : store.read_markers()) have.insert(m.ad_id);

    auto gate = std::make_shared<gateway::AdmissionGate>(cfg.concurrency_limit);
    auto backend = gateway::make_backend(judge_model, cfg.models_config, gate);

    ExtractStats stats;
    std::vector<json> failures;
    std::vector<std::string> warnings;
    std::vector<std::string> excluded;

    struct ExtractResult {
        std::vector<prompts::ParsedMarker> markers;
        std::vector<std::string> warnings;
        std::optional<json> failure;
        bool skipped = false;
    };

    const std::function<ExtractResult(std::size_t)> work =
        [&](std::size_t i) -> ExtractResult {
        const auto& ad = *selected[i];
        ExtractResult out;
        if (have.count(ad.id)) {
            out.skipped = true;
            return out;
        }
        try {
            const gateway::PromptRequest req{judge_model,
                                             prompts::marker_extraction_prompt(ad.text),
                                             cfg.temperature, cfg.max_tokens, -1};
            const auto resp = backend->complete(req);
            auto parsed = prompts::parse_marker_reply(resp.text);
            out.markers = std::move(parsed.markers);
            for (auto& w : parsed.warnings)
                out.warnings.push_back("extract-markers ad '" + ad.id + "': " + w);
        } catch (const std::exception& e) {
            out.failure = failure_entry("extract-markers", judge_model, 0, ad.id, "", e.what());
        }
        return out;
    };
    const std::function<void(std::size_t, ExtractResult&)> commit =
        [&](std::size_t i, ExtractResult& r) {
        const auto& ad = *selected[i];
        if (r.skipped) {
            ++stats.skipped;
            return;
        }
        if (r.failure) {
            failures.push_back(*r.failure);
            return;
        }
        ++stats.ads_processed;
        warnings.insert(warnings.end(), r.warnings.begin(), r.warnings.end());
        if (r.markers.empty()) {
            ++stats.excluded;
            excluded.push_back(ad.id);
            warnings.push_back("extract-markers ad '" + ad.id +
                               "': zero parseable markers; excluded from marker-variant runs");
            return;
        }
        for (const auto& m : r.markers) {
            json j;
            j["ad_id"] = ad.id;
            j["text"] = m.text;
            j["category"] = to_string(m.category);
            serialize::append_jsonl(store.markers_path(), j);
            ++stats.markers_written;
        }
    };
    run_indexed<ExtractResult>(selected.size(), cfg.concurrency_limit, work, commit);

    store.merge_manifest(failures, warnings, excluded);
    return stats;
}

// --- Marker survival judging ---------------------------------------------

JudgeStats judge_marker_survival(RunStore& store, const std::string& judge_model) {
    const RunConfig& cfg = store.config();
    const auto markers = store.read_markers();
    if (markers.empty())
        throw Error(Errc::state, "no markers in " + store.markers_path().string() +
                                     "; run extract-markers first");

    // Ads in markers-file order, each with its marker positions (priority order).
    std::vector<std::pair<std::string, std::vector<std::size_t>>> ad_markers;
    std::map<std::string, std::size_t> ad_pos;
    for (std::size_t i = 0; i < markers.size(); ++i) {
        const auto& ad_id = markers[i].ad_id;
        auto it = ad_pos.find(ad_id);
        if (it == ad_pos.end()) {
            ad_pos[ad_id] = ad_markers.size();
            ad_markers.push_back({ad_id, {i}});
        } else {
            ad_markers[it->second].second.push_back(i);
        }
    }

    std::set<std::string> done;
    for (const auto& j : store.read_judgments())
        done.insert(j.marker_id + "\x1f" + j.model_id + "\x1f" +
                    std::string(to_string(j.level)) + "\x1f" + std::to_string(j.run_index));

    auto gate = std::make_shared<gateway::AdmissionGate>(cfg.concurrency_limit);
    auto backend = gateway::make_backend(judge_model, cfg.models_config, gate);

    JudgeStats stats;
    std::vector<json> failures;

    struct JudgeResult {
        std::vector<MarkerJudgment> judgments;
        std::vector<json> failures;
        int skipped = 0;
        int errors = 0;
    };

    for (const auto& model : cfg.models) {
        for (int run = 1; run <= cfg.runs_per_model; ++run) {
            std::map<std::pair<std::string, Level>, const GenerationRecord*> outputs;
            const auto records = store.read_records(Phase::forget, model, run);
            for (const auto& r : records) outputs[{r.ad_id, r.level}] = &r;

            const std::function<JudgeResult(std::size_t)> work =
                [&](std::size_t i) -> JudgeResult {
                const auto& [ad_id, positions] = ad_markers[i];
                JudgeResult out;
                for (std::size_t k = 0; k < positions.size(); ++k) {
                    const auto& marker = markers[positions[k]];
                    const std::string mid = corpus::marker_id(ad_id, k + 1);
                    for (const Level level : kRunLevels) {
                        const std::string key = mid + "\x1f" + model + "\x1f" +
                                                std::string(to_string(level)) + "\x1f" +
                                                std::to_string(run);
                        if (done.count(key)) {
                            ++out.skipped;
                            continue;
                        }
                        const auto rec = outputs.find({ad_id, level});
                        if (rec == outputs.end()) {
                            ++out.skipped;
                            out.failures.push_back(failure_entry(
                                "judge-markers", model, run, ad_id,
                                mid + " at " + std::string(to_string(level)),
                                "no phase-1 record to judge"));
                            continue;
                        }
                        MarkerJudgment judgment;
                        judgment.marker_id = mid;
                        judgment.ad_id = ad_id;
                        judgment.model_id = model;
                        judgment.level = level;
                        judgment.run_index = run;
                        judgment.judge = "llm";
                        try {
                            const auto prompt = prompts::marker_judgment_prompt(
                                marker.text, rec->second->output_text);
                            const gateway::PromptRequest req{judge_model, prompt,
                                                             cfg.temperature, cfg.max_tokens,
                                                             -1};
                            std::optional<prompts::VerdictReply> verdict;
                            for (int attempt = 0; attempt < 2 && !verdict; ++attempt) {
                                const auto resp = backend->complete(req);
                                try {
                                    verdict = prompts::parse_verdict_reply(resp.text);
                                } catch (const Error& pe) {
                                    if (attempt == 1) {
                                        judgment.error = pe.what();
                                        judgment.verdict = Verdict::absent;
                                        judgment.score = 0.0;
                                    }
                                }
                            }
                            if (verdict) {
                                judgment.verdict = verdict->verdict;
                                judgment.score = verdict_score(verdict->verdict);
                                judgment.justification = verdict->justification;
                            } else {
                                ++out.errors;
                            }
                        } catch (const std::exception& e) {
                            judgment.error = e.what();
                            judgment.verdict = Verdict::absent;
                            judgment.score = 0.0;
                            ++out.errors;
                        }
                        out.judgments.push_back(std::move(judgment));
                    }
                }
                return out;
            };
            const std::function<void(std::size_t, JudgeResult&)> commit =
                [&](std::size_t, JudgeResult& r) {
                for (const auto& j : r.judgments) {
                    serialize::append_jsonl(store.judgments_path(), serialize::to_json(j));
                    ++stats.judgments;
                }
                stats.errors += r.errors;
                stats.skipped += r.skipped;
                failures.insert(failures.end(), r.failures.begin(), r.failures.end());
            };
            run_indexed<JudgeResult>(ad_markers.size(), cfg.concurrency_limit, work, commit);
        }
    }
    store.merge_manifest(failures, {}, {});
    return stats;
}

// --- Emergent-idea coding ------------------------------------------------

EmergentStats code_emergent_ideas(RunStore& store, const std::vector<corpus::AdConcept>& ads,
                                  const std::string& judge_model, int sample_size) {
    const RunConfig& cfg = store.config();
    if (ads.empty()) throw Error(Errc::invalid_argument, "code-emergent: empty corpus");
    if (sample_size < 1)
        throw Error(Errc::invalid_argument, "code-emergent: sample size must be >= 1");

    // Seeded partial Fisher-Yates over corpus positions; selection is stable
    // across invocations for a fixed seed.
    std::vector<std::size_t> order(ads.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(cfg.seed);
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(sample_size),
                                                ads.size());
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng() % (order.size() - i));
        std::swap(order[i], order[j]);
    }
    std::vector<std::size_t> sample(order.begin(), order.begin() + static_cast<long>(k));
    std::sort(sample.begin(), sample.end());

    const int last_run = cfg.runs_per_model;
    std::set<std::string> done;
    for (const auto& idea : store.read_emergent()) done.insert(idea.ad_id + "\x1f" + idea.model_id);

    auto gate = std::make_shared<gateway::AdmissionGate>(cfg.concurrency_limit);
    auto backend = gateway::make_backend(judge_model, cfg.models_config, gate);

    EmergentStats stats;
    std::vector<json> failures;
    std::vector<std::string> warnings;

    struct Job {
        const corpus::AdConcept* ad;
        std::string model;
        const GenerationRecord* record;  // null when missing
    };
    std::vector<Job> jobs;
    std::vector<std::vector<GenerationRecord>> record_storage;
    for (const auto& model : cfg.models) {
        record_storage.push_back(store.read_records(Phase::expand_plain, model, last_run));
        std::map<std::string, const GenerationRecord*> extremes;
        for (const auto& r : record_storage.back())
            if (r.level == Level::extreme) extremes[r.ad_id] = &r;
        for (const std::size_t idx : sample) {
            const auto& ad = ads[idx];
            const auto it = extremes.find(ad.id);
            jobs.push_back({&ad, model, it == extremes.end() ? nullptr : it->second});
        }
    }

    struct EmergentResult {
        std::vector<EmergentIdea> ideas;
        std::vector<std::string> warnings;
        std::optional<json> failure;
        int discarded = 0;
        bool skipped = false;
    };

    const std::function<EmergentResult(std::size_t)> work =
        [&](std::size_t i) -> EmergentResult {
        const Job& job = jobs[i];
        EmergentResult out;
        if (done.count(job.ad->id + "\x1f" + job.model)) {
            out.skipped = true;
            return out;
        }
        if (job.record == nullptr) {
            out.failure = failure_entry("code-emergent", job.model, last_run, job.ad->id, "",
                                        "no extreme plain-expansion record");
            return out;
        }
        try {
            const auto prompt =
                prompts::emergent_idea_prompt(job.ad->text, job.record->output_text);
            const gateway::PromptRequest req{judge_model, prompt, cfg.temperature,
                                             cfg.max_tokens, -1};
            const auto resp = backend->complete(req);
            auto parsed = prompts::parse_emergent_reply(resp.text);
            for (auto& w : parsed.warnings)
                out.warnings.push_back("code-emergent ad '" + job.ad->id + "': " + w);
            const std::string original_norm = normalized_lower(job.ad->text);
            for (auto& idea : parsed.ideas) {
                const std::string idea_norm = normalized_lower(idea.text);
                if (!idea_norm.empty() &&
                    original_norm.find(idea_norm) != std::string::npos) {
                    ++out.discarded;  // present in the original: not emergent
                    continue;
                }
                EmergentIdea row;
                row.ad_id = job.ad->id;
                row.model_id = job.model;
                row.run_index = last_run;
                row.text = std::move(idea.text);
                row.category = idea.category;
                out.ideas.push_back(std::move(row));
            }
        } catch (const std::exception& e) {
            out.failure =
                failure_entry("code-emergent", job.model, last_run, job.ad->id, "", e.what());
        }
        return out;
    };
    const std::function<void(std::size_t, EmergentResult&)> commit =
        [&](std::size_t, EmergentResult& r) {
        if (r.skipped) {
            ++stats.skipped;
            return;
        }
        if (r.failure) {
            failures.push_back(*r.failure);
            return;
        }
        ++stats.ads_sampled;
        warnings.insert(warnings.end(), r.warnings.begin(), r.warnings.end());
        stats.discarded += r.discarded;
        for (const auto& idea : r.ideas) {
            serialize::append_jsonl(store.emergent_path(), serialize::to_json(idea));
            ++stats.ideas;
        }
    };
    run_indexed<EmergentResult>(jobs.size(), cfg.concurrency_limit, work, commit);

    store.merge_manifest(failures, warnings, {});
    return stats;
}

// --- Scoring -------------------------------------------------------------

ScoreStats score_run(RunStore& store, const std::vector<corpus::AdConcept>& ads) {
    const RunConfig& cfg = store.config();
    std::map<std::string, const corpus::AdConcept*> by_id;
    for (const auto& ad : ads) by_id[ad.id] = &ad;

    ScoreStats stats;
    std::vector<json> rows;
    const metrics::MeteorParams params;

    for (const Phase phase : {Phase::forget, Phase::expand_plain, Phase::expand_marker}) {
        for (const auto& model : cfg.models) {
            for (int run = 1; run <= cfg.runs_per_model; ++run) {
                for (const auto& rec : store.read_records(phase, model, run)) {
                    metrics::MetricRecord m;
                    const auto ad = by_id.find(rec.ad_id);
                    if (ad == by_id.end()) {
                        m.ad_id = rec.ad_id;
                        m.model_id = rec.model_id;
                        m.phase = rec.phase;
                        m.level = rec.level;
                        m.run_index = rec.run_index;
                        const std::string err = "ad '" + rec.ad_id + "' not in corpus";
                        m.cosine.error = err;
                        m.meteor.error = err;
                        m.entropy.error = err;
                        m.ngram_uniqueness.error = err;
                    } else {
                        m = metrics::score_pair(*ad->second, rec, params);
                    }
                    for (const auto* cell :
                         {&m.cosine, &m.meteor, &m.entropy, &m.ngram_uniqueness})
                        if (!cell->ok()) ++stats.error_cells;
                    rows.push_back(serialize::to_json(m));
                    ++stats.records;
                }
            }
        }
    }
    if (stats.records == 0)
        throw Error(Errc::state,
                    "nothing to score: phase1 holds no records (run phase1 first)");
    serialize::write_jsonl(store.scores_path(), rows);
    return stats;
}

// --- Verification round-trip ---------------------------------------------

namespace {

std::string resolve_model_scope(const std::vector<MarkerJudgment>& judgments,
                                const std::string& requested) {
    std::set<std::string> models;
    for (const auto& j : judgments) models.insert(j.model_id);
    if (!requested.empty()) {
        if (!models.count(requested))
            throw Error(Errc::invalid_argument,
                        "no judgments for model '" + requested + "'");
        return requested;
    }
    if (models.size() == 1) return *models.begin();
    std::string list;
    for (const auto& m : models) list += (list.empty() ? "" : ", ") + m;
    throw Error(Errc::invalid_argument,
                "judgments cover several models (" + list + "); pass an explicit model");
}

}  // namespace

void export_for_verification(const RunStore& store, const fs::path& csv_path,
                             const std::string& model_id) {
    const auto judgments = store.read_judgments();
    if (judgments.empty())
        throw Error(Errc::state, "no judgments in " + store.judgments_path().string());
    const std::string scope = resolve_model_scope(judgments, model_id);

    std::ofstream out(csv_path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io, "cannot write " + csv_path.string());
    out << "marker_id,level,run,verdict,justification\r\n";
    for (const auto& j : judgments) {
        if (j.model_id != scope) continue;
        out << csv_escape(j.marker_id) << ',' << to_string(j.level) << ',' << j.run_index
            << ',' << to_string(j.verdict) << ',' << csv_escape(j.justification) << "\r\n";
    }
    if (!out) throw Error(Errc::io, "write failed: " + csv_path.string());
}

ImportStats import_verification(RunStore& store, const fs::path& csv_path,
                                const std::string& model_id) {
    auto judgments = store.read_judgments();
    if (judgments.empty())
        throw Error(Errc::state, "no judgments in " + store.judgments_path().string());
    const std::string scope = resolve_model_scope(judgments, model_id);

    std::ifstream in(csv_path, std::ios::binary);
    if (!in) throw Error(Errc::io, "cannot open " + csv_path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    const auto rows = csv_parse(buf.str(), csv_path.string());
    if (rows.empty()) throw Error(Errc::parse, csv_path.string() + ": empty file");

    const std::vector<std::string> header = {"marker_id", "level", "run", "verdict",
                                             "justification"};
    if (rows[0] != header)
        throw Error(Errc::parse, csv_path.string() +
                                     ": header must be marker_id,level,run,verdict,"
                                     "justification");

    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < judgments.size(); ++i) {
        const auto& j = judgments[i];
        if (j.model_id != scope) continue;
        index[j.marker_id + "\x1f" + std::string(to_string(j.level)) + "\x1f" +
              std::to_string(j.run_index)] = i;
    }

    ImportStats stats;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        const std::string at = csv_path.string() + " row " + std::to_string(r + 1);
        if (row.size() != header.size())
            throw Error(Errc::parse, at + ": expected " + std::to_string(header.size()) +
                                         " columns, got " + std::to_string(row.size()));
        Level level;
        Verdict verdict;
        int run = 0;
        try {
            level = level_from_string(row[1]);
            run = std::stoi(row[2]);
            verdict = verdict_from_string(row[3]);
        } catch (const std::exception& e) {
            throw Error(Errc::parse, at + ": " + e.what());
        }
        const auto it =
            index.find(row[0] + "\x1f" + std::string(to_string(level)) + "\x1f" +
                       std::to_string(run));
        if (it == index.end())
            throw Error(Errc::parse, at + ": no judgment matches (" + row[0] + ", " +
                                         row[1] + ", " + row[2] + ")");
        ++stats.rows;
        auto& j = judgments[it->second];
        if (j.verdict != verdict) {
            j.verdict = verdict;
            j.score = verdict_score(verdict);
            j.judge = "human";
            j.verified = true;
            ++stats.updated;
        }
    }

    std::vector<json> lines;
    lines.reserve(judgments.size());
    for (const auto& j : judgments) lines.push_back(serialize::to_json(j));
    serialize::write_jsonl(store.judgments_path(), lines);
    return stats;
}

}  // namespace creastress::orchestrator
