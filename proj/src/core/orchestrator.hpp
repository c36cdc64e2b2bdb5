#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "corpus.hpp"
#include "records.hpp"
#include "types.hpp"

namespace creastress::orchestrator {

enum class Variant { plain, marker };

std::string_view to_string(Variant v);
Variant variant_from_string(std::string_view s);

struct RunConfig {
    std::vector<std::string> models;
    int runs_per_model = 3;
    double temperature = 0.7;
    int max_tokens = 1024;
    int concurrency_limit = 4;
    std::uint64_t seed = 0;
    std::string corpus_path;  // echoed so later stages can reload the corpus
    nlohmann::json models_config = nlohmann::json::object();

    void validate() const;  // throws Errc::invalid_argument
    nlohmann::ordered_json to_json() const;
    static RunConfig from_json(const nlohmann::ordered_json& j);
};

// One run directory. Layout:
//   config.json
//   phase1/<model>/run<k>/records.jsonl
//   phase2_plain/<model>/run<k>/records.jsonl
//   phase2_marker/<model>/run<k>/records.jsonl
//   markers.jsonl  judgments.jsonl  emergent.jsonl  scores.jsonl
//   manifest.json  report/
class RunStore {
public:
    // Creates the directory and (over)writes config.json with the given
    // effective config.
    static RunStore create(const std::filesystem::path& dir, RunConfig config);

    // Opens an existing run directory; config.json must be present.
    static RunStore open(const std::filesystem::path& dir);

    const RunConfig& config() const { return config_; }
    const std::filesystem::path& dir() const { return dir_; }

    std::filesystem::path records_path(Phase phase, const std::string& model, int run) const;

    // Missing file reads as empty (the phase simply has not run yet).
    std::vector<GenerationRecord> read_records(Phase phase, const std::string& model,
                                               int run) const;

    std::filesystem::path markers_path() const { return dir_ / "markers.jsonl"; }
    std::filesystem::path judgments_path() const { return dir_ / "judgments.jsonl"; }
    std::filesystem::path emergent_path() const { return dir_ / "emergent.jsonl"; }
    std::filesystem::path scores_path() const { return dir_ / "scores.jsonl"; }
    std::filesystem::path manifest_path() const { return dir_ / "manifest.json"; }
    std::filesystem::path report_dir() const { return dir_ / "report"; }

    // Markers without corpus validation (the judging stages need only the
    // stored rows). File order is priority order.
    std::vector<corpus::Marker> read_markers() const;
    std::vector<MarkerJudgment> read_judgments() const;
    std::vector<EmergentIdea> read_emergent() const;

    // Manifest: {"failures": [...], "warnings": [...], "marker_excluded": [...]}
    nlohmann::ordered_json read_manifest() const;
    void merge_manifest(const std::vector<nlohmann::ordered_json>& failures,
                        const std::vector<std::string>& warnings,
                        const std::vector<std::string>& marker_excluded) const;

private:
    RunStore(std::filesystem::path dir, RunConfig config);

    std::filesystem::path dir_;
    RunConfig config_;
};

struct PhaseStats {
    int generated = 0;
    int skipped = 0;  // records already present (resume)
    int failed = 0;
};

// Phase 1: every (ad × model × run × level) contraction, always prompted
// from the original ad text. Resume generates only missing records.
PhaseStats run_phase1(RunStore& store, const std::vector<corpus::AdConcept>& ads);

// Phase 2: chained expansion mild -> moderate -> extreme starting from the
// Phase-1 extreme output of the same (ad, model, run). The marker variant
// requires markers for every non-excluded ad before any call is made.
PhaseStats run_phase2(RunStore& store, const std::vector<corpus::AdConcept>& ads,
                      Variant variant);

struct ExtractStats {
    int ads_processed = 0;
    int markers_written = 0;
    int excluded = 0;  // ads with zero parseable markers
    int skipped = 0;   // ads that already had markers
};

// One extraction per ad (originals do not vary by run). sample_ids empty
// means the whole corpus.
ExtractStats extract_markers(RunStore& store, const std::vector<corpus::AdConcept>& ads,
                             const std::string& judge_model,
                             const std::vector<std::string>& sample_ids = {});

struct JudgeStats {
    int judgments = 0;
    int errors = 0;   // unusable judge replies recorded as error cells
    int skipped = 0;  // already judged, or no Phase-1 output to judge
};

// One judgment per (marker × level × run × model) against the Phase-1
// output at that level. An unparseable verdict is re-asked once, then
// recorded as an error cell.
JudgeStats judge_marker_survival(RunStore& store, const std::string& judge_model);

struct EmergentStats {
    int ads_sampled = 0;
    int ideas = 0;
    int discarded = 0;  // judged non-emergent (text present in the original)
    int skipped = 0;
};

// Codes emergent ideas on the last run's extreme plain-expansion output per
// (sampled ad × model). Sampling is seeded by config.seed.
EmergentStats code_emergent_ideas(RunStore& store, const std::vector<corpus::AdConcept>& ads,
                                  const std::string& judge_model, int sample_size);

struct ScoreStats {
    int records = 0;
    int error_cells = 0;
};

// Scores every persisted generation against its original ad and rewrites
// scores.jsonl deterministically.
ScoreStats score_run(RunStore& store, const std::vector<corpus::AdConcept>& ads);

// Human verification round-trip. The CSV has exactly the columns
// (marker_id, level, run, verdict, justification) and is scoped to a single
// model: pass model_id, or leave empty when the store holds just one.
// Import honors edits to the verdict column only; changed verdicts get
// judge="human", verified=true, and the remapped score.
void export_for_verification(const RunStore& store, const std::filesystem::path& csv_path,
                             const std::string& model_id = "");

struct ImportStats {
    int rows = 0;
    int updated = 0;
};

ImportStats import_verification(RunStore& store, const std::filesystem::path& csv_path,
                                const std::string& model_id = "");

}  // namespace creastress::orchestrator
