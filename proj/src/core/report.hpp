#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "corpus.hpp"
#include "metrics.hpp"
#include "orchestrator.hpp"
#include "records.hpp"
#include "types.hpp"

namespace creastress::report {

struct MetricAggregate {
    std::vector<double> run_means;  // one entry per run that had valid cells, run order
    double mean = 0.0;              // mean of run_means
    double sd = 0.0;                // sample SD (n-1) of run_means; 0 when n <= 1
    int valid_cells = 0;
    int excluded_cells = 0;  // error cells, dropped rather than zero-filled

    bool empty() const { return run_means.empty(); }
};

struct AggregateRow {
    Phase phase = Phase::forget;
    std::string model_id;
    Level level = Level::mild;
    MetricAggregate cosine;
    MetricAggregate meteor;
    MetricAggregate entropy;
    MetricAggregate uniqueness;
    bool single_run = false;  // only one run contributed to this cell
};

// Two-level aggregation per (phase, model, level): within a run, the
// unweighted mean over ads; across runs, mean and sample SD. Error cells are
// excluded and counted. Rows come out in phase order, then first-seen model
// order, then level order; a group whose cells are all errors still yields a
// row (with empty aggregates).
std::vector<AggregateRow> aggregate_metrics(const std::vector<metrics::MetricRecord>& records);

struct MarkerStats {
    MarkerCategory category = MarkerCategory::metaphorical;
    std::map<Level, double> mean_score;  // per judged level
    std::optional<double> pct_drop;      // 100·(mild - extreme)/mild when defined
    int n_judgments = 0;
    int error_cells = 0;
};

// Mean survival score per (category × level), pooled over markers, runs and
// models; error-cell judgments are excluded and counted. store_markers gives
// each marker_id its category. Categories appear in declaration order;
// absent ones are omitted.
std::vector<MarkerStats> marker_survival_stats(const std::vector<MarkerJudgment>& judgments,
                                               const std::vector<corpus::Marker>& store_markers);

// Fractions per category, summing to 1 within 1e-12. Throws on empty input.
std::map<MarkerCategory, double> emergent_type_distribution(
    const std::vector<EmergentIdea>& ideas);

// Bigrams over the shared tokenizer, counted with multiplicity across all
// texts, ranked by count descending then lexicographically, truncated to
// top_k.
std::vector<std::pair<std::string, std::size_t>> bigram_frequency(
    const std::vector<std::string>& texts, std::size_t top_k);

struct ReportResult {
    std::vector<std::filesystem::path> files;
    std::vector<std::string> gaps;  // inputs that were missing
};

// Renders report/ inside the run directory: Markdown master, one CSV per
// table, plot-data CSVs (level on x, one series per model), and a JSON
// summary. Missing inputs shrink the report and land in `gaps`. Output is
// byte-deterministic for an unchanged store.
ReportResult render_report(const orchestrator::RunStore& store,
                           const std::vector<corpus::AdConcept>& ads, std::size_t top_k = 50);

}  // namespace creastress::report
