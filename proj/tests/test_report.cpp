#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "core/corpus.hpp"
#include "core/error.hpp"
#include "core/metrics.hpp"
#include "core/orchestrator.hpp"
#include "core/report.hpp"
#include "core/text.hpp"
#include "core/types.hpp"
#include "doctest.h"

using namespace creastress;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path = fs::temp_directory_path() /
               ("cs_report_" + tag + "_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter.fetch_add(1)));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

metrics::MetricRecord mrec(const std::string& ad, const std::string& model, Phase phase,
                           Level level, int run, double value) {
    metrics::MetricRecord r;
    r.ad_id = ad;
    r.model_id = model;
    r.phase = phase;
    r.level = level;
    r.run_index = run;
    r.cosine.value = value;
    r.meteor.value = value / 2;
    r.entropy.value = value * 4;
    r.ngram_uniqueness.value = 1 - value;
    return r;
}

corpus::Marker marker(const std::string& ad_id, const std::string& text, MarkerCategory cat) {
    corpus::Marker m;
    m.ad_id = ad_id;
    m.text = text;
    m.category = cat;
    return m;
}

MarkerJudgment judgment(const std::string& marker_id, Level level, double score, int run = 1) {
    MarkerJudgment j;
    j.marker_id = marker_id;
    j.ad_id = marker_id.substr(0, marker_id.find('#'));
    j.model_id = "mock";
    j.level = level;
    j.run_index = run;
    j.score = score;
    j.verdict = score == 1.0 ? Verdict::present : (score == 0.5 ? Verdict::partly : Verdict::absent);
    return j;
}

EmergentIdea idea(MarkerCategory cat) {
    EmergentIdea e;
    e.ad_id = "ad-a";
    e.model_id = "mock";
    e.text = "an idea";
    e.category = cat;
    return e;
}

corpus::AdConcept make_ad(const std::string& id, const std::string& text) {
    corpus::AdConcept ad;
    ad.id = id;
    ad.text = text;
    ad.word_count = text::word_count(text);
    return ad;
}

}  // namespace

TEST_CASE("aggregation averages within runs first, then across runs") {
    // Run means by construction: 0.60, 0.62, 0.64.
    std::vector<metrics::MetricRecord> records = {
        mrec("ad-a", "m1", Phase::forget, Level::mild, 1, 0.55),
        mrec("ad-b", "m1", Phase::forget, Level::mild, 1, 0.65),
        mrec("ad-a", "m1", Phase::forget, Level::mild, 2, 0.57),
        mrec("ad-b", "m1", Phase::forget, Level::mild, 2, 0.67),
        mrec("ad-a", "m1", Phase::forget, Level::mild, 3, 0.59),
        mrec("ad-b", "m1", Phase::forget, Level::mild, 3, 0.69),
    };
    const auto rows = report::aggregate_metrics(records);
    REQUIRE(rows.size() == 1);
    const auto& agg = rows[0].cosine;
    REQUIRE(agg.run_means.size() == 3);
    CHECK(std::abs(agg.run_means[0] - 0.60) < 1e-12);
    CHECK(std::abs(agg.run_means[1] - 0.62) < 1e-12);
    CHECK(std::abs(agg.run_means[2] - 0.64) < 1e-12);
    CHECK(std::abs(agg.mean - 0.62) < 1e-12);
    CHECK(std::abs(agg.sd - 0.02) < 1e-12);
    CHECK(agg.valid_cells == 6);
    CHECK(agg.excluded_cells == 0);
    CHECK_FALSE(rows[0].single_run);
}

TEST_CASE("aggregation of the exact run means 0.60 0.62 0.64") {
    std::vector<metrics::MetricRecord> records = {
        mrec("ad-a", "m1", Phase::forget, Level::extreme, 1, 0.60),
        mrec("ad-a", "m1", Phase::forget, Level::extreme, 2, 0.62),
        mrec("ad-a", "m1", Phase::forget, Level::extreme, 3, 0.64),
    };
    const auto rows = report::aggregate_metrics(records);
    REQUIRE(rows.size() == 1);
    CHECK(std::abs(rows[0].cosine.mean - 0.62) < 1e-12);
    CHECK(std::abs(rows[0].cosine.sd - 0.02) < 1e-12);
}

TEST_CASE("error cells are excluded from aggregation, not zero-filled") {
    auto good = mrec("ad-a", "m1", Phase::forget, Level::mild, 1, 0.8);
    auto bad = mrec("ad-b", "m1", Phase::forget, Level::mild, 1, 0.0);
    bad.cosine = {0.0, "blank output"};
    const auto rows = report::aggregate_metrics({good, bad});
    REQUIRE(rows.size() == 1);
    // Cosine: only the good cell -> mean 0.8 (a zero-fill would give 0.4).
    CHECK(rows[0].cosine.mean == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(rows[0].cosine.valid_cells == 1);
    CHECK(rows[0].cosine.excluded_cells == 1);
    // The other metrics of the bad record still count.
    CHECK(rows[0].meteor.valid_cells == 2);
    CHECK(rows[0].single_run);
    CHECK(rows[0].cosine.sd == 0.0);  // one run -> no spread

    // A group whose every cell errored still yields a (empty-aggregate) row.
    auto all_bad = mrec("ad-a", "m1", Phase::forget, Level::extreme, 1, 0.0);
    all_bad.cosine.error = all_bad.meteor.error = all_bad.entropy.error =
        all_bad.ngram_uniqueness.error = "x";
    const auto rows2 = report::aggregate_metrics({all_bad});
    REQUIRE(rows2.size() == 1);
    CHECK(rows2[0].cosine.empty());
    CHECK(rows2[0].cosine.excluded_cells == 1);
}

TEST_CASE("aggregate rows come out in phase, first-seen model, then level order") {
    std::vector<metrics::MetricRecord> records = {
        mrec("ad-a", "zeta", Phase::expand_plain, Level::extreme, 1, 0.5),
        mrec("ad-a", "zeta", Phase::forget, Level::moderate, 1, 0.5),
        mrec("ad-a", "alpha", Phase::forget, Level::mild, 1, 0.5),
        mrec("ad-a", "zeta", Phase::forget, Level::mild, 1, 0.5),
        mrec("ad-a", "alpha", Phase::expand_marker, Level::mild, 1, 0.5),
    };
    const auto rows = report::aggregate_metrics(records);
    REQUIRE(rows.size() == 5);
    // zeta was seen first, so it precedes alpha within each phase.
    CHECK(rows[0].phase == Phase::forget);
    CHECK(rows[0].model_id == "zeta");
    CHECK(rows[0].level == Level::mild);
    CHECK(rows[1].model_id == "zeta");
    CHECK(rows[1].level == Level::moderate);
    CHECK(rows[2].model_id == "alpha");
    CHECK(rows[2].level == Level::mild);
    CHECK(rows[3].phase == Phase::expand_plain);
    CHECK(rows[4].phase == Phase::expand_marker);
    CHECK(rows[4].model_id == "alpha");
}

TEST_CASE("marker survival pools scores per category and level") {
    const std::vector<corpus::Marker> store_markers = {
        marker("ad-a", "first visual", MarkerCategory::visual),
        marker("ad-a", "second emotional", MarkerCategory::emotional),
        marker("ad-b", "third visual", MarkerCategory::visual),
    };
    std::vector<MarkerJudgment> judgments = {
        judgment("ad-a#1", Level::mild, 1.0),
        judgment("ad-b#1", Level::mild, 0.5),
        judgment("ad-a#1", Level::extreme, 0.5),
        judgment("ad-b#1", Level::extreme, 0.0),
        judgment("ad-a#2", Level::mild, 1.0),
        judgment("ad-a#2", Level::moderate, 0.5),
        judgment("ad-a#2", Level::extreme, 0.0),
    };
    MarkerJudgment errored = judgment("ad-a#1", Level::moderate, 0.0);
    errored.error = "judge unusable";
    judgments.push_back(errored);
    judgments.push_back(judgment("gone#1", Level::mild, 1.0));  // unknown: skipped

    const auto stats = report::marker_survival_stats(judgments, store_markers);
    REQUIRE(stats.size() == 2);

    // Declaration order: emotional before visual.
    CHECK(stats[0].category == MarkerCategory::emotional);
    CHECK(stats[0].n_judgments == 3);
    CHECK(stats[0].error_cells == 0);
    CHECK(stats[0].mean_score.at(Level::mild) == doctest::Approx(1.0));
    CHECK(stats[0].mean_score.at(Level::moderate) == doctest::Approx(0.5));
    CHECK(stats[0].mean_score.at(Level::extreme) == doctest::Approx(0.0));
    REQUIRE(stats[0].pct_drop.has_value());
    CHECK(*stats[0].pct_drop == doctest::Approx(100.0));

    CHECK(stats[1].category == MarkerCategory::visual);
    CHECK(stats[1].n_judgments == 4);
    CHECK(stats[1].error_cells == 1);
    CHECK(stats[1].mean_score.at(Level::mild) == doctest::Approx(0.75));
    CHECK(stats[1].mean_score.count(Level::moderate) == 0);  // only the errored cell
    CHECK(stats[1].mean_score.at(Level::extreme) == doctest::Approx(0.25));
    REQUIRE(stats[1].pct_drop.has_value());
    CHECK(*stats[1].pct_drop == doctest::Approx(100.0 * (0.75 - 0.25) / 0.75));
}

TEST_CASE("pct_drop is undefined when the mild mean is zero or missing") {
    const std::vector<corpus::Marker> store_markers = {
        marker("ad-a", "one", MarkerCategory::slogan_like)};
    const auto no_mild = report::marker_survival_stats(
        {judgment("ad-a#1", Level::extreme, 1.0)}, store_markers);
    REQUIRE(no_mild.size() == 1);
    CHECK_FALSE(no_mild[0].pct_drop.has_value());

    const auto zero_mild = report::marker_survival_stats(
        {judgment("ad-a#1", Level::mild, 0.0), judgment("ad-a#1", Level::extreme, 0.0)},
        store_markers);
    REQUIRE(zero_mild.size() == 1);
    CHECK_FALSE(zero_mild[0].pct_drop.has_value());
}

TEST_CASE("emergent distribution yields fractions that sum to one") {
    const std::vector<EmergentIdea> ideas = {
        idea(MarkerCategory::visual),     idea(MarkerCategory::visual),
        idea(MarkerCategory::emotional),  idea(MarkerCategory::metaphorical),
        idea(MarkerCategory::slogan_like)};
    const auto dist = report::emergent_type_distribution(ideas);
    CHECK(dist.at(MarkerCategory::visual) == doctest::Approx(0.4));
    CHECK(dist.at(MarkerCategory::emotional) == doctest::Approx(0.2));
    double sum = 0.0;
    for (const auto& [cat, f] : dist) sum += f;
    CHECK(std::abs(sum - 1.0) < 1e-12);

    CHECK_THROWS_AS(report::emergent_type_distribution({}), Error);
}

TEST_CASE("bigram frequency counts with multiplicity and breaks ties lexicographically") {
    const std::vector<std::string> texts = {
        "red car red car red car",   // "red car" x3, "car red" x2
        "blue sky blue sky",         // "blue sky" x2, "sky blue" x1
        "red car again",
    };
    const auto top = report::bigram_frequency(texts, 10);
    REQUIRE(top.size() >= 4);
    CHECK(top[0].first == "red car");
    CHECK(top[0].second == 4);
    // Ties at count 2: "blue sky" before "car red" lexicographically.
    CHECK(top[1].first == "blue sky");
    CHECK(top[1].second == 2);
    CHECK(top[2].first == "car red");
    CHECK(top[2].second == 2);

    const auto truncated = report::bigram_frequency(texts, 2);
    CHECK(truncated.size() == 2);

    CHECK_THROWS_AS(report::bigram_frequency({}, 5), Error);
    // Texts with fewer than two tokens produce no bigrams but are accepted.
    CHECK(report::bigram_frequency({"single"}, 5).empty());
}

TEST_CASE("render_report degrades to gaps on an empty store") {
    TempDir tmp("gaps");
    orchestrator::RunConfig cfg;
    cfg.models = {"mock"};
    cfg.corpus_path = "corpus.jsonl";
    auto store = orchestrator::RunStore::create(tmp.path / "run", cfg);

    const auto ads = std::vector<corpus::AdConcept>{
        make_ad("ad-a", "quiet lanes where cyclists greet bakers at dawn")};
    const auto result = report::render_report(store, ads, 10);

    CHECK(fs::exists(store.report_dir() / "report.md"));
    CHECK(fs::exists(store.report_dir() / "summary.json"));
    REQUIRE(result.gaps.size() >= 3);
    bool scores_gap = false, judgments_gap = false, emergent_gap = false;
    for (const auto& g : result.gaps) {
        if (g.find("no scores") != std::string::npos) scores_gap = true;
        if (g.find("no judgments") != std::string::npos) judgments_gap = true;
        if (g.find("no emergent ideas") != std::string::npos) emergent_gap = true;
        // Gap strings must never leak machine paths into the report.
        CHECK(g.find(tmp.path.string()) == std::string::npos);
    }
    CHECK(scores_gap);
    CHECK(judgments_gap);
    CHECK(emergent_gap);

    const auto md = read_file(store.report_dir() / "report.md");
    CHECK(md.find("Gaps") != std::string::npos);
    CHECK(md.find(tmp.path.string()) == std::string::npos);
}

TEST_CASE("render_report produces the full artifact set from a complete mock run") {
    TempDir tmp("full");
    const std::vector<corpus::AdConcept> ads = {
        make_ad("ad-a",
                "maple harbor lantern drifts past quiet rooftops while children chase "
                "paper boats down narrow rain soaked streets tonight together"),
        make_ad("ad-b",
                "copper kettle whistles softly as grandmother folds warm dough beside "
                "an open window where sparrows argue about crumbs endlessly"),
    };
    orchestrator::RunConfig cfg;
    cfg.models = {"mock"};
    cfg.runs_per_model = 2;
    cfg.corpus_path = "corpus.jsonl";
    auto store = orchestrator::RunStore::create(tmp.path / "run", cfg);
    orchestrator::run_phase1(store, ads);
    orchestrator::extract_markers(store, ads, "mock");
    orchestrator::run_phase2(store, ads, orchestrator::Variant::plain);
    orchestrator::run_phase2(store, ads, orchestrator::Variant::marker);
    orchestrator::judge_marker_survival(store, "mock");
    orchestrator::code_emergent_ideas(store, ads, "mock", 2);
    orchestrator::score_run(store, ads);

    const auto result = report::render_report(store, ads, 10);
    CHECK(result.gaps.empty());

    for (const char* name :
         {"report.md", "aggregates.csv", "marker_survival.csv", "emergent_distribution.csv",
          "bigrams.csv", "summary.json", "plot_phase1_entropy.csv",
          "plot_phase2_plain_cosine.csv", "plot_phase2_marker_meteor.csv"}) {
        CHECK(fs::exists(store.report_dir() / name));
    }

    // Plot data: level rows with one column per model plus the Original row.
    const auto plot = read_file(store.report_dir() / "plot_phase1_entropy.csv");
    std::istringstream lines(plot);
    std::string line;
    std::getline(lines, line);
    CHECK(line == "level,mock");
    std::vector<std::string> levels;
    while (std::getline(lines, line))
        if (!line.empty()) levels.push_back(line.substr(0, line.find(',')));
    REQUIRE(levels.size() == 4);
    CHECK(levels[0] == "original");
    CHECK(levels[1] == "mild");
    CHECK(levels[2] == "moderate");
    CHECK(levels[3] == "extreme");

    const auto md = read_file(store.report_dir() / "report.md");
    CHECK(md.find("| Original |") != std::string::npos);
    CHECK(md.find("Marker survival") != std::string::npos);
    CHECK(md.find("\xC2\xB1") != std::string::npos);  // mean ± sd cells
    CHECK(md.find(tmp.path.string()) == std::string::npos);

    // Byte-determinism for an unchanged store.
    std::map<std::string, std::string> first;
    for (const auto& f : result.files) first[f.filename().string()] = read_file(f);
    const auto again = report::render_report(store, ads, 10);
    REQUIRE(again.files.size() == result.files.size());
    for (const auto& f : again.files) CHECK(read_file(f) == first.at(f.filename().string()));
}
