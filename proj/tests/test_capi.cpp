#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <atomic>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "creastress.h"
#include "doctest.h"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path = fs::temp_directory_path() /
               ("cs_capi_" + tag + "_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter.fetch_add(1)));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

// Takes ownership of a char* out-parameter and frees it on scope exit.
struct CStr {
    char* p = nullptr;
    ~CStr() { cs_string_free(p); }
    std::string str() const { return p ? p : ""; }
    json parsed() const { return json::parse(str()); }
};

std::string write_corpus(const fs::path& dir) {
    const auto path = dir / "corpus.jsonl";
    std::ofstream out(path, std::ios::binary);
    out << R"({"id":"ad-a","text":"maple harbor lantern drifts past quiet rooftops while children chase paper boats down narrow streets tonight","tags":["t1"]})"
        << "\n"
        << R"({"id":"ad-b","text":"copper kettle whistles softly as grandmother folds warm dough beside an open window where sparrows argue endlessly"})"
        << "\n";
    return path.string();
}

std::string config_json() {
    json cfg;
    cfg["models"] = {"mock"};
    cfg["runs_per_model"] = 2;
    cfg["temperature"] = 0.7;
    cfg["max_tokens"] = 256;
    cfg["concurrency_limit"] = 2;
    cfg["seed"] = 11;
    cfg["corpus_path"] = "corpus.jsonl";
    return cfg.dump();
}

}  // namespace

TEST_CASE("status names are stable and the error buffer starts empty") {
    CHECK(std::string(cs_status_name(CS_OK)) == "ok");
    CHECK(std::string(cs_status_name(CS_ERR_INVALID_ARGUMENT)) == "invalid_argument");
    CHECK(std::string(cs_status_name(CS_ERR_PARSE)) == "parse");
    CHECK(std::string(cs_status_name(CS_ERR_IO)) == "io");
    CHECK(std::string(cs_status_name(CS_ERR_TRANSPORT)) == "transport");
    CHECK(std::string(cs_status_name(CS_ERR_CREDENTIAL)) == "credential");
    CHECK(std::string(cs_status_name(CS_ERR_PROTOCOL)) == "protocol");
    CHECK(std::string(cs_status_name(CS_ERR_STATE)) == "state");
    CHECK(std::string(cs_status_name(CS_ERR_INTERNAL)) == "internal");

    REQUIRE(cs_last_error() != nullptr);
    cs_string_free(nullptr);  // must be a harmless no-op
}

TEST_CASE("NULL arguments are rejected, never dereferenced") {
    CHECK(cs_corpus_load(nullptr, nullptr) == CS_ERR_INVALID_ARGUMENT);
    CHECK(std::strlen(cs_last_error()) > 0);
    cs_corpus* corp = nullptr;
    CHECK(cs_corpus_load(nullptr, &corp) == CS_ERR_INVALID_ARGUMENT);
    CHECK(corp == nullptr);
    CHECK(cs_corpus_stats_json(nullptr, nullptr) == CS_ERR_INVALID_ARGUMENT);
    CHECK(cs_corpus_size(nullptr) == 0);

    cs_store* store = nullptr;
    CHECK(cs_store_create(nullptr, "{}", &store) == CS_ERR_INVALID_ARGUMENT);
    CHECK(cs_store_open(nullptr, &store) == CS_ERR_INVALID_ARGUMENT);
    CHECK(cs_store_config_json(nullptr, nullptr) == CS_ERR_INVALID_ARGUMENT);
    CHECK(cs_run_phase1(nullptr, nullptr, nullptr) == CS_ERR_INVALID_ARGUMENT);
    CHECK(cs_run_phase2(nullptr, nullptr, "plain", nullptr) == CS_ERR_INVALID_ARGUMENT);
    CHECK(cs_extract_markers(nullptr, nullptr, "mock", nullptr, 0, nullptr) ==
          CS_ERR_INVALID_ARGUMENT);
    CHECK(cs_judge_markers(nullptr, nullptr, "mock", nullptr) == CS_ERR_INVALID_ARGUMENT);
    CHECK(cs_code_emergent(nullptr, nullptr, "mock", 1, nullptr) == CS_ERR_INVALID_ARGUMENT);
    CHECK(cs_score(nullptr, nullptr, nullptr) == CS_ERR_INVALID_ARGUMENT);
    CHECK(cs_aggregate_json(nullptr, nullptr) == CS_ERR_INVALID_ARGUMENT);
    CHECK(cs_render_report(nullptr, nullptr, 10, nullptr) == CS_ERR_INVALID_ARGUMENT);
    CHECK(cs_verify_export(nullptr, "x.csv", nullptr, nullptr) == CS_ERR_INVALID_ARGUMENT);
    CHECK(cs_verify_import(nullptr, "x.csv", nullptr, nullptr) == CS_ERR_INVALID_ARGUMENT);

    double v = 0.0;
    CHECK(cs_metric_tfidf_cosine(nullptr, "x", &v) == CS_ERR_INVALID_ARGUMENT);
    CHECK(cs_metric_tfidf_cosine("x", "y", nullptr) == CS_ERR_INVALID_ARGUMENT);
    CHECK(cs_metric_meteor(nullptr, "x", &v) == CS_ERR_INVALID_ARGUMENT);
    CHECK(cs_metric_entropy("x", nullptr) == CS_ERR_INVALID_ARGUMENT);
    CHECK(cs_metric_fourgram_uniqueness("x", nullptr, &v, nullptr) ==
          CS_ERR_INVALID_ARGUMENT);

    cs_corpus_free(nullptr);
    cs_store_free(nullptr);
}

TEST_CASE("raw metric entry points match the frozen hand-worked values") {
    double v = 0.0;
    REQUIRE(cs_metric_tfidf_cosine("red red car", "red car", &v) == CS_OK);
    CHECK(std::abs(v - 0.94868) < 1e-5);

    REQUIRE(cs_metric_meteor("the cat sat", "the cat", &v) == CS_OK);
    CHECK(std::abs(v - 0.64655) < 1e-4);

    REQUIRE(cs_metric_entropy("the cat and the dog", &v) == CS_OK);
    CHECK(std::abs(v - 1.92193) < 1e-5);

    int degenerate = -1;
    REQUIRE(cs_metric_fourgram_uniqueness("a b c d e", "a b c d f", &v, &degenerate) ==
            CS_OK);
    CHECK(v == 2.0 / 3.0);
    CHECK(degenerate == 0);

    REQUIRE(cs_metric_fourgram_uniqueness("a b", "c d", &v, &degenerate) == CS_OK);
    CHECK(v == 0.0);
    CHECK(degenerate == 1);

    // The degenerate flag is optional.
    REQUIRE(cs_metric_fourgram_uniqueness("a b c d e", "a b c d e", &v, nullptr) == CS_OK);
    CHECK(v == 0.0);

    // Empty texts are invalid for the pairwise metrics; entropy defines
    // the empty text as zero bits.
    CHECK(cs_metric_tfidf_cosine("", "x", &v) == CS_ERR_INVALID_ARGUMENT);
    CHECK(std::strlen(cs_last_error()) > 0);
    CHECK(cs_metric_meteor("x", "   ", &v) == CS_ERR_INVALID_ARGUMENT);
    REQUIRE(cs_metric_entropy("", &v) == CS_OK);
    CHECK(v == 0.0);
}

TEST_CASE("corpus handles load, size, and stats") {
    TempDir tmp("corpus");
    const auto path = write_corpus(tmp.path);

    cs_corpus* corp = nullptr;
    REQUIRE(cs_corpus_load(path.c_str(), &corp) == CS_OK);
    REQUIRE(corp != nullptr);
    CHECK(cs_corpus_size(corp) == 2);

    CStr stats;
    REQUIRE(cs_corpus_stats_json(corp, &stats.p) == CS_OK);
    const auto j = stats.parsed();
    CHECK(j.at("n_ads") == 2);
    CHECK(j.at("mean_word_count").get<double>() > 10.0);
    CHECK(j.at("mean_entropy").get<double>() > 3.0);
    cs_corpus_free(corp);

    cs_corpus* missing = nullptr;
    CHECK(cs_corpus_load((tmp.path / "absent.jsonl").string().c_str(), &missing) ==
          CS_ERR_IO);
    CHECK(missing == nullptr);
    CHECK(std::strlen(cs_last_error()) > 0);

    std::ofstream bad(tmp.path / "bad.jsonl", std::ios::binary);
    bad << "{\"id\":\"x\"}\n";  // missing text field
    bad.close();
    CHECK(cs_corpus_load((tmp.path / "bad.jsonl").string().c_str(), &missing) ==
          CS_ERR_PARSE);
}

TEST_CASE("store creation validates config and open requires config.json") {
    TempDir tmp("store");
    cs_store* store = nullptr;
    CHECK(cs_store_create((tmp.path / "run").string().c_str(), "{ not json", &store) ==
          CS_ERR_PARSE);
    CHECK(cs_store_create((tmp.path / "run").string().c_str(), R"({"models":[]})",
                          &store) == CS_ERR_INVALID_ARGUMENT);
    CHECK(cs_store_open((tmp.path / "nowhere").string().c_str(), &store) == CS_ERR_STATE);

    REQUIRE(cs_store_create((tmp.path / "run").string().c_str(), config_json().c_str(),
                            &store) == CS_OK);
    REQUIRE(store != nullptr);
    CStr cfg;
    REQUIRE(cs_store_config_json(store, &cfg.p) == CS_OK);
    CHECK(cfg.parsed().at("models") == json::array({"mock"}));
    CHECK(cfg.parsed().at("runs_per_model") == 2);
    cs_store_free(store);

    cs_store* reopened = nullptr;
    REQUIRE(cs_store_open((tmp.path / "run").string().c_str(), &reopened) == CS_OK);
    CStr cfg2;
    REQUIRE(cs_store_config_json(reopened, &cfg2.p) == CS_OK);
    CHECK(cfg2.parsed().at("seed") == 11);
    cs_store_free(reopened);
}

TEST_CASE("the full mock pipeline runs through the C API") {
    TempDir tmp("pipeline");
    const auto corpus_path = write_corpus(tmp.path);

    cs_corpus* corp = nullptr;
    REQUIRE(cs_corpus_load(corpus_path.c_str(), &corp) == CS_OK);
    cs_store* store = nullptr;
    REQUIRE(cs_store_create((tmp.path / "run").string().c_str(), config_json().c_str(),
                            &store) == CS_OK);

    // Ordering: phase2 before phase1 is a state error.
    CHECK(cs_run_phase2(store, corp, "marker", nullptr) == CS_ERR_STATE);
    CHECK(cs_run_phase2(store, corp, "sideways", nullptr) == CS_ERR_PARSE);
    CHECK(cs_score(store, corp, nullptr) == CS_ERR_STATE);

    CStr p1;
    REQUIRE(cs_run_phase1(store, corp, &p1.p) == CS_OK);
    CHECK(p1.parsed().at("generated") == 12);  // 2 ads x 2 runs x 3 levels
    CHECK(p1.parsed().at("failed") == 0);

    CStr ex;
    REQUIRE(cs_extract_markers(store, corp, "mock", nullptr, 0, &ex.p) == CS_OK);
    CHECK(ex.parsed().at("ads_processed") == 2);
    CHECK(ex.parsed().at("markers_written") == 8);

    CStr p2a;
    REQUIRE(cs_run_phase2(store, corp, "plain", &p2a.p) == CS_OK);
    CHECK(p2a.parsed().at("generated") == 12);
    CStr p2b;
    REQUIRE(cs_run_phase2(store, corp, "marker", &p2b.p) == CS_OK);
    CHECK(p2b.parsed().at("generated") == 12);

    CStr jm;
    REQUIRE(cs_judge_markers(store, corp, "mock", &jm.p) == CS_OK);
    CHECK(jm.parsed().at("judgments") == 48);  // 8 markers x 3 levels x 2 runs
    CHECK(jm.parsed().at("errors") == 0);

    CStr em;
    REQUIRE(cs_code_emergent(store, corp, "mock", 2, &em.p) == CS_OK);
    CHECK(em.parsed().at("ads_sampled") == 2);

    CStr sc;
    REQUIRE(cs_score(store, corp, &sc.p) == CS_OK);
    CHECK(sc.parsed().at("records") == 36);
    CHECK(sc.parsed().at("error_cells") == 0);

    CStr agg;
    REQUIRE(cs_aggregate_json(store, &agg.p) == CS_OK);
    const auto rows = agg.parsed();
    REQUIRE(rows.is_array());
    CHECK(rows.size() == 9);  // 3 phases x 1 model x 3 levels
    bool saw_phase1_mild = false;
    for (const auto& row : rows) {
        if (row.at("phase") == "forget" && row.at("level") == "mild") {
            saw_phase1_mild = true;
            CHECK(row.at("model") == "mock");
            CHECK(row.at("cosine").at("run_means").size() == 2);
            CHECK(row.at("cosine").at("mean").get<double>() > 0.0);
            CHECK(row.at("cosine").at("valid_cells") == 4);
        }
    }
    CHECK(saw_phase1_mild);

    CStr report;
    REQUIRE(cs_render_report(store, corp, 10, &report.p) == CS_OK);
    const auto rep = report.parsed();
    CHECK(rep.at("gaps").empty());
    bool saw_md = false;
    for (const auto& f : rep.at("files")) {
        if (f.get<std::string>().find("report.md") != std::string::npos) saw_md = true;
    }
    CHECK(saw_md);

    const auto csv = (tmp.path / "verify.csv").string();
    CStr vx;
    REQUIRE(cs_verify_export(store, csv.c_str(), nullptr, &vx.p) == CS_OK);
    CHECK(fs::exists(csv));
    CStr vi;
    REQUIRE(cs_verify_import(store, csv.c_str(), "mock", &vi.p) == CS_OK);
    CHECK(vi.parsed().at("rows") == 48);
    CHECK(vi.parsed().at("updated") == 0);

    // Resume through the C API: everything is already persisted.
    CStr p1_again;
    REQUIRE(cs_run_phase1(store, corp, &p1_again.p) == CS_OK);
    CHECK(p1_again.parsed().at("generated") == 0);
    CHECK(p1_again.parsed().at("skipped") == 12);

    cs_store_free(store);
    cs_corpus_free(corp);
}

TEST_CASE("a render without a corpus reports the baseline gap") {
    TempDir tmp("nocorpus");
    cs_store* store = nullptr;
    REQUIRE(cs_store_create((tmp.path / "run").string().c_str(), config_json().c_str(),
                            &store) == CS_OK);
    CStr report;
    REQUIRE(cs_render_report(store, nullptr, 10, &report.p) == CS_OK);
    const auto rep = report.parsed();
    bool saw_corpus_gap = false;
    for (const auto& g : rep.at("gaps"))
        if (g.get<std::string>().find("corpus unavailable") != std::string::npos)
            saw_corpus_gap = true;
    CHECK(saw_corpus_gap);
    cs_store_free(store);
}

TEST_CASE("extract_markers accepts an explicit id subset through the C API") {
    TempDir tmp("subset");
    const auto corpus_path = write_corpus(tmp.path);
    cs_corpus* corp = nullptr;
    REQUIRE(cs_corpus_load(corpus_path.c_str(), &corp) == CS_OK);
    cs_store* store = nullptr;
    REQUIRE(cs_store_create((tmp.path / "run").string().c_str(), config_json().c_str(),
                            &store) == CS_OK);

    const char* ids[] = {"ad-b"};
    CStr ex;
    REQUIRE(cs_extract_markers(store, corp, "mock", ids, 1, &ex.p) == CS_OK);
    CHECK(ex.parsed().at("ads_processed") == 1);

    const char* bad_ids[] = {"nope"};
    CHECK(cs_extract_markers(store, corp, "mock", bad_ids, 1, nullptr) ==
          CS_ERR_INVALID_ARGUMENT);

    cs_store_free(store);
    cs_corpus_free(corp);
}
