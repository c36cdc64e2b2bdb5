// Command-line front end. Links the public C API only; argument parsing and
// output formatting happen here, all pipeline logic lives behind creastress.h.
#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "creastress.h"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// --- small RAII shims over the C API -------------------------------------

struct CString {
    char* s = nullptr;
    ~CString() { cs_string_free(s); }
    std::string str() const { return s ? s : ""; }
};

[[noreturn]] void die(cs_status status, const std::string& context) {
    std::cerr << "creastress: " << context << ": " << cs_last_error() << " ["
              << cs_status_name(status) << "]\n";
    std::exit(status == CS_ERR_CREDENTIAL ? 3 : 1);
}

void check(cs_status status, const std::string& context) {
    if (status != CS_OK) die(status, context);
}

[[noreturn]] void fail(const std::string& message) {
    std::cerr << "creastress: " << message << "\n";
    std::exit(1);
}

struct Corpus {
    cs_corpus* h = nullptr;
    ~Corpus() { cs_corpus_free(h); }
};

struct Store {
    cs_store* h = nullptr;
    ~Store() { cs_store_free(h); }
};

// Exclusive ownership of a run directory for the lifetime of the command.
class Lock {
public:
    explicit Lock(const fs::path& dir) : path_(dir / ".lock") {
        fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd_ < 0) {
            if (errno == EEXIST)
                fail("run directory is locked (" + path_.string() +
                     " exists); remove it if no other process is running");
            fail("cannot lock " + path_.string() + ": " + std::strerror(errno));
        }
        const std::string pid = std::to_string(::getpid()) + "\n";
        [[maybe_unused]] const auto n = ::write(fd_, pid.c_str(), pid.size());
    }
    ~Lock() {
        if (fd_ >= 0) {
            ::close(fd_);
            ::unlink(path_.c_str());
        }
    }
    Lock(const Lock&) = delete;
    Lock& operator=(const Lock&) = delete;

private:
    fs::path path_;
    int fd_ = -1;
};

// --- flag state -----------------------------------------------------------

struct Options {
    std::string corpus;
    std::string out;
    std::vector<std::string> models;
    int runs = 3;
    double temperature = 0.7;
    int max_tokens = 1024;
    std::string variant;
    int sample = 0;  // 0 = whole corpus
    long long seed = 0;
    int concurrency = 4;
    int top_k = 50;
    std::string config_file;
    std::string model;
    std::string judge;
    std::vector<std::string> ads;
    std::string csv;
    bool mock = false;

    const CLI::App* cmd = nullptr;  // the parsed subcommand

    bool given(const std::string& name) const {
        if (!cmd) return false;
        const auto* option = cmd->get_option_no_throw(name);
        return option && option->count() > 0;
    }
};

// --- configuration resolution --------------------------------------------
// Precedence: built-in defaults < run-dir config.json < --config file < flags.

json read_json_file(const fs::path& path, const char* what) {
    std::ifstream in(path);
    if (!in) fail(std::string(what) + ": cannot read " + path.string());
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        fail(std::string(what) + ": " + path.string() + ": " + e.what());
    }
}

void overlay(json& dst, const json& src) {
    if (!src.is_object()) fail("config overlay: expected a JSON object");
    for (const auto& [key, value] : src.items()) dst[key] = value;
}

json effective_config(const Options& opt) {
    json cfg = {{"models", json::array()},
                {"runs_per_model", 3},
                {"temperature", 0.7},
                {"max_tokens", 1024},
                {"concurrency_limit", 4},
                {"seed", 0},
                {"corpus_path", ""},
                {"models_config", json::object()}};
    if (!opt.out.empty() && fs::exists(fs::path(opt.out) / "config.json"))
        overlay(cfg, read_json_file(fs::path(opt.out) / "config.json", "run config"));
    if (!opt.config_file.empty())
        overlay(cfg, read_json_file(opt.config_file, "config file"));
    if (opt.given("--models")) cfg["models"] = opt.models;
    if (opt.given("--runs")) cfg["runs_per_model"] = opt.runs;
    if (opt.given("--temperature")) cfg["temperature"] = opt.temperature;
    if (opt.given("--max-tokens")) cfg["max_tokens"] = opt.max_tokens;
    if (opt.given("--concurrency")) cfg["concurrency_limit"] = opt.concurrency;
    if (opt.given("--seed")) cfg["seed"] = opt.seed;
    if (opt.given("--corpus")) cfg["corpus_path"] = opt.corpus;
    if (opt.mock) cfg["models"] = json::array({"mock"});
    return cfg;
}

std::string resolved_corpus_path(const Options& opt, const json& cfg) {
    if (opt.given("--corpus")) return opt.corpus;
    const auto it = cfg.find("corpus_path");
    if (it != cfg.end() && it->is_string() && !it->get<std::string>().empty())
        return it->get<std::string>();
    fail("no corpus: pass --corpus or configure corpus_path");
}

std::string resolved_judge(const Options& opt, const json& cfg) {
    if (!opt.judge.empty()) return opt.judge;
    const auto it = cfg.find("models");
    if (it != cfg.end() && it->is_array() && !it->empty() && (*it)[0].is_string())
        return (*it)[0].get<std::string>();
    fail("no judge model: pass --judge or configure models");
}

void load_corpus(Corpus& corpus, const std::string& path) {
    check(cs_corpus_load(path.c_str(), &corpus.h), "load corpus " + path);
}

void create_store(Store& store, const std::string& out, const json& cfg) {
    check(cs_store_create(out.c_str(), cfg.dump().c_str(), &store.h),
          "create run directory " + out);
    std::cout << "config: " << cfg.dump() << "\n";
}

void open_store(Store& store, const Options& opt) {
    check(cs_store_open(opt.out.c_str(), &store.h), "open run directory " + opt.out);
}

void print_stats(const std::string& step, const CString& stats) {
    std::cout << step << ":";
    const json j = json::parse(stats.str());
    for (const auto& [key, value] : j.items()) std::cout << " " << key << "=" << value;
    std::cout << "\n";
}

// --- commands -------------------------------------------------------------

int cmd_ingest(const Options& opt) {
    Corpus corpus;
    load_corpus(corpus, opt.corpus);
    CString stats;
    check(cs_corpus_stats_json(corpus.h, &stats.s), "corpus stats");
    print_stats("corpus", stats);
    return 0;
}

// Shared prologue for the generation commands: resolve config, take the run
// directory, persist the effective config, load the corpus.
struct Session {
    json cfg;
    Lock lock;
    Store store;
    Corpus corpus;

    explicit Session(const Options& opt)
        : cfg(effective_config(opt)),
          lock((fs::create_directories(opt.out), fs::path(opt.out))) {
        create_store(store, opt.out, cfg);
        load_corpus(corpus, resolved_corpus_path(opt, cfg));
    }
};

int cmd_phase1(const Options& opt) {
    Session s(opt);
    CString stats;
    check(cs_run_phase1(s.store.h, s.corpus.h, &stats.s), "phase1");
    print_stats("phase1", stats);
    return 0;
}

int cmd_phase2(const Options& opt) {
    Session s(opt);
    CString stats;
    check(cs_run_phase2(s.store.h, s.corpus.h, opt.variant.c_str(), &stats.s),
          "phase2 --variant " + opt.variant);
    print_stats("phase2_" + opt.variant, stats);
    return 0;
}

int cmd_extract_markers(const Options& opt) {
    Session s(opt);
    std::vector<const char*> ids;
    for (const auto& id : opt.ads) ids.push_back(id.c_str());
    CString stats;
    check(cs_extract_markers(s.store.h, s.corpus.h, resolved_judge(opt, s.cfg).c_str(),
                             ids.data(), ids.size(), &stats.s),
          "extract-markers");
    print_stats("extract-markers", stats);
    return 0;
}

int cmd_judge_markers(const Options& opt) {
    Session s(opt);
    CString stats;
    check(cs_judge_markers(s.store.h, s.corpus.h, resolved_judge(opt, s.cfg).c_str(),
                           &stats.s),
          "judge-markers");
    print_stats("judge-markers", stats);
    return 0;
}

int cmd_code_emergent(const Options& opt) {
    Session s(opt);
    const size_t sample =
        opt.sample > 0 ? static_cast<size_t>(opt.sample) : cs_corpus_size(s.corpus.h);
    CString stats;
    check(cs_code_emergent(s.store.h, s.corpus.h, resolved_judge(opt, s.cfg).c_str(),
                           sample, &stats.s),
          "code-emergent");
    print_stats("code-emergent", stats);
    return 0;
}

int cmd_score(const Options& opt) {
    Store store;
    open_store(store, opt);
    Lock lock(opt.out);
    CString cfg_json;
    check(cs_store_config_json(store.h, &cfg_json.s), "read config");
    const json cfg = json::parse(cfg_json.str());
    Corpus corpus;
    load_corpus(corpus, resolved_corpus_path(opt, cfg));
    CString stats;
    check(cs_score(store.h, corpus.h, &stats.s), "score");
    print_stats("score", stats);
    return 0;
}

int cmd_aggregate(const Options& opt) {
    Store store;
    open_store(store, opt);
    CString rows_json;
    check(cs_aggregate_json(store.h, &rows_json.s), "aggregate");
    const json rows = json::parse(rows_json.str());
    if (rows.empty()) {
        std::cout << "no scored records (run `score` first)\n";
        return 0;
    }
    const auto cell = [](const json& metric) {
        if (metric["mean"].is_null()) return std::string("-");
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.3f +/- %.3f", metric["mean"].get<double>(),
                      metric["sd"].get<double>());
        return std::string(buf);
    };
    std::cout << "phase          model            level     cosine           "
                 "meteor           entropy          uniqueness\n";
    for (const auto& r : rows) {
        char line[256];
        std::snprintf(line, sizeof line, "%-14s %-16s %-9s %-16s %-16s %-16s %-16s",
                      r["phase"].get<std::string>().c_str(),
                      r["model"].get<std::string>().c_str(),
                      r["level"].get<std::string>().c_str(), cell(r["cosine"]).c_str(),
                      cell(r["meteor"]).c_str(), cell(r["entropy"]).c_str(),
                      cell(r["uniqueness"]).c_str());
        std::cout << line << "\n";
    }
    return 0;
}

int cmd_report(const Options& opt) {
    Store store;
    open_store(store, opt);
    Lock lock(opt.out);
    CString cfg_json;
    check(cs_store_config_json(store.h, &cfg_json.s), "read config");
    const json cfg = json::parse(cfg_json.str());

    Corpus corpus;  // optional: report degrades to gaps without it
    std::string corpus_path;
    if (opt.given("--corpus")) corpus_path = opt.corpus;
    else if (cfg.contains("corpus_path") && cfg["corpus_path"].is_string())
        corpus_path = cfg["corpus_path"].get<std::string>();
    if (!corpus_path.empty()) load_corpus(corpus, corpus_path);

    CString result;
    check(cs_render_report(store.h, corpus.h, static_cast<size_t>(opt.top_k), &result.s),
          "report");
    const json j = json::parse(result.str());
    for (const auto& f : j["files"]) std::cout << "wrote " << f.get<std::string>() << "\n";
    for (const auto& g : j["gaps"]) std::cout << "gap: " << g.get<std::string>() << "\n";
    return 0;
}

int cmd_verify_export(const Options& opt) {
    Store store;
    open_store(store, opt);
    CString stats;
    check(cs_verify_export(store.h, opt.csv.c_str(),
                           opt.model.empty() ? nullptr : opt.model.c_str(), &stats.s),
          "verify-export");
    std::cout << "wrote " << opt.csv << "\n";
    return 0;
}

int cmd_verify_import(const Options& opt) {
    Store store;
    open_store(store, opt);
    Lock lock(opt.out);
    CString stats;
    check(cs_verify_import(store.h, opt.csv.c_str(),
                           opt.model.empty() ? nullptr : opt.model.c_str(), &stats.s),
          "verify-import");
    print_stats("verify-import", stats);
    return 0;
}

int cmd_demo(Options opt) {
    if (opt.out.empty()) opt.out = "demo_run";
    json cfg = effective_config(opt);
    if (cfg["models"].empty()) cfg["models"] = json::array({"mock"});
    if (cfg["corpus_path"].get<std::string>().empty())
        cfg["corpus_path"] = "data/fixture_corpus.jsonl";

    fs::create_directories(opt.out);
    Lock lock(opt.out);
    Store store;
    create_store(store, opt.out, cfg);
    Corpus corpus;
    load_corpus(corpus, opt.given("--corpus") ? opt.corpus
                                              : cfg["corpus_path"].get<std::string>());
    const std::string judge = resolved_judge(opt, cfg);
    const size_t sample =
        opt.sample > 0 ? static_cast<size_t>(opt.sample) : cs_corpus_size(corpus.h);

    CString s1, s2, s3, s4, s5, s6, s7, s8;
    check(cs_run_phase1(store.h, corpus.h, &s1.s), "phase1");
    print_stats("phase1", s1);
    check(cs_extract_markers(store.h, corpus.h, judge.c_str(), nullptr, 0, &s2.s),
          "extract-markers");
    print_stats("extract-markers", s2);
    check(cs_run_phase2(store.h, corpus.h, "plain", &s3.s), "phase2 --variant plain");
    print_stats("phase2_plain", s3);
    check(cs_run_phase2(store.h, corpus.h, "marker", &s4.s), "phase2 --variant marker");
    print_stats("phase2_marker", s4);
    check(cs_judge_markers(store.h, corpus.h, judge.c_str(), &s5.s), "judge-markers");
    print_stats("judge-markers", s5);
    check(cs_code_emergent(store.h, corpus.h, judge.c_str(), sample, &s6.s),
          "code-emergent");
    print_stats("code-emergent", s6);
    check(cs_score(store.h, corpus.h, &s7.s), "score");
    print_stats("score", s7);
    check(cs_render_report(store.h, corpus.h, static_cast<size_t>(opt.top_k), &s8.s),
          "report");
    const json rep = json::parse(s8.str());
    for (const auto& g : rep["gaps"]) std::cout << "gap: " << g.get<std::string>() << "\n";
    std::cout << "demo complete: " << opt.out << "\n";
    return 0;
}

void add_config_flags(CLI::App* cmd, Options& opt) {
    cmd->add_option("--models", opt.models, "Model ids, comma separated")->delimiter(',');
    cmd->add_option("--runs", opt.runs, "Runs per model (default 3)");
    cmd->add_option("--temperature", opt.temperature, "Sampling temperature (default 0.7)");
    cmd->add_option("--max-tokens", opt.max_tokens, "Completion token cap (default 1024)");
    cmd->add_option("--concurrency", opt.concurrency, "Parallel requests (default 4)");
    cmd->add_option("--seed", opt.seed, "Deterministic run seed (default 0)");
    cmd->add_option("--config", opt.config_file, "JSON config file (RunConfig keys)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-phase creativity stress test over an ad-concept corpus"};
    app.require_subcommand(1);
    Options opt;

    auto* ingest = app.add_subcommand("ingest", "Validate a corpus and print its stats");
    ingest->add_option("--corpus", opt.corpus, "Ad corpus (.jsonl or .csv)")->required();

    auto* phase1 = app.add_subcommand("phase1", "Contract every ad at three levels");
    phase1->add_option("--corpus", opt.corpus, "Ad corpus (.jsonl or .csv)");
    phase1->add_option("--out", opt.out, "Run directory")->required();
    add_config_flags(phase1, opt);

    auto* phase2 =
        app.add_subcommand("phase2", "Chained expansion from the extreme contraction");
    phase2->add_option("--corpus", opt.corpus, "Ad corpus (.jsonl or .csv)");
    phase2->add_option("--out", opt.out, "Run directory")->required();
    phase2->add_option("--variant", opt.variant, "plain or marker")
        ->required()
        ->check(CLI::IsMember({"plain", "marker"}));
    add_config_flags(phase2, opt);

    auto* extract = app.add_subcommand("extract-markers", "Extract creative markers per ad");
    extract->add_option("--corpus", opt.corpus, "Ad corpus (.jsonl or .csv)");
    extract->add_option("--out", opt.out, "Run directory")->required();
    extract->add_option("--judge", opt.judge, "Judge model (default: first configured model)");
    extract->add_option("--ads", opt.ads, "Only these ad ids, comma separated")
        ->delimiter(',');
    add_config_flags(extract, opt);

    auto* judge =
        app.add_subcommand("judge-markers", "Judge marker survival per Phase-1 output");
    judge->add_option("--corpus", opt.corpus, "Ad corpus (.jsonl or .csv)");
    judge->add_option("--out", opt.out, "Run directory")->required();
    judge->add_option("--judge", opt.judge, "Judge model (default: first configured model)");
    add_config_flags(judge, opt);

    auto* emergent =
        app.add_subcommand("code-emergent", "Code emergent ideas on sampled expansions");
    emergent->add_option("--corpus", opt.corpus, "Ad corpus (.jsonl or .csv)");
    emergent->add_option("--out", opt.out, "Run directory")->required();
    emergent->add_option("--judge", opt.judge, "Judge model (default: first configured model)");
    emergent->add_option("--sample", opt.sample, "Sample size (default: whole corpus)");
    add_config_flags(emergent, opt);

    auto* score = app.add_subcommand("score", "Compute metric records for every generation");
    score->add_option("--corpus", opt.corpus, "Ad corpus (.jsonl or .csv)");
    score->add_option("--out", opt.out, "Run directory")->required();

    auto* aggregate = app.add_subcommand("aggregate", "Print aggregated metric means");
    aggregate->add_option("--out", opt.out, "Run directory")->required();

    auto* report = app.add_subcommand("report", "Render report/ (Markdown, CSV, plot data)");
    report->add_option("--corpus", opt.corpus, "Ad corpus (.jsonl or .csv)");
    report->add_option("--out", opt.out, "Run directory")->required();
    report->add_option("--top-k", opt.top_k, "Bigram table size (default 50)");

    auto* vexport = app.add_subcommand("verify-export", "Write the human-verification CSV");
    vexport->add_option("--out", opt.out, "Run directory")->required();
    vexport->add_option("--csv", opt.csv, "Destination CSV path")->required();
    vexport->add_option("--model", opt.model, "Model scope (default: the only model)");

    auto* vimport = app.add_subcommand("verify-import", "Apply verdict edits from a CSV");
    vimport->add_option("--out", opt.out, "Run directory")->required();
    vimport->add_option("--csv", opt.csv, "Edited CSV path")->required();
    vimport->add_option("--model", opt.model, "Model scope (default: the only model)");

    auto* demo = app.add_subcommand("demo", "Full offline pipeline on the fixture corpus");
    demo->add_option("--corpus", opt.corpus,
                     "Ad corpus (default data/fixture_corpus.jsonl)");
    demo->add_option("--out", opt.out, "Run directory (default demo_run)");
    demo->add_flag("--mock", opt.mock, "Use the offline mock model");
    demo->add_option("--sample", opt.sample,
                     "Emergent-coding sample size (default: whole corpus)");
    demo->add_option("--top-k", opt.top_k, "Bigram table size (default 50)");
    add_config_flags(demo, opt);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "creastress: " << e.what() << " (run with --help for usage)\n";
        return 2;
    }

    const auto parsed = app.get_subcommands();
    opt.cmd = parsed.empty() ? nullptr : parsed.front();

    try {
        if (ingest->parsed()) return cmd_ingest(opt);
        if (phase1->parsed()) return cmd_phase1(opt);
        if (phase2->parsed()) return cmd_phase2(opt);
        if (extract->parsed()) return cmd_extract_markers(opt);
        if (judge->parsed()) return cmd_judge_markers(opt);
        if (emergent->parsed()) return cmd_code_emergent(opt);
        if (score->parsed()) return cmd_score(opt);
        if (aggregate->parsed()) return cmd_aggregate(opt);
        if (report->parsed()) return cmd_report(opt);
        if (vexport->parsed()) return cmd_verify_export(opt);
        if (vimport->parsed()) return cmd_verify_import(opt);
        if (demo->parsed()) return cmd_demo(opt);
    } catch (const std::exception& e) {
        fail(e.what());
    }
    return 2;
}
