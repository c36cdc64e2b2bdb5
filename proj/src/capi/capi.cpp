#include "creastress.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "core/corpus.hpp"
#include "core/error.hpp"
#include "core/metrics.hpp"
#include "core/orchestrator.hpp"
#include "core/report.hpp"
#include "core/serialize.hpp"

namespace {

using creastress::Errc;
using creastress::Error;
using json = creastress::serialize::json;

thread_local std::string g_last_error;

cs_status status_of(Errc code) {
    switch (code) {
        case Errc::invalid_argument: return CS_ERR_INVALID_ARGUMENT;
        case Errc::parse: return CS_ERR_PARSE;
        case Errc::io: return CS_ERR_IO;
        case Errc::transport: return CS_ERR_TRANSPORT;
        case Errc::credential: return CS_ERR_CREDENTIAL;
        case Errc::protocol: return CS_ERR_PROTOCOL;
        case Errc::state: return CS_ERR_STATE;
    }
    return CS_ERR_INTERNAL;
}

// Runs fn, translating every C++ failure into a status + last-error message.
template <typename Fn>
cs_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return CS_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return status_of(e.code());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return CS_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown failure";
        return CS_ERR_INTERNAL;
    }
}

cs_status fail_arg(const char* message) {
    g_last_error = message;
    return CS_ERR_INVALID_ARGUMENT;
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void emit(char** out, const std::string& s) {
    if (out) *out = dup_string(s);
}

}  // namespace

struct cs_corpus {
    std::vector<creastress::corpus::AdConcept> ads;
};

struct cs_store {
    creastress::orchestrator::RunStore store;
};

extern "C" {

const char* cs_last_error(void) { return g_last_error.c_str(); }

const char* cs_status_name(cs_status status) {
    switch (status) {
        case CS_OK: return "ok";
        case CS_ERR_INVALID_ARGUMENT: return "invalid_argument";
        case CS_ERR_PARSE: return "parse";
        case CS_ERR_IO: return "io";
        case CS_ERR_TRANSPORT: return "transport";
        case CS_ERR_CREDENTIAL: return "credential";
        case CS_ERR_PROTOCOL: return "protocol";
        case CS_ERR_STATE: return "state";
        case CS_ERR_INTERNAL: return "internal";
    }
    return "unknown";
}

void cs_string_free(char* s) { std::free(s); }

/* ---- corpus ---------------------------------------------------------- */

cs_status cs_corpus_load(const char* path, cs_corpus** out) {
    if (!path || !out) return fail_arg("cs_corpus_load: NULL argument");
    *out = nullptr;
    return guarded([&] {
        auto corpus = std::make_unique<cs_corpus>();
        corpus->ads = creastress::corpus::load_corpus(
            path, creastress::corpus::detect_format(path));
        *out = corpus.release();
    });
}

void cs_corpus_free(cs_corpus* corpus) { delete corpus; }

size_t cs_corpus_size(const cs_corpus* corpus) { return corpus ? corpus->ads.size() : 0; }

cs_status cs_corpus_stats_json(const cs_corpus* corpus, char** json_out) {
    if (!corpus || !json_out) return fail_arg("cs_corpus_stats_json: NULL argument");
    *json_out = nullptr;
    return guarded([&] {
        const auto stats = creastress::corpus::corpus_stats(corpus->ads);
        json j;
        j["n_ads"] = stats.n_ads;
        j["mean_word_count"] = stats.mean_word_count;
        j["mean_entropy"] = stats.mean_entropy;
        emit(json_out, j.dump());
    });
}

/* ---- run store ------------------------------------------------------- */

cs_status cs_store_create(const char* dir, const char* config_json, cs_store** out) {
    if (!dir || !config_json || !out) return fail_arg("cs_store_create: NULL argument");
    *out = nullptr;
    return guarded([&] {
        json j;
        try {
            j = json::parse(config_json);
        } catch (const json::exception& e) {
            throw Error(Errc::parse, std::string("config: ") + e.what());
        }
        auto config = creastress::orchestrator::RunConfig::from_json(j);
        *out = new cs_store{creastress::orchestrator::RunStore::create(dir, config)};
    });
}

cs_status cs_store_open(const char* dir, cs_store** out) {
    if (!dir || !out) return fail_arg("cs_store_open: NULL argument");
    *out = nullptr;
    return guarded([&] {
        *out = new cs_store{creastress::orchestrator::RunStore::open(dir)};
    });
}

void cs_store_free(cs_store* store) { delete store; }

cs_status cs_store_config_json(const cs_store* store, char** json_out) {
    if (!store || !json_out) return fail_arg("cs_store_config_json: NULL argument");
    *json_out = nullptr;
    return guarded([&] { emit(json_out, store->store.config().to_json().dump()); });
}

/* ---- pipeline steps --------------------------------------------------- */

cs_status cs_run_phase1(cs_store* store, const cs_corpus* corpus, char** stats_json_out) {
    if (!store || !corpus) return fail_arg("cs_run_phase1: NULL argument");
    if (stats_json_out) *stats_json_out = nullptr;
    return guarded([&] {
        const auto stats = creastress::orchestrator::run_phase1(store->store, corpus->ads);
        json j;
        j["generated"] = stats.generated;
        j["skipped"] = stats.skipped;
        j["failed"] = stats.failed;
        emit(stats_json_out, j.dump());
    });
}

cs_status cs_run_phase2(cs_store* store, const cs_corpus* corpus, const char* variant,
                        char** stats_json_out) {
    if (!store || !corpus || !variant) return fail_arg("cs_run_phase2: NULL argument");
    if (stats_json_out) *stats_json_out = nullptr;
    return guarded([&] {
        const auto stats = creastress::orchestrator::run_phase2(
            store->store, corpus->ads,
            creastress::orchestrator::variant_from_string(variant));
        json j;
        j["generated"] = stats.generated;
        j["skipped"] = stats.skipped;
        j["failed"] = stats.failed;
        emit(stats_json_out, j.dump());
    });
}

cs_status cs_extract_markers(cs_store* store, const cs_corpus* corpus,
                             const char* judge_model, const char* const* ad_ids,
                             size_t n_ad_ids, char** stats_json_out) {
    if (!store || !corpus || !judge_model)
        return fail_arg("cs_extract_markers: NULL argument");
    if (n_ad_ids > 0 && !ad_ids) return fail_arg("cs_extract_markers: NULL ad_ids");
    if (stats_json_out) *stats_json_out = nullptr;
    return guarded([&] {
        std::vector<std::string> ids;
        ids.reserve(n_ad_ids);
        for (size_t i = 0; i < n_ad_ids; ++i) {
            if (!ad_ids[i]) throw Error(Errc::invalid_argument, "NULL ad id");
            ids.emplace_back(ad_ids[i]);
        }
        const auto stats = creastress::orchestrator::extract_markers(
            store->store, corpus->ads, judge_model, ids);
        json j;
        j["ads_processed"] = stats.ads_processed;
        j["markers_written"] = stats.markers_written;
        j["excluded"] = stats.excluded;
        j["skipped"] = stats.skipped;
        emit(stats_json_out, j.dump());
    });
}

cs_status cs_judge_markers(cs_store* store, const cs_corpus* corpus,
                           const char* judge_model, char** stats_json_out) {
    if (!store || !corpus || !judge_model)
        return fail_arg("cs_judge_markers: NULL argument");
    if (stats_json_out) *stats_json_out = nullptr;
    return guarded([&] {
        const auto stats =
            creastress::orchestrator::judge_marker_survival(store->store, judge_model);
        json j;
        j["judgments"] = stats.judgments;
        j["errors"] = stats.errors;
        j["skipped"] = stats.skipped;
        emit(stats_json_out, j.dump());
    });
}

cs_status cs_code_emergent(cs_store* store, const cs_corpus* corpus,
                           const char* judge_model, size_t sample_size,
                           char** stats_json_out) {
    if (!store || !corpus || !judge_model)
        return fail_arg("cs_code_emergent: NULL argument");
    if (stats_json_out) *stats_json_out = nullptr;
    return guarded([&] {
        const auto stats = creastress::orchestrator::code_emergent_ideas(
            store->store, corpus->ads, judge_model, static_cast<int>(sample_size));
        json j;
        j["ads_sampled"] = stats.ads_sampled;
        j["ideas"] = stats.ideas;
        j["discarded"] = stats.discarded;
        j["skipped"] = stats.skipped;
        emit(stats_json_out, j.dump());
    });
}

cs_status cs_score(cs_store* store, const cs_corpus* corpus, char** stats_json_out) {
    if (!store || !corpus) return fail_arg("cs_score: NULL argument");
    if (stats_json_out) *stats_json_out = nullptr;
    return guarded([&] {
        const auto stats = creastress::orchestrator::score_run(store->store, corpus->ads);
        json j;
        j["records"] = stats.records;
        j["error_cells"] = stats.error_cells;
        emit(stats_json_out, j.dump());
    });
}

cs_status cs_aggregate_json(cs_store* store, char** json_out) {
    if (!store || !json_out) return fail_arg("cs_aggregate_json: NULL argument");
    *json_out = nullptr;
    return guarded([&] {
        std::vector<creastress::metrics::MetricRecord> scores;
        if (std::filesystem::exists(store->store.scores_path()))
            for (const auto& j : creastress::serialize::read_jsonl(store->store.scores_path()))
                scores.push_back(creastress::serialize::metric_from_json(j));
        const auto rows = creastress::report::aggregate_metrics(scores);
        json out = json::array();
        for (const auto& r : rows) {
            json row;
            row["phase"] = std::string(creastress::to_string(r.phase));
            row["model"] = r.model_id;
            row["level"] = std::string(creastress::to_string(r.level));
            row["single_run"] = r.single_run;
            const auto metric = [&](const char* name,
                                    const creastress::report::MetricAggregate& m) {
                json cell;
                if (m.empty()) cell["mean"] = nullptr;
                else {
                    cell["mean"] = m.mean;
                    cell["sd"] = m.sd;
                    cell["run_means"] = m.run_means;
                }
                cell["valid_cells"] = m.valid_cells;
                cell["excluded_cells"] = m.excluded_cells;
                row[name] = cell;
            };
            metric("cosine", r.cosine);
            metric("meteor", r.meteor);
            metric("entropy", r.entropy);
            metric("uniqueness", r.uniqueness);
            out.push_back(row);
        }
        emit(json_out, out.dump());
    });
}

cs_status cs_render_report(cs_store* store, const cs_corpus* corpus, size_t top_k,
                           char** result_json_out) {
    if (!store) return fail_arg("cs_render_report: NULL store");
    if (result_json_out) *result_json_out = nullptr;
    return guarded([&] {
        static const std::vector<creastress::corpus::AdConcept> kNoAds;
        const auto result = creastress::report::render_report(
            store->store, corpus ? corpus->ads : kNoAds, top_k);
        json j;
        j["files"] = json::array();
        for (const auto& f : result.files) j["files"].push_back(f.string());
        j["gaps"] = result.gaps;
        emit(result_json_out, j.dump());
    });
}

cs_status cs_verify_export(cs_store* store, const char* csv_path, const char* model,
                           char** stats_json_out) {
    if (!store || !csv_path) return fail_arg("cs_verify_export: NULL argument");
    if (stats_json_out) *stats_json_out = nullptr;
    return guarded([&] {
        creastress::orchestrator::export_for_verification(store->store, csv_path,
                                                          model ? model : "");
        json j;
        j["csv"] = std::string(csv_path);
        emit(stats_json_out, j.dump());
    });
}

cs_status cs_verify_import(cs_store* store, const char* csv_path, const char* model,
                           char** stats_json_out) {
    if (!store || !csv_path) return fail_arg("cs_verify_import: NULL argument");
    if (stats_json_out) *stats_json_out = nullptr;
    return guarded([&] {
        const auto stats = creastress::orchestrator::import_verification(
            store->store, csv_path, model ? model : "");
        json j;
        j["rows"] = stats.rows;
        j["updated"] = stats.updated;
        emit(stats_json_out, j.dump());
    });
}

/* ---- metrics on raw strings ------------------------------------------ */

cs_status cs_metric_tfidf_cosine(const char* original, const char* generated,
                                 double* out) {
    if (!original || !generated || !out)
        return fail_arg("cs_metric_tfidf_cosine: NULL argument");
    return guarded([&] { *out = creastress::metrics::tfidf_cosine(original, generated); });
}

cs_status cs_metric_meteor(const char* reference, const char* hypothesis, double* out) {
    if (!reference || !hypothesis || !out)
        return fail_arg("cs_metric_meteor: NULL argument");
    return guarded([&] { *out = creastress::metrics::meteor(reference, hypothesis); });
}

cs_status cs_metric_entropy(const char* text, double* out) {
    if (!text || !out) return fail_arg("cs_metric_entropy: NULL argument");
    return guarded([&] { *out = creastress::metrics::shannon_entropy(text); });
}

cs_status cs_metric_fourgram_uniqueness(const char* original, const char* generated,
                                        double* out, int* degenerate_out) {
    if (!original || !generated || !out)
        return fail_arg("cs_metric_fourgram_uniqueness: NULL argument");
    return guarded([&] {
        const auto u = creastress::metrics::fourgram_uniqueness(original, generated);
        *out = u.value;
        if (degenerate_out) *degenerate_out = u.degenerate ? 1 : 0;
    });
}

} /* extern "C" */
