/* C API for the creativity stress-test pipeline.
 *
 * Every function returns a cs_status; CS_OK means success. On failure the
 * thread-local message from cs_last_error() describes the cause. Strings
 * returned through char** are heap-allocated and must be released with
 * cs_string_free(). Handles are opaque and must be released with their
 * matching *_free() function. NULL handle/output arguments are rejected
 * with CS_ERR_INVALID_ARGUMENT, never dereferenced.
 */
#ifndef CREASTRESS_H
#define CREASTRESS_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cs_status {
    CS_OK = 0,
    CS_ERR_INVALID_ARGUMENT = 1, /* bad input value or degenerate pair */
    CS_ERR_PARSE = 2,            /* malformed file, config, or model reply */
    CS_ERR_IO = 3,               /* filesystem failure */
    CS_ERR_TRANSPORT = 4,        /* backend unreachable / retries exhausted */
    CS_ERR_CREDENTIAL = 5,       /* authentication rejected */
    CS_ERR_PROTOCOL = 6,         /* response shape not understood */
    CS_ERR_STATE = 7,            /* run directory incomplete for this step */
    CS_ERR_INTERNAL = 8          /* unexpected failure */
} cs_status;

/* Thread-local message for the most recent failure on this thread.
 * Never NULL; empty string when no failure has occurred. */
const char* cs_last_error(void);

/* Stable lowercase name for a status code ("ok", "parse", ...). */
const char* cs_status_name(cs_status status);

/* Frees a string returned through a char** out-parameter. NULL is a no-op. */
void cs_string_free(char* s);

/* ---- corpus ---------------------------------------------------------- */

typedef struct cs_corpus cs_corpus;

/* Loads and validates an ad corpus (.jsonl or .csv, chosen by extension). */
cs_status cs_corpus_load(const char* path, cs_corpus** out);
void cs_corpus_free(cs_corpus* corpus);

size_t cs_corpus_size(const cs_corpus* corpus);

/* {"n_ads":..,"mean_word_count":..,"mean_entropy":..} */
cs_status cs_corpus_stats_json(const cs_corpus* corpus, char** json_out);

/* ---- run store ------------------------------------------------------- */

typedef struct cs_store cs_store;

/* Creates (or re-opens) a run directory and writes config.json from the
 * given RunConfig-shaped JSON string. */
cs_status cs_store_create(const char* dir, const char* config_json, cs_store** out);

/* Opens an existing run directory; fails with CS_ERR_STATE when config.json
 * is missing. */
cs_status cs_store_open(const char* dir, cs_store** out);

void cs_store_free(cs_store* store);

/* The effective configuration persisted in the run directory. */
cs_status cs_store_config_json(const cs_store* store, char** json_out);

/* ---- pipeline steps --------------------------------------------------- */
/* Each step returns a small JSON stats object through stats_json_out
 * (pass NULL to discard). All steps resume: work already persisted in the
 * run directory is skipped. */

/* Phase 1: contract every ad at mild/moderate/extreme, always from the
 * original, for every configured model and run. */
cs_status cs_run_phase1(cs_store* store, const cs_corpus* corpus, char** stats_json_out);

/* Phase 2: chained expansion seeded by the Phase-1 extreme output.
 * variant is "plain" or "marker"; the marker variant requires markers.jsonl. */
cs_status cs_run_phase2(cs_store* store, const cs_corpus* corpus, const char* variant,
                        char** stats_json_out);

/* Extracts creative markers for every ad (or only ad_ids when n_ad_ids > 0)
 * using judge_model, appending to markers.jsonl. */
cs_status cs_extract_markers(cs_store* store, const cs_corpus* corpus,
                             const char* judge_model, const char* const* ad_ids,
                             size_t n_ad_ids, char** stats_json_out);

/* Judges marker survival in every Phase-1 output, appending to
 * judgments.jsonl. */
cs_status cs_judge_markers(cs_store* store, const cs_corpus* corpus,
                           const char* judge_model, char** stats_json_out);

/* Codes emergent ideas on a seeded sample of extreme plain expansions. */
cs_status cs_code_emergent(cs_store* store, const cs_corpus* corpus,
                           const char* judge_model, size_t sample_size,
                           char** stats_json_out);

/* Scores every generation record against its original (scores.jsonl). */
cs_status cs_score(cs_store* store, const cs_corpus* corpus, char** stats_json_out);

/* Aggregated metric rows from scores.jsonl as a JSON array. */
cs_status cs_aggregate_json(cs_store* store, char** json_out);

/* Renders report/ (Markdown, CSVs, plot data, summary.json). corpus may be
 * NULL; baseline rows are then omitted and reported as a gap. Returns
 * {"files":[..],"gaps":[..]} through result_json_out. */
cs_status cs_render_report(cs_store* store, const cs_corpus* corpus, size_t top_k,
                           char** result_json_out);

/* Writes the human-verification CSV for one model's judgments. model may be
 * NULL or empty when only one model has judgments. */
cs_status cs_verify_export(cs_store* store, const char* csv_path, const char* model,
                           char** stats_json_out);

/* Re-imports an edited verification CSV; only the verdict column is honored.
 * model follows the same rules as cs_verify_export. */
cs_status cs_verify_import(cs_store* store, const char* csv_path, const char* model,
                           char** stats_json_out);

/* ---- metrics on raw strings ------------------------------------------ */

/* Pairwise TF-IDF cosine similarity in [0, 1]. */
cs_status cs_metric_tfidf_cosine(const char* original, const char* generated,
                                 double* out);

/* METEOR with exact + stem stages (alpha 0.9, beta 3, gamma 0.5). */
cs_status cs_metric_meteor(const char* reference, const char* hypothesis, double* out);

/* Shannon entropy (bits) of the text's unigram distribution. */
cs_status cs_metric_entropy(const char* text, double* out);

/* 4-gram uniqueness = 1 - Jaccard similarity of the two texts' distinct
 * 4-gram sets. degenerate_out (optional) is set to 1 when both texts are
 * shorter than 4 tokens. */
cs_status cs_metric_fourgram_uniqueness(const char* original, const char* generated,
                                        double* out, int* degenerate_out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* CREASTRESS_H */
