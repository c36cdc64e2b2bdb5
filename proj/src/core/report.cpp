#include "report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "error.hpp"
#include "serialize.hpp"
#include "text.hpp"

namespace creastress::report {

namespace fs = std::filesystem;
using serialize::json;

namespace {

std::string fmt(double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

std::string display_level(Level level) {
    switch (level) {
        case Level::original: return "Original";
        case Level::mild: return "Mild";
        case Level::moderate: return "Moderate";
        case Level::extreme: return "Extreme";
    }
    return "?";
}

std::string display_phase(Phase phase) {
    switch (phase) {
        case Phase::forget: return "Phase 1 - forgetting (contraction)";
        case Phase::expand_plain: return "Phase 2 - plain expansion";
        case Phase::expand_marker: return "Phase 2 - marker-driven expansion";
    }
    return "?";
}

std::string phase_slug(Phase phase) {
    switch (phase) {
        case Phase::forget: return "phase1";
        case Phase::expand_plain: return "phase2_plain";
        case Phase::expand_marker: return "phase2_marker";
    }
    return "?";
}

struct Acc {
    std::map<int, std::pair<double, int>> runs;  // run -> (sum, n)
    int excluded = 0;
    int valid = 0;
};

MetricAggregate finalize(const Acc& acc) {
    MetricAggregate m;
    m.excluded_cells = acc.excluded;
    m.valid_cells = acc.valid;
    for (const auto& [run, s] : acc.runs)
        if (s.second > 0) m.run_means.push_back(s.first / s.second);
    if (m.run_means.empty()) return m;
    double sum = 0.0;
    for (const double v : m.run_means) sum += v;
    m.mean = sum / static_cast<double>(m.run_means.size());
    if (m.run_means.size() >= 2) {
        double sq = 0.0;
        for (const double v : m.run_means) sq += (v - m.mean) * (v - m.mean);
        m.sd = std::sqrt(sq / static_cast<double>(m.run_means.size() - 1));
    }
    return m;
}

void write_file(const fs::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io, "cannot write " + path.string());
    out << body;
    if (!out) throw Error(Errc::io, "write failed: " + path.string());
}

std::string csv_cell(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string out = "\"";
    for (const char c : field)
        out += (c == '"') ? std::string("\"\"") : std::string(1, c);
    out += '"';
    return out;
}

}  // namespace

std::vector<AggregateRow> aggregate_metrics(const std::vector<metrics::MetricRecord>& records) {
    std::vector<std::string> model_order;
    std::set<std::string> seen_models;
    for (const auto& r : records)
        if (seen_models.insert(r.model_id).second) model_order.push_back(r.model_id);

    struct GroupAcc {
        Acc cosine, meteor, entropy, uniq;
        std::set<int> run_ids;
    };
    std::map<std::tuple<int, std::string, int>, GroupAcc> groups;
    for (const auto& r : records) {
        auto& g = groups[{static_cast<int>(r.phase), r.model_id, static_cast<int>(r.level)}];
        g.run_ids.insert(r.run_index);
        const auto add = [&](Acc& acc, const metrics::MetricValue& v) {
            if (v.ok()) {
                auto& slot = acc.runs[r.run_index];
                slot.first += v.value;
                slot.second += 1;
                ++acc.valid;
            } else {
                ++acc.excluded;
            }
        };
        add(g.cosine, r.cosine);
        add(g.meteor, r.meteor);
        add(g.entropy, r.entropy);
        add(g.uniq, r.ngram_uniqueness);
    }

    std::vector<AggregateRow> rows;
    for (const Phase phase : {Phase::forget, Phase::expand_plain, Phase::expand_marker}) {
        for (const auto& model : model_order) {
            for (const Level level :
                 {Level::original, Level::mild, Level::moderate, Level::extreme}) {
                const auto it =
                    groups.find({static_cast<int>(phase), model, static_cast<int>(level)});
                if (it == groups.end()) continue;
                AggregateRow row;
                row.phase = phase;
                row.model_id = model;
                row.level = level;
                row.cosine = finalize(it->second.cosine);
                row.meteor = finalize(it->second.meteor);
                row.entropy = finalize(it->second.entropy);
                row.uniqueness = finalize(it->second.uniq);
                row.single_run = it->second.run_ids.size() == 1;
                rows.push_back(std::move(row));
            }
        }
    }
    return rows;
}

std::vector<MarkerStats> marker_survival_stats(const std::vector<MarkerJudgment>& judgments,
                                               const std::vector<corpus::Marker>& store_markers) {
    std::map<std::string, MarkerCategory> category_of;
    std::map<std::string, std::size_t> per_ad_index;
    for (const auto& m : store_markers)
        category_of[corpus::marker_id(m.ad_id, ++per_ad_index[m.ad_id])] = m.category;

    std::map<std::pair<MarkerCategory, Level>, std::pair<double, int>> acc;
    std::map<MarkerCategory, int> n_valid;
    std::map<MarkerCategory, int> n_error;
    for (const auto& j : judgments) {
        const auto found = category_of.find(j.marker_id);
        if (found == category_of.end()) continue;  // marker no longer in the store
        const MarkerCategory cat = found->second;
        if (!j.error.empty()) {
            ++n_error[cat];
            continue;
        }
        auto& slot = acc[{cat, j.level}];
        slot.first += j.score;
        slot.second += 1;
        ++n_valid[cat];
    }

    std::vector<MarkerStats> out;
    for (const MarkerCategory cat :
         {MarkerCategory::metaphorical, MarkerCategory::emotional, MarkerCategory::visual,
          MarkerCategory::slogan_like, MarkerCategory::brand_specific}) {
        if (!n_valid.count(cat) && !n_error.count(cat)) continue;
        MarkerStats s;
        s.category = cat;
        s.n_judgments = n_valid.count(cat) ? n_valid.at(cat) : 0;
        s.error_cells = n_error.count(cat) ? n_error.at(cat) : 0;
        for (const Level level : kRunLevels) {
            const auto it = acc.find({cat, level});
            if (it != acc.end() && it->second.second > 0)
                s.mean_score[level] = it->second.first / it->second.second;
        }
        const auto mild = s.mean_score.find(Level::mild);
        const auto extreme = s.mean_score.find(Level::extreme);
        if (mild != s.mean_score.end() && extreme != s.mean_score.end() && mild->second > 0)
            s.pct_drop = 100.0 * (mild->second - extreme->second) / mild->second;
        out.push_back(std::move(s));
    }
    return out;
}

std::map<MarkerCategory, double> emergent_type_distribution(
    const std::vector<EmergentIdea>& ideas) {
    if (ideas.empty())
        throw Error(Errc::invalid_argument, "emergent_type_distribution: no ideas");
    std::map<MarkerCategory, std::size_t> counts;
    for (const auto& idea : ideas) ++counts[idea.category];
    std::map<MarkerCategory, double> fractions;
    for (const auto& [cat, n] : counts)
        fractions[cat] = static_cast<double>(n) / static_cast<double>(ideas.size());
    return fractions;
}

std::vector<std::pair<std::string, std::size_t>> bigram_frequency(
    const std::vector<std::string>& texts, std::size_t top_k) {
    if (texts.empty()) throw Error(Errc::invalid_argument, "bigram_frequency: no texts");
    std::map<std::string, std::size_t> counts;
    for (const auto& t : texts) {
        const auto toks = text::tokenize(t);
        for (std::size_t i = 0; i + 1 < toks.size(); ++i) ++counts[toks[i] + ' ' + toks[i + 1]];
    }
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (ranked.size() > top_k) ranked.resize(top_k);
    return ranked;
}

ReportResult render_report(const orchestrator::RunStore& store,
                           const std::vector<corpus::AdConcept>& ads, std::size_t top_k) {
    fs::create_directories(store.report_dir());
    ReportResult result;

    // Inputs (all optional; absences become gaps).
    std::vector<metrics::MetricRecord> scores;
    if (fs::exists(store.scores_path())) {
        for (const auto& j : serialize::read_jsonl(store.scores_path()))
            scores.push_back(serialize::metric_from_json(j));
    }
    if (scores.empty())
        result.gaps.push_back("no scores (run `score` first): metric tables omitted");

    const auto judgments = store.read_judgments();
    const auto store_markers = store.read_markers();
    if (judgments.empty())
        result.gaps.push_back("no judgments (run `judge-markers` first): marker survival "
                              "table omitted");
    const auto emergent = store.read_emergent();
    if (emergent.empty())
        result.gaps.push_back("no emergent ideas (run `code-emergent` first): emergent "
                              "distribution omitted");

    // Corpus-derived baselines.
    bool have_identity = false;
    double identity_meteor = 0.0;
    double identity_entropy = 0.0;
    std::optional<corpus::CorpusStats> cstats;
    if (!ads.empty()) {
        cstats = corpus::corpus_stats(ads);
        double msum = 0.0;
        double esum = 0.0;
        for (const auto& ad : ads) {
            const auto rec = metrics::score_identity(ad, Phase::forget, 1);
            msum += rec.meteor.value;
            esum += rec.entropy.value;
        }
        identity_meteor = msum / static_cast<double>(ads.size());
        identity_entropy = esum / static_cast<double>(ads.size());
        have_identity = true;
    } else {
        result.gaps.push_back("corpus unavailable: Original baseline rows omitted");
    }

    const auto rows = aggregate_metrics(scores);
    std::vector<std::string> model_order;
    {
        std::set<std::string> seen;
        for (const auto& r : rows)
            if (seen.insert(r.model_id).second) model_order.push_back(r.model_id);
    }
    std::set<Phase> phases_present;
    for (const auto& r : rows) phases_present.insert(r.phase);

    // Extreme plain-expansion outputs feed the bigram table.
    std::vector<std::string> extreme_texts;
    for (const auto& model : store.config().models)
        for (int run = 1; run <= store.config().runs_per_model; ++run)
            for (const auto& rec : store.read_records(Phase::expand_plain, model, run))
                if (rec.level == Level::extreme) extreme_texts.push_back(rec.output_text);
    if (extreme_texts.empty())
        result.gaps.push_back("no extreme plain expansions: bigram table omitted");
    const auto bigrams =
        extreme_texts.empty()
            ? std::vector<std::pair<std::string, std::size_t>>{}
            : bigram_frequency(extreme_texts, top_k);

    const auto marker_stats =
        judgments.empty() ? std::vector<MarkerStats>{}
                          : marker_survival_stats(judgments, store_markers);
    const auto emergent_fractions =
        emergent.empty() ? std::map<MarkerCategory, double>{}
                         : emergent_type_distribution(emergent);
    std::map<MarkerCategory, std::size_t> emergent_counts;
    for (const auto& idea : emergent) ++emergent_counts[idea.category];

    // ---- report.md ------------------------------------------------------
    std::ostringstream md;
    md << "# Creativity stress report\n\n";
    if (cstats)
        md << "Corpus: " << cstats->n_ads << " ads, mean length "
           << fmt(cstats->mean_word_count, 1) << " tokens, mean unigram entropy "
           << fmt(cstats->mean_entropy, 3) << " bits.\n\n";
    md << "All values are regenerated deterministically from the persisted run store.\n";

    const auto metric_cell = [](const MetricAggregate& m, bool with_sd) {
        if (m.empty()) return std::string("-");
        std::string cell = fmt(m.mean, 3);
        if (with_sd && m.run_means.size() > 1) cell += " \xC2\xB1 " + fmt(m.sd, 3);
        return cell;
    };

    for (const Phase phase : {Phase::forget, Phase::expand_plain, Phase::expand_marker}) {
        if (!phases_present.count(phase)) continue;
        md << "\n## " << display_phase(phase) << "\n\n";
        md << "| Model | Level | TF-IDF cosine | METEOR | Entropy (bits) | 4-gram "
              "uniqueness |\n";
        md << "|---|---|---|---|---|---|\n";
        int excluded_total = 0;
        bool any_single = false;
        for (const auto& model : model_order) {
            if (have_identity)
                md << "| " << model << " | Original | " << fmt(1.0, 3) << " | "
                   << fmt(identity_meteor, 3) << " | " << fmt(identity_entropy, 3) << " | "
                   << fmt(0.0, 3) << " |\n";
            for (const auto& r : rows) {
                if (r.phase != phase || r.model_id != model) continue;
                md << "| " << model << " | " << display_level(r.level) << " | "
                   << metric_cell(r.cosine, true) << " | " << metric_cell(r.meteor, true)
                   << " | " << metric_cell(r.entropy, true) << " | "
                   << metric_cell(r.uniqueness, true) << " |\n";
                excluded_total += r.cosine.excluded_cells + r.meteor.excluded_cells +
                                  r.entropy.excluded_cells + r.uniqueness.excluded_cells;
                any_single = any_single || r.single_run;
            }
        }
        if (excluded_total > 0)
            md << "\n" << excluded_total
               << " error cells were excluded from the means above (see scores.jsonl).\n";
        if (any_single)
            md << "\nSome cells aggregate a single run; their SD is reported as 0.\n";
    }

    if (!marker_stats.empty()) {
        md << "\n## Marker survival (Phase 1)\n\n";
        md << "| Category | Mild | Moderate | Extreme | Drop mild->extreme |\n";
        md << "|---|---|---|---|---|\n";
        for (const auto& s : marker_stats) {
            const auto cell = [&](Level level) {
                const auto it = s.mean_score.find(level);
                return it == s.mean_score.end() ? std::string("-") : fmt(it->second, 3);
            };
            md << "| " << to_string(s.category) << " | " << cell(Level::mild) << " | "
               << cell(Level::moderate) << " | " << cell(Level::extreme) << " | "
               << (s.pct_drop ? fmt(*s.pct_drop, 1) + "%" : std::string("-")) << " |\n";
        }
    }

    if (!emergent_fractions.empty()) {
        md << "\n## Emergent ideas (extreme plain expansion)\n\n";
        md << "| Category | Count | Fraction |\n|---|---|---|\n";
        for (const auto& [cat, fraction] : emergent_fractions)
            md << "| " << to_string(cat) << " | " << emergent_counts[cat] << " | "
               << fmt(fraction, 3) << " |\n";
    }

    if (!bigrams.empty()) {
        md << "\n## Top bigrams (extreme plain expansions)\n\n";
        md << "| Rank | Bigram | Count |\n|---|---|---|\n";
        for (std::size_t i = 0; i < bigrams.size(); ++i)
            md << "| " << (i + 1) << " | " << bigrams[i].first << " | " << bigrams[i].second
               << " |\n";
    }

    if (!result.gaps.empty()) {
        md << "\n## Gaps\n\n";
        for (const auto& g : result.gaps) md << "- " << g << "\n";
    }

    md << "\n## Methods\n\n"
       << "- Tokenizer: contiguous runs of Unicode letters and digits, lowercased; "
          "hyphenated words split at the hyphen.\n"
       << "- TF-IDF cosine: raw term counts over the original/generated pair, "
          "idf(t) = ln((1+N)/(1+df(t))) + 1 with N = 2, L2-normalized.\n"
       << "- METEOR: alpha 0.9, beta 3, gamma 0.5; exact and Porter-stem matching stages. "
          "No synonym stage runs unless a lexicon is supplied, so absolute scores can sit "
          "slightly below implementations with one.\n"
       << "- Entropy: Shannon entropy (bits) of the generated text's unigram "
          "distribution.\n"
       << "- 4-gram uniqueness: 1 minus the Jaccard overlap between the original's and "
          "the generation's 4-gram sets.\n"
       << "- Aggregation: unweighted mean over ads within a run, then mean and sample SD "
          "(n-1) across runs; error cells are excluded and counted, never zero-filled.\n"
       << "- Original rows come from the loaded corpus: cosine 1, uniqueness 0, METEOR at "
          "its identity ceiling 1 - 0.5/m^3, entropy of the ad itself.\n"
       << "- Marker survival: present/partly/absent map to 1.0/0.5/0.0; judged per run "
          "and pooled over runs and models; drop = 100*(mild - extreme)/mild (a "
          "relative-drop reading of the per-level means).\n"
       << "- Emergent ideas: coded on the last run's extreme plain expansion per ad and "
          "model; candidate ideas found verbatim in the original are discarded.\n"
       << "- Bigrams: counted with multiplicity over all extreme plain-expansion "
          "outputs; ties rank lexicographically.\n";

    write_file(store.report_dir() / "report.md", md.str());
    result.files.push_back(store.report_dir() / "report.md");

    // ---- aggregates.csv -------------------------------------------------
    {
        std::ostringstream csv;
        csv << "phase,model,level,metric,mean,sd,n_runs,valid_cells,excluded_cells,"
               "single_run,run_means\n";
        for (const auto& r : rows) {
            const auto line = [&](const char* metric, const MetricAggregate& m) {
                csv << phase_slug(r.phase) << ',' << csv_cell(r.model_id) << ','
                    << to_string(r.level) << ',' << metric << ',';
                if (!m.empty()) csv << fmt(m.mean, 9) << ',' << fmt(m.sd, 9);
                else csv << ',';
                csv << ',' << m.run_means.size() << ',' << m.valid_cells << ','
                    << m.excluded_cells << ',' << (r.single_run ? 1 : 0) << ',';
                std::string joined;
                for (const double v : m.run_means) {
                    if (!joined.empty()) joined += ';';
                    joined += fmt(v, 9);
                }
                csv << csv_cell(joined) << '\n';
            };
            line("cosine", r.cosine);
            line("meteor", r.meteor);
            line("entropy", r.entropy);
            line("uniqueness", r.uniqueness);
        }
        write_file(store.report_dir() / "aggregates.csv", csv.str());
        result.files.push_back(store.report_dir() / "aggregates.csv");
    }

    // ---- plot data ------------------------------------------------------
    for (const Phase phase : {Phase::forget, Phase::expand_plain, Phase::expand_marker}) {
        if (!phases_present.count(phase)) continue;
        const struct {
            const char* slug;
            MetricAggregate AggregateRow::* member;
            double identity;
        } series[] = {
            {"cosine", &AggregateRow::cosine, 1.0},
            {"meteor", &AggregateRow::meteor, identity_meteor},
            {"entropy", &AggregateRow::entropy, identity_entropy},
            {"uniqueness", &AggregateRow::uniqueness, 0.0},
        };
        for (const auto& s : series) {
            std::ostringstream csv;
            csv << "level";
            for (const auto& model : model_order) csv << ',' << csv_cell(model);
            csv << '\n';
            if (have_identity) {
                csv << "original";
                for (std::size_t i = 0; i < model_order.size(); ++i)
                    csv << ',' << fmt(s.identity, 9);
                csv << '\n';
            }
            for (const Level level : kRunLevels) {
                csv << to_string(level);
                for (const auto& model : model_order) {
                    csv << ',';
                    for (const auto& r : rows) {
                        if (r.phase != phase || r.model_id != model || r.level != level)
                            continue;
                        const auto& m = r.*(s.member);
                        if (!m.empty()) csv << fmt(m.mean, 9);
                        break;
                    }
                }
                csv << '\n';
            }
            const auto name = "plot_" + phase_slug(phase) + "_" + s.slug + ".csv";
            write_file(store.report_dir() / name, csv.str());
            result.files.push_back(store.report_dir() / name);
        }
    }

    // ---- marker_survival.csv --------------------------------------------
    if (!marker_stats.empty()) {
        std::ostringstream csv;
        csv << "category,mild,moderate,extreme,pct_drop,n_judgments,error_cells\n";
        for (const auto& s : marker_stats) {
            const auto cell = [&](Level level) {
                const auto it = s.mean_score.find(level);
                return it == s.mean_score.end() ? std::string() : fmt(it->second, 9);
            };
            csv << to_string(s.category) << ',' << cell(Level::mild) << ','
                << cell(Level::moderate) << ',' << cell(Level::extreme) << ','
                << (s.pct_drop ? fmt(*s.pct_drop, 9) : std::string()) << ','
                << s.n_judgments << ',' << s.error_cells << '\n';
        }
        write_file(store.report_dir() / "marker_survival.csv", csv.str());
        result.files.push_back(store.report_dir() / "marker_survival.csv");
    }

    // ---- emergent_distribution.csv --------------------------------------
    if (!emergent_fractions.empty()) {
        std::ostringstream csv;
        csv << "category,count,fraction\n";
        for (const auto& [cat, fraction] : emergent_fractions)
            csv << to_string(cat) << ',' << emergent_counts[cat] << ',' << fmt(fraction, 9)
                << '\n';
        write_file(store.report_dir() / "emergent_distribution.csv", csv.str());
        result.files.push_back(store.report_dir() / "emergent_distribution.csv");
    }

    // ---- bigrams.csv ----------------------------------------------------
    if (!bigrams.empty()) {
        std::ostringstream csv;
        csv << "rank,bigram,count\n";
        for (std::size_t i = 0; i < bigrams.size(); ++i)
            csv << (i + 1) << ',' << csv_cell(bigrams[i].first) << ',' << bigrams[i].second
                << '\n';
        write_file(store.report_dir() / "bigrams.csv", csv.str());
        result.files.push_back(store.report_dir() / "bigrams.csv");
    }

    // ---- summary.json ---------------------------------------------------
    {
        json summary;
        if (cstats) {
            summary["corpus"] = {{"n_ads", cstats->n_ads},
                                 {"mean_word_count", cstats->mean_word_count},
                                 {"mean_entropy", cstats->mean_entropy}};
            summary["original_baseline"] = {{"cosine", 1.0},
                                            {"meteor", identity_meteor},
                                            {"entropy", identity_entropy},
                                            {"uniqueness", 0.0}};
        }
        summary["aggregates"] = json::array();
        for (const auto& r : rows) {
            json row;
            row["phase"] = phase_slug(r.phase);
            row["model"] = r.model_id;
            row["level"] = to_string(r.level);
            row["single_run"] = r.single_run;
            const auto metric = [&](const char* name, const MetricAggregate& m) {
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
            summary["aggregates"].push_back(row);
        }
        summary["marker_survival"] = json::array();
        for (const auto& s : marker_stats) {
            json row;
            row["category"] = to_string(s.category);
            for (const Level level : kRunLevels) {
                const auto it = s.mean_score.find(level);
                row[std::string(to_string(level))] =
                    it == s.mean_score.end() ? json() : json(it->second);
            }
            row["pct_drop"] = s.pct_drop ? json(*s.pct_drop) : json();
            row["n_judgments"] = s.n_judgments;
            row["error_cells"] = s.error_cells;
            summary["marker_survival"].push_back(row);
        }
        summary["emergent"] = json::object();
        for (const auto& [cat, fraction] : emergent_fractions)
            summary["emergent"][std::string(to_string(cat))] = {
                {"count", emergent_counts[cat]}, {"fraction", fraction}};
        summary["bigrams"] = json::array();
        for (const auto& [bigram, count] : bigrams)
            summary["bigrams"].push_back(json::array({bigram, count}));
        summary["gaps"] = result.gaps;
        write_file(store.report_dir() / "summary.json", summary.dump(2) + "\n");
        result.files.push_back(store.report_dir() / "summary.json");
    }

    return result;
}

}  // namespace creastress::report
