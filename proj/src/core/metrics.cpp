#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "error.hpp"
#include "porter.hpp"
#include "text.hpp"

namespace creastress::metrics {

namespace {

using text::TokenStream;

struct AlignPair {
    int hyp;
    int ref;
};

int added_crossings(const std::vector<AlignPair>& pairs, int h, int r) {
    int c = 0;
    for (const auto& p : pairs)
        if ((p.hyp < h && p.ref > r) || (p.hyp > h && p.ref < r)) ++c;
    return c;
}

// One alignment stage: picks a maximum matching over the candidate edges
// that adds the fewest crossings to the cumulative alignment, preferring
// leftmost hypothesis/reference positions among equals. The search is exact
// up to a node budget; past it the deterministic augmenting-path matching
// found first stands.
void align_stage(const std::vector<std::vector<int>>& cand, int n_ref,
                 std::vector<AlignPair>& alignment, std::vector<char>& hyp_used,
                 std::vector<char>& ref_used) {
    std::vector<int> hyps;
    for (std::size_t i = 0; i < cand.size(); ++i)
        if (!cand[i].empty()) hyps.push_back(static_cast<int>(i));
    if (hyps.empty()) return;

    // Maximum matching size (Kuhn), visiting candidates in ascending order.
    std::vector<int> ref_match(static_cast<std::size_t>(n_ref), -1);
    std::vector<int> hyp_match(cand.size(), -1);
    std::function<bool(int, std::vector<char>&)> try_augment = [&](int h, std::vector<char>& vis) {
        for (int r : cand[static_cast<std::size_t>(h)]) {
            if (vis[static_cast<std::size_t>(r)]) continue;
            vis[static_cast<std::size_t>(r)] = 1;
            if (ref_match[static_cast<std::size_t>(r)] == -1 ||
                try_augment(ref_match[static_cast<std::size_t>(r)], vis)) {
                ref_match[static_cast<std::size_t>(r)] = h;
                hyp_match[static_cast<std::size_t>(h)] = r;
                return true;
            }
        }
        return false;
    };
    int max_matches = 0;
    for (int h : hyps) {
        std::vector<char> vis(static_cast<std::size_t>(n_ref), 0);
        if (try_augment(h, vis)) ++max_matches;
    }
    if (max_matches == 0) return;

    std::vector<AlignPair> best;
    long best_cross = 0;
    {
        std::vector<AlignPair> cumulative = alignment;
        for (int h : hyps) {
            const int r = hyp_match[static_cast<std::size_t>(h)];
            if (r == -1) continue;
            best_cross += added_crossings(cumulative, h, r);
            cumulative.push_back({h, r});
            best.push_back({h, r});
        }
    }

    bool found = false;
    long budget = 200000;
    std::vector<AlignPair> chosen;
    chosen.reserve(static_cast<std::size_t>(max_matches));
    std::vector<char> rused(static_cast<std::size_t>(n_ref), 0);
    std::vector<AlignPair> cumulative = alignment;

    std::function<void(std::size_t, int, long)> dfs = [&](std::size_t idx, int matched, long cross) {
        if (--budget < 0) return;
        if (cross > best_cross || (cross == best_cross && found)) return;
        int possible = matched;
        for (std::size_t k = idx; k < hyps.size(); ++k) {
            for (int r : cand[static_cast<std::size_t>(hyps[k])]) {
                if (!rused[static_cast<std::size_t>(r)]) {
                    ++possible;
                    break;
                }
            }
        }
        if (possible < max_matches) return;
        if (idx == hyps.size()) {
            if (matched == max_matches) {
                best = chosen;
                best_cross = cross;
                found = true;
            }
            return;
        }
        const int h = hyps[idx];
        for (int r : cand[static_cast<std::size_t>(h)]) {
            if (rused[static_cast<std::size_t>(r)]) continue;
            const long add = added_crossings(cumulative, h, r);
            rused[static_cast<std::size_t>(r)] = 1;
            chosen.push_back({h, r});
            cumulative.push_back({h, r});
            dfs(idx + 1, matched + 1, cross + add);
            cumulative.pop_back();
            chosen.pop_back();
            rused[static_cast<std::size_t>(r)] = 0;
        }
        dfs(idx + 1, matched, cross);
    };
    dfs(0, 0, 0);

    for (const auto& p : best) {
        alignment.push_back(p);
        hyp_used[static_cast<std::size_t>(p.hyp)] = 1;
        ref_used[static_cast<std::size_t>(p.ref)] = 1;
    }
}

std::vector<std::string> stems_of(const TokenStream& toks) {
    std::vector<std::string> out;
    out.reserve(toks.size());
    for (const auto& t : toks) out.push_back(text::stem(t));
    return out;
}

}  // namespace

SynonymLexicon SynonymLexicon::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io, "cannot open synonym lexicon: " + path.string());
    SynonymLexicon lex;
    std::string line;
    int set_id = 0;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string word;
        std::vector<std::string> members;
        while (ss >> word) members.push_back(text::stem(text::lowercase(word)));
        if (members.size() < 2) continue;
        for (const auto& w : members) lex.sets_of_[w].push_back(set_id);
        ++set_id;
    }
    lex.set_count_ = static_cast<std::size_t>(set_id);
    return lex;
}

bool SynonymLexicon::related(const std::string& stem_a, const std::string& stem_b) const {
    const auto a = sets_of_.find(stem_a);
    if (a == sets_of_.end()) return false;
    const auto b = sets_of_.find(stem_b);
    if (b == sets_of_.end()) return false;
    for (int ia : a->second)
        for (int ib : b->second)
            if (ia == ib) return true;
    return false;
}

MeteorParams with_synonyms(MeteorParams params, std::shared_ptr<const SynonymLexicon> lexicon) {
    params.synonyms = std::move(lexicon);
    if (std::find(params.stages.begin(), params.stages.end(), MatchStage::synonym) ==
        params.stages.end())
        params.stages.push_back(MatchStage::synonym);
    return params;
}

double tfidf_cosine(std::string_view original, std::string_view generated) {
    const auto toks_o = text::tokenize(original);
    const auto toks_g = text::tokenize(generated);
    if (toks_o.empty() || toks_g.empty())
        throw Error(Errc::invalid_argument, "tfidf_cosine: degenerate pair (empty tokenization)");

    std::map<std::string, int> counts_o;
    std::map<std::string, int> counts_g;
    for (const auto& t : toks_o) ++counts_o[t];
    for (const auto& t : toks_g) ++counts_g[t];

    double dot = 0.0;
    double norm_o = 0.0;
    double norm_g = 0.0;
    auto idf = [&](const std::string& term) {
        const int df = (counts_o.count(term) ? 1 : 0) + (counts_g.count(term) ? 1 : 0);
        return std::log(3.0 / (1.0 + df)) + 1.0;  // ln((1+N)/(1+df)) + 1, N = 2
    };
    for (const auto& [term, count] : counts_o) {
        const double w = count * idf(term);
        norm_o += w * w;
        const auto it = counts_g.find(term);
        if (it != counts_g.end()) dot += w * (it->second * idf(term));
    }
    for (const auto& [term, count] : counts_g) {
        const double w = count * idf(term);
        norm_g += w * w;
    }
    const double denom = std::sqrt(norm_o) * std::sqrt(norm_g);
    return std::clamp(dot / denom, 0.0, 1.0);
}

double meteor(std::string_view reference, std::string_view hypothesis,
              const MeteorParams& params) {
    const auto ref = text::tokenize(reference);
    const auto hyp = text::tokenize(hypothesis);
    if (ref.empty() || hyp.empty())
        throw Error(Errc::invalid_argument, "meteor: empty tokenization");

    std::vector<std::string> ref_stems;
    std::vector<std::string> hyp_stems;
    std::vector<AlignPair> alignment;
    std::vector<char> hyp_used(hyp.size(), 0);
    std::vector<char> ref_used(ref.size(), 0);

    for (const MatchStage stage : params.stages) {
        if (stage != MatchStage::exact && ref_stems.empty()) {
            ref_stems = stems_of(ref);
            hyp_stems = stems_of(hyp);
        }
        if (stage == MatchStage::synonym && !params.synonyms)
            throw Error(Errc::invalid_argument, "meteor: synonym stage requires a lexicon");
        std::vector<std::vector<int>> cand(hyp.size());
        for (std::size_t i = 0; i < hyp.size(); ++i) {
            if (hyp_used[i]) continue;
            for (std::size_t j = 0; j < ref.size(); ++j) {
                if (ref_used[j]) continue;
                bool match = false;
                switch (stage) {
                    case MatchStage::exact: match = hyp[i] == ref[j]; break;
                    case MatchStage::stem: match = hyp_stems[i] == ref_stems[j]; break;
                    case MatchStage::synonym:
                        match = params.synonyms->related(hyp_stems[i], ref_stems[j]);
                        break;
                }
                if (match) cand[i].push_back(static_cast<int>(j));
            }
        }
        align_stage(cand, static_cast<int>(ref.size()), alignment, hyp_used, ref_used);
    }

    const auto matches = static_cast<double>(alignment.size());
    if (alignment.empty()) return 0.0;

    const double precision = matches / static_cast<double>(hyp.size());
    const double recall = matches / static_cast<double>(ref.size());
    const double fmean =
        precision * recall / (params.alpha * precision + (1.0 - params.alpha) * recall);

    std::sort(alignment.begin(), alignment.end(),
              [](const AlignPair& a, const AlignPair& b) { return a.hyp < b.hyp; });
    int chunks = 1;
    for (std::size_t i = 1; i < alignment.size(); ++i)
        if (alignment[i].hyp != alignment[i - 1].hyp + 1 ||
            alignment[i].ref != alignment[i - 1].ref + 1)
            ++chunks;

    const double penalty = params.gamma * std::pow(chunks / matches, params.beta);
    return fmean * (1.0 - penalty);
}

double shannon_entropy(std::string_view txt) {
    const auto toks = text::tokenize(txt);
    if (toks.empty()) return 0.0;
    std::map<std::string, int> counts;
    for (const auto& t : toks) ++counts[t];
    const auto total = static_cast<double>(toks.size());
    double h = 0.0;
    for (const auto& [tok, count] : counts) {
        const double p = count / total;
        h -= p * std::log2(p);
    }
    return std::max(0.0, h);
}

Uniqueness fourgram_uniqueness(std::string_view original, std::string_view generated) {
    const auto orig = text::ngrams(text::tokenize(original), 4);
    const auto gen = text::ngrams(text::tokenize(generated), 4);
    if (orig.grams.empty() && gen.grams.empty()) return {0.0, true};
    if (orig.grams.empty() || gen.grams.empty()) return {1.0, false};
    std::size_t inter = 0;
    for (const auto& g : gen.grams) inter += orig.grams.count(g);
    const std::size_t uni = orig.grams.size() + gen.grams.size() - inter;
    return {static_cast<double>(uni - inter) / static_cast<double>(uni), false};
}

MetricRecord score_texts(const std::string& original, const std::string& generated,
                         const MeteorParams& params) {
    MetricRecord rec;
    try {
        rec.cosine.value = tfidf_cosine(original, generated);
    } catch (const Error& e) {
        rec.cosine.error = e.what();
    }
    try {
        rec.meteor.value = meteor(original, generated, params);
    } catch (const Error& e) {
        rec.meteor.error = e.what();
    }
    rec.entropy.value = shannon_entropy(generated);
    const auto u = fourgram_uniqueness(original, generated);
    rec.ngram_uniqueness.value = u.value;
    rec.ngram_degenerate_pair = u.degenerate;
    return rec;
}

MetricRecord score_pair(const corpus::AdConcept& original, const GenerationRecord& generated,
                        const MeteorParams& params) {
    if (generated.ad_id != original.id)
        throw Error(Errc::invalid_argument, "score_pair: record ad_id '" + generated.ad_id +
                                                "' does not reference ad '" + original.id + "'");
    MetricRecord rec = score_texts(original.text, generated.output_text, params);
    rec.ad_id = original.id;
    rec.model_id = generated.model_id;
    rec.phase = generated.phase;
    rec.level = generated.level;
    rec.run_index = generated.run_index;
    return rec;
}

MetricRecord score_identity(const corpus::AdConcept& ad, Phase phase, int run_index,
                            const MeteorParams& params) {
    MetricRecord rec = score_texts(ad.text, ad.text, params);
    rec.ad_id = ad.id;
    rec.model_id = "";
    rec.phase = phase;
    rec.level = Level::original;
    rec.run_index = run_index;
    return rec;
}

}  // namespace creastress::metrics
