#include "gateway.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <set>
#include <sstream>
#include <string_view>
#include <thread>
#include <vector>

#include <httplib.h>

#include "error.hpp"
#include "text.hpp"
#include "types.hpp"

namespace creastress::gateway {

namespace {

using json = nlohmann::json;

// Prompt anchors (the factory's templates are the contract).
constexpr std::string_view kContractedTrailer = "\nContracted version:";
constexpr std::string_view kConceptAnchor = "\nOriginal ad concept: ";
constexpr std::string_view kLevelAnchor = "\nContraction level: ";
constexpr std::string_view kExpandedTrailer = "\nExpanded version:";
constexpr std::string_view kTargetAnchor = "Aim for approximately ";
constexpr std::string_view kInputAnchor = "\nInput:\n\"";
constexpr std::string_view kInputClose = "\"\nExpanded version:";
constexpr std::string_view kMarkersAnchor = "\nCreative Markers:\n";
constexpr std::string_view kVerdictTrailer = "\nVerdict:";
constexpr std::string_view kMarkerAnchor = "\nMarker:\n\"";
constexpr std::string_view kRewrittenAnchor = "\"\nRewritten text:\n\"";
constexpr std::string_view kVerdictClose = "\"\nVerdict:";
constexpr std::string_view kExtractTrailer = "\nMarkers:";
constexpr std::string_view kAdConceptAnchor = "\nAd concept:\n\"";
constexpr std::string_view kExtractClose = "\"\nMarkers:";
constexpr std::string_view kEmergentTrailer = "\nEmergent ideas:";
constexpr std::string_view kOriginalAnchor = "\nOriginal:\n\"";
constexpr std::string_view kExpansionAnchor = "\"\nExpansion:\n\"";
constexpr std::string_view kEmergentClose = "\"\nEmergent ideas:";

const std::vector<std::string> kFiller = {"vivid", "sparks",  "of",   "imagination",
                                          "carry", "the",     "brand", "story",
                                          "forward", "with",  "gleaming", "confidence"};

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::vector<std::string> ws_words(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        std::size_t j = i;
        while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
        if (j > i) out.emplace_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

std::string join_words(const std::vector<std::string>& words, std::size_t count) {
    std::string out;
    for (std::size_t i = 0; i < count && i < words.size(); ++i) {
        if (!out.empty()) out += ' ';
        out += words[i];
    }
    return out;
}

[[noreturn]] void bad_prompt(const std::string& why) {
    throw Error(Errc::protocol, "mock backend: " + why);
}

std::string_view between(std::string_view prompt, std::string_view open,
                         std::string_view close, const std::string& what) {
    const auto a = prompt.find(open);
    if (a == std::string_view::npos) bad_prompt("missing " + what + " opening anchor");
    const auto start = a + open.size();
    if (!ends_with(prompt, close)) bad_prompt("missing " + what + " closing anchor");
    const auto end = prompt.size() - close.size();
    if (end < start) bad_prompt("malformed " + what + " block");
    return prompt.substr(start, end - start);
}

std::string mock_contraction(std::string_view prompt) {
    const auto lvl_pos = prompt.find(kLevelAnchor);
    if (lvl_pos == std::string_view::npos) bad_prompt("missing contraction level line");
    const auto lvl_start = lvl_pos + kLevelAnchor.size();
    const auto lvl_end = prompt.find('\n', lvl_start);
    const auto lvl = prompt.substr(lvl_start, lvl_end - lvl_start);
    int pct = 0;
    if (lvl == "MILD") pct = 35;
    else if (lvl == "MODERATE") pct = 70;
    else if (lvl == "EXTREME") pct = 95;
    else bad_prompt("unknown contraction level '" + std::string(lvl) + "'");

    const auto concept_text = between(prompt, kConceptAnchor, kContractedTrailer, "concept");
    const auto words = ws_words(concept_text);
    if (words.empty()) bad_prompt("empty concept");
    // ceil((100-pct)·W / 100) in exact integer arithmetic
    const std::size_t keep =
        (static_cast<std::size_t>(100 - pct) * words.size() + 99) / 100;
    return join_words(words, keep);
}

std::string mock_expansion(std::string_view prompt) {
    const auto tgt_pos = prompt.find(kTargetAnchor);
    if (tgt_pos == std::string_view::npos) bad_prompt("missing word-target sentence");
    std::size_t p = tgt_pos + kTargetAnchor.size();
    std::size_t target = 0;
    bool any = false;
    while (p < prompt.size() && std::isdigit(static_cast<unsigned char>(prompt[p]))) {
        target = target * 10 + static_cast<std::size_t>(prompt[p] - '0');
        ++p;
        any = true;
    }
    if (!any) bad_prompt("unparseable word target");

    const auto input = between(prompt, kInputAnchor, kInputClose, "input");
    auto words = ws_words(input);
    if (words.empty()) bad_prompt("empty expansion input");
    std::size_t filler_at = 0;
    while (words.size() < target) {
        words.push_back(kFiller[filler_at % kFiller.size()]);
        ++filler_at;
    }
    std::string out = join_words(words, words.size());

    const auto mk_pos = prompt.find(kMarkersAnchor);
    if (mk_pos != std::string_view::npos) {
        auto block = prompt.substr(mk_pos + kMarkersAnchor.size());
        const auto end = block.find(kInputAnchor);
        if (end != std::string_view::npos) block = block.substr(0, end + 1);
        std::size_t start = 0;
        while (start < block.size()) {
            auto nl = block.find('\n', start);
            if (nl == std::string_view::npos) nl = block.size();
            const auto line = block.substr(start, nl - start);
            if (line.size() > 2 && line.substr(0, 2) == "- ") {
                out += ' ';
                out += std::string(line.substr(2));
            }
            start = nl + 1;
        }
    }
    return out;
}

std::string mock_judgment(std::string_view prompt) {
    const auto marker = between(prompt, kMarkerAnchor, kVerdictClose, "marker");
    const auto rw_pos = marker.find(kRewrittenAnchor);
    if (rw_pos == std::string_view::npos) bad_prompt("missing rewritten-text anchor");
    const auto marker_text = marker.substr(0, rw_pos);
    const auto body = marker.substr(rw_pos + kRewrittenAnchor.size());

    const auto needle = text::tokenize(marker_text);
    const auto hay = text::tokenize(body);
    const auto n = needle.size();
    if (n == 0) return "absent\nempty marker";

    bool contiguous = false;
    if (hay.size() >= n) {
        for (std::size_t i = 0; i + n <= hay.size() && !contiguous; ++i) {
            bool all = true;
            for (std::size_t k = 0; k < n; ++k)
                if (hay[i + k] != needle[k]) {
                    all = false;
                    break;
                }
            contiguous = all;
        }
    }
    std::size_t hits = 0;
    for (const auto& tok : needle)
        if (std::find(hay.begin(), hay.end(), tok) != hay.end()) ++hits;

    std::string verdict = "absent";
    if (contiguous) verdict = "present";
    else if (hits * 2 >= n) verdict = "partly";
    return verdict + "\ntoken overlap " + std::to_string(hits) + "/" + std::to_string(n);
}

std::string mock_extraction(std::string_view prompt) {
    const auto concept_text = between(prompt, kAdConceptAnchor, kExtractClose, "concept");
    const auto toks = text::tokenize(concept_text);
    const auto n = toks.size();
    if (n == 0) return "";
    const std::size_t k = n >= 8 ? 4 : (n >= 3 ? 3 : n);
    static const char* kCats[] = {"metaphorical", "emotional", "visual", "slogan_like",
                                  "brand_specific"};
    std::string out;
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t start = i * n / k;
        const std::size_t len = std::min<std::size_t>(3, n - start);
        std::string txt;
        for (std::size_t j = start; j < start + len; ++j) {
            if (!txt.empty()) txt += ' ';
            txt += toks[j];
        }
        if (!out.empty()) out += '\n';
        out += txt + " | " + kCats[i % 5];
    }
    return out;
}

std::string mock_emergent(std::string_view prompt) {
    const auto block = between(prompt, kOriginalAnchor, kEmergentClose, "original");
    const auto exp_pos = block.find(kExpansionAnchor);
    if (exp_pos == std::string_view::npos) bad_prompt("missing expansion anchor");
    const auto original = block.substr(0, exp_pos);
    const auto expansion = block.substr(exp_pos + kExpansionAnchor.size());

    const auto orig_toks = text::tokenize(original);
    const std::set<std::string> seen(orig_toks.begin(), orig_toks.end());
    const auto exp_toks = text::tokenize(expansion);

    static const char* kCats[] = {"metaphorical", "emotional", "visual", "slogan_like"};
    std::string out;
    std::size_t ideas = 0;
    std::size_t i = 0;
    while (i < exp_toks.size() && ideas < 3) {
        if (seen.count(exp_toks[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < exp_toks.size() && !seen.count(exp_toks[j])) ++j;
        std::string txt;
        for (std::size_t t = i; t < std::min(i + 4, j); ++t) {
            if (!txt.empty()) txt += ' ';
            txt += exp_toks[t];
        }
        if (!out.empty()) out += '\n';
        out += txt + " | " + kCats[ideas % 4];
        ++ideas;
        i = j;
    }
    if (ideas == 0) return "NONE";
    return out;
}

}  // namespace

AdmissionGate::AdmissionGate(int limit) : available_(limit) {
    if (limit < 1) throw Error(Errc::invalid_argument, "concurrency limit must be >= 1");
}

void AdmissionGate::acquire() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return available_ > 0; });
    --available_;
}

void AdmissionGate::release() {
    {
        std::lock_guard lock(mutex_);
        ++available_;
    }
    cv_.notify_one();
}

AdmissionGate::Pass::Pass(AdmissionGate& gate) : gate_(gate) { gate_.acquire(); }
AdmissionGate::Pass::~Pass() { gate_.release(); }

std::string MockBackend::transform(const std::string& prompt) {
    if (ends_with(prompt, kContractedTrailer)) return mock_contraction(prompt);
    if (ends_with(prompt, kExpandedTrailer)) return mock_expansion(prompt);
    if (ends_with(prompt, kVerdictTrailer)) return mock_judgment(prompt);
    if (ends_with(prompt, kEmergentTrailer)) return mock_emergent(prompt);
    if (ends_with(prompt, kExtractTrailer)) return mock_extraction(prompt);
    bad_prompt("unrecognized prompt shape");
}

ModelResponse MockBackend::complete(const PromptRequest& request) {
    if (request.prompt.empty())
        throw Error(Errc::invalid_argument, "empty prompt");
    if (request.temperature < 0)
        throw Error(Errc::invalid_argument, "negative temperature");
    ModelResponse resp;
    resp.text = transform(request.prompt);
    resp.latency_ms = 0.0;
    resp.attempt_count = 1;
    resp.provider_metadata = {{"backend", "mock"}};
    return resp;
}

HttpBackend::HttpBackend(std::string model_id, HttpBackendConfig config,
                         std::shared_ptr<AdmissionGate> gate)
    : model_id_(std::move(model_id)), config_(std::move(config)), gate_(std::move(gate)) {
    const char* key = config_.api_key_env.empty() ? nullptr
                                                  : std::getenv(config_.api_key_env.c_str());
    if (key == nullptr || *key == '\0')
        throw Error(Errc::credential, "environment variable " + config_.api_key_env +
                                          " is not set (required for model " + model_id_ + ")");
    api_key_ = key;
    rng_state_ = static_cast<std::uint64_t>(
                     std::chrono::steady_clock::now().time_since_epoch().count()) ^
                 reinterpret_cast<std::uintptr_t>(this);
    if (rng_state_ == 0) rng_state_ = 0x9e3779b97f4a7c15ull;
}

ModelResponse HttpBackend::complete(const PromptRequest& request) {
    if (request.prompt.empty()) throw Error(Errc::invalid_argument, "empty prompt");

    json body;
    body["model"] = config_.model;
    body["messages"] = json::array({{{"role", "user"}, {"content", request.prompt}}});
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_tokens;
    if (request.seed_hint >= 0) body["seed"] = request.seed_hint;
    const std::string payload = body.dump();

    std::string last_error;
    for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
        if (attempt > 1) {
            double delay = config_.retry.initial_delay_ms *
                           std::pow(config_.retry.multiplier, attempt - 2);
            {
                // xorshift64* jitter; cheap and lock-scoped
                std::lock_guard lock(rng_mutex_);
                rng_state_ ^= rng_state_ >> 12;
                rng_state_ ^= rng_state_ << 25;
                rng_state_ ^= rng_state_ >> 27;
                const double u =
                    static_cast<double>(rng_state_ * 0x2545f4914f6cdd1dull >> 11) /
                    static_cast<double>(1ull << 53);
                delay *= 1.0 + config_.retry.jitter * (2.0 * u - 1.0);
            }
            std::this_thread::sleep_for(
                std::chrono::milliseconds(static_cast<long long>(std::max(0.0, delay))));
        }

        const auto t0 = std::chrono::steady_clock::now();
        httplib::Result res;
        {
            std::optional<AdmissionGate::Pass> pass;
            if (gate_) pass.emplace(*gate_);
            httplib::Client client(config_.base_url);
            client.set_connection_timeout(std::chrono::duration<double>(config_.timeout_s));
            client.set_read_timeout(std::chrono::duration<double>(config_.timeout_s));
            client.set_write_timeout(std::chrono::duration<double>(config_.timeout_s));
            httplib::Headers headers;
            bool have_auth = false;
            for (const auto& [k, v] : config_.headers) {
                headers.emplace(k, v);
                std::string lower(k);
                std::transform(lower.begin(), lower.end(), lower.begin(),
                               [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
                if (lower == "authorization") have_auth = true;
            }
            if (!have_auth) headers.emplace("Authorization", "Bearer " + api_key_);
            res = client.Post(config_.path, headers, payload, "application/json");
        }
        const double ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - t0)
                              .count();

        if (!res) {
            last_error = "network error " + std::to_string(static_cast<int>(res.error()));
            continue;
        }
        const int status = res->status;
        if (status == 401 || status == 403)
            throw Error(Errc::credential, "authentication failed (HTTP " +
                                              std::to_string(status) + ") for model " +
                                              model_id_);
        if (status == 408 || status == 429 || status >= 500) {
            last_error = "HTTP " + std::to_string(status);
            continue;
        }
        if (status < 200 || status >= 300)
            throw Error(Errc::protocol, "unexpected HTTP " + std::to_string(status) +
                                            " from " + config_.base_url);

        const json reply = json::parse(res->body, nullptr, false);
        if (reply.is_discarded())
            throw Error(Errc::protocol, "response body is not JSON");
        const auto choices = reply.find("choices");
        if (choices == reply.end() || !choices->is_array() || choices->empty())
            throw Error(Errc::protocol, "response has no choices");
        const auto& first = (*choices)[0];
        if (!first.contains("message") || !first["message"].contains("content") ||
            !first["message"]["content"].is_string())
            throw Error(Errc::protocol, "response missing choices[0].message.content");

        ModelResponse out;
        out.text = first["message"]["content"].get<std::string>();
        out.latency_ms = ms;
        out.attempt_count = attempt;
        out.provider_metadata["backend"] = "http";
        out.provider_metadata["status"] = std::to_string(status);
        if (reply.contains("model") && reply["model"].is_string())
            out.provider_metadata["response_model"] = reply["model"].get<std::string>();
        if (reply.contains("usage") && reply["usage"].is_object() &&
            reply["usage"].contains("total_tokens") &&
            reply["usage"]["total_tokens"].is_number())
            out.provider_metadata["total_tokens"] =
                std::to_string(reply["usage"]["total_tokens"].get<long long>());
        return out;
    }
    throw Error(Errc::transport, "model " + model_id_ + " unreachable after " +
                                     std::to_string(config_.retry.max_attempts) +
                                     " attempts; last error: " + last_error);
}

std::shared_ptr<Backend> make_backend(const std::string& model_id,
                                      const nlohmann::json& models_config,
                                      std::shared_ptr<AdmissionGate> gate) {
    if (model_id.rfind("mock", 0) == 0) return std::make_shared<MockBackend>();

    HttpBackendConfig cfg;
    cfg.base_url = "https://api.openai.com";
    cfg.model = model_id;
    cfg.api_key_env = "OPENAI_API_KEY";

    if (models_config.is_object()) {
        const auto it = models_config.find(model_id);
        if (it != models_config.end()) {
            if (!it->is_object())
                throw Error(Errc::parse, "model config for '" + model_id +
                                             "' must be an object");
            const auto& m = *it;
            auto str = [&](const char* key, std::string& into) {
                if (m.contains(key)) into = m.at(key).get<std::string>();
            };
            str("base_url", cfg.base_url);
            str("path", cfg.path);
            str("model", cfg.model);
            str("api_key_env", cfg.api_key_env);
            if (m.contains("timeout_s")) cfg.timeout_s = m.at("timeout_s").get<double>();
            if (m.contains("headers"))
                cfg.headers = m.at("headers").get<std::map<std::string, std::string>>();
            if (m.contains("retry")) {
                const auto& r = m.at("retry");
                if (r.contains("max_attempts"))
                    cfg.retry.max_attempts = r.at("max_attempts").get<int>();
                if (r.contains("initial_delay_ms"))
                    cfg.retry.initial_delay_ms = r.at("initial_delay_ms").get<double>();
                if (r.contains("multiplier"))
                    cfg.retry.multiplier = r.at("multiplier").get<double>();
                if (r.contains("jitter")) cfg.retry.jitter = r.at("jitter").get<double>();
            }
        }
    }
    return std::make_shared<HttpBackend>(model_id, std::move(cfg), std::move(gate));
}

}  // namespace creastress::gateway
