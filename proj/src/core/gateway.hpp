#pragma once

#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include <nlohmann/json.hpp>

namespace creastress::gateway {

struct PromptRequest {
    std::string model_id;
    std::string prompt;
    double temperature = 0.7;
    int max_tokens = 1024;
    std::int64_t seed_hint = -1;  // -1 = unset; forwarded when the provider accepts one
};

struct ModelResponse {
    std::string text;
    double latency_ms = 0.0;
    std::map<std::string, std::string> provider_metadata;
    int attempt_count = 1;
};

class Backend {
public:
    virtual ~Backend() = default;

    // Returns the completion text verbatim. Throws Errc::transport when
    // retries are exhausted, Errc::credential on auth failure (never
    // retried), Errc::protocol on an unusable response body.
    virtual ModelResponse complete(const PromptRequest& request) = 0;

    virtual std::string name() const = 0;
};

// Caps in-flight remote calls; shareable across workers and backends.
class AdmissionGate {
public:
    explicit AdmissionGate(int limit);

    class Pass {
    public:
        explicit Pass(AdmissionGate& gate);
        ~Pass();
        Pass(const Pass&) = delete;
        Pass& operator=(const Pass&) = delete;

    private:
        AdmissionGate& gate_;
    };

private:
    void acquire();
    void release();

    std::mutex mutex_;
    std::condition_variable cv_;
    int available_;
};

// Deterministic offline stand-in. Recognizes each prompt shape the factory
// produces and applies a fixed transformation, so whole-pipeline behavior is
// byte-stable across processes and platforms:
//   contraction  -> first ceil((1-r)·W) whitespace words of the embedded
//                   concept, r in {0.35, 0.70, 0.95}
//   expansion    -> input padded to the embedded word target with a fixed
//                   filler cycle, then any embedded markers appended verbatim
//   extraction   -> evenly spaced three-token windows with cycling categories
//   judgment     -> present iff the marker's token sequence occurs
//                   contiguously, partly iff at least half its tokens occur
//   emergent     -> windows over expansion tokens absent from the original
class MockBackend : public Backend {
public:
    ModelResponse complete(const PromptRequest& request) override;
    std::string name() const override { return "mock"; }

    // The transformation itself; throws Errc::protocol on an unrecognized
    // prompt shape.
    static std::string transform(const std::string& prompt);
};

struct RetryPolicy {
    int max_attempts = 4;
    double initial_delay_ms = 1000.0;
    double multiplier = 2.0;
    double jitter = 0.25;  // uniform ±fraction applied to each delay
};

struct HttpBackendConfig {
    std::string base_url;  // scheme://host[:port]
    std::string path = "/v1/chat/completions";
    std::string model;        // provider-side model name
    std::string api_key_env;  // environment variable holding the key
    std::map<std::string, std::string> headers;
    RetryPolicy retry;
    double timeout_s = 120.0;
};

// OpenAI-style chat-completions client. Retries transient failures (network
// errors, 408/429/5xx) per RetryPolicy; 401/403 raise Errc::credential
// immediately; anything else unusable raises Errc::protocol.
class HttpBackend : public Backend {
public:
    // Reads the API key from config.api_key_env; throws Errc::credential when
    // the variable is missing or empty.
    HttpBackend(std::string model_id, HttpBackendConfig config,
                std::shared_ptr<AdmissionGate> gate = nullptr);

    ModelResponse complete(const PromptRequest& request) override;
    std::string name() const override { return model_id_; }

private:
    std::string model_id_;
    HttpBackendConfig config_;
    std::string api_key_;
    std::shared_ptr<AdmissionGate> gate_;
    std::mutex rng_mutex_;
    std::uint64_t rng_state_;
};

// Builds the backend for a model id. Ids equal to "mock" or starting with
// "mock" get the deterministic mock. Others are looked up in models_config
// (object keyed by model id, values shaped like HttpBackendConfig); absent
// entries default to the OpenAI endpoint with OPENAI_API_KEY.
std::shared_ptr<Backend> make_backend(const std::string& model_id,
                                      const nlohmann::json& models_config,
                                      std::shared_ptr<AdmissionGate> gate = nullptr);

}  // namespace creastress::gateway
