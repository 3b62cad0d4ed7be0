#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

// Provider-agnostic chat-completion access with a persistent response cache.
// Every request routes through Client, which consults the cache, deduplicates
// concurrent identical requests (single-flight), and bounds in-flight backend
// calls. Offline backends (replay, oracle mock) make every experiment
// runnable without network.
namespace rulemt::llm {

struct Message {
    std::string role;
    std::string content;
};

struct CompletionRequest {
    std::string model_id;
    std::vector<Message> messages;
    double temperature = 0.0;  // greedy by default
    int max_tokens = 1024;
    std::optional<std::vector<std::string>> stop;
    // Routing hints for offline backends (instance ids, task names). Not part
    // of the cache key: two requests with equal prompts share one cache entry.
    std::map<std::string, std::string> tags;
};

std::string sha256_hex(std::string_view data);

// Canonical form hashed into the cache key: model_id, temperature, messages,
// max_tokens, stop; fixed key order, whitespace preserved.
nlohmann::json canonical_json(const CompletionRequest& req);
std::string cache_digest(const CompletionRequest& req);

struct CompletionMeta {
    long long prompt_tokens = 0;
    long long completion_tokens = 0;
    double latency_ms = 0.0;
    bool from_cache = false;
    std::string backend;
};

struct CompletionResult {
    std::string text;
    CompletionMeta meta;
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string name() const = 0;
    virtual std::string complete(const CompletionRequest& req) = 0;
};

struct HttpConfig {
    std::string endpoint_url = "http://127.0.0.1:8080/v1/chat/completions";
    std::string api_key_env = "RULEMT_API_KEY";
    int retry_max = 3;
    double timeout_s = 60.0;
};

// POSTs the ubiquitous chat-completion JSON shape. Transient failures
// (connect errors, 408/429/5xx) retry with exponential backoff up to
// retry_max times; 401/403 raise AuthError immediately.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpConfig cfg);
    std::string name() const override { return "http"; }
    std::string complete(const CompletionRequest& req) override;

private:
    HttpConfig cfg_;
};

// Serves exclusively from the cache: the Client answers hits before the
// backend is consulted, so reaching complete() means a miss. Strict mode
// raises CacheMiss naming the digest; lax mode returns an empty completion.
class ReplayBackend : public Backend {
public:
    explicit ReplayBackend(bool strict = true) : strict_(strict) {}
    std::string name() const override { return "replay"; }
    std::string complete(const CompletionRequest& req) override;

private:
    bool strict_;
};

struct ClientConfig {
    std::filesystem::path cache_dir = "cache";
    int concurrency = 8;  // max in-flight backend calls
    bool use_cache = true;
};

// Thread-safe front end: cache lookup, single-flight dedup, bounded
// concurrency, append-only JSONL cache persistence per model
// (cache/{model_id}/responses.jsonl).
class Client {
public:
    explicit Client(std::shared_ptr<Backend> backend, ClientConfig cfg = {});

    CompletionResult complete(const CompletionRequest& req);

    // Backend invocations so far; cache hits and deduplicated waits excluded.
    long long backend_calls() const { return backend_calls_.load(); }
    const ClientConfig& config() const { return cfg_; }
    const std::filesystem::path& cache_dir() const { return cfg_.cache_dir; }
    Backend& backend() { return *backend_; }

private:
    struct Shard {
        std::mutex mu;
        bool loaded = false;
        std::map<std::string, std::string> by_digest;
    };

    Shard& shard_for(const std::string& model_id);
    std::optional<std::string> cache_lookup(const CompletionRequest& req,
                                            const std::string& digest);
    void cache_store(const CompletionRequest& req, const std::string& digest,
                     const std::string& text);

    std::shared_ptr<Backend> backend_;
    ClientConfig cfg_;
    std::atomic<long long> backend_calls_{0};

    std::mutex shards_mu_;
    std::map<std::string, std::unique_ptr<Shard>> shards_;

    std::mutex inflight_mu_;
    std::map<std::string, std::shared_future<std::string>> inflight_;

    std::mutex slots_mu_;
    std::condition_variable slots_cv_;
    int slots_in_use_ = 0;
};

// Directory-safe rendering of a model id ('/' and friends become '_').
std::string sanitize_model_dir(std::string_view model_id);

// Runs fn(0..n-1) on up to `threads` workers and rethrows the first worker
// exception after joining. Callers keep result slots indexed by i, so output
// order is independent of completion order.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace rulemt::llm
