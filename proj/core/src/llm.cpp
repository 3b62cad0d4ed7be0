#include "rulemt/llm.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>

#include <openssl/evp.h>

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include "rulemt/errors.hpp"
#include "rulemt/text.hpp"

namespace rulemt::llm {

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

nlohmann::json canonical_json(const CompletionRequest& req) {
    nlohmann::json messages = nlohmann::json::array();
    for (const auto& m : req.messages)
        messages.push_back({{"content", m.content}, {"role", m.role}});
    nlohmann::json j;
    j["max_tokens"] = req.max_tokens;
    j["messages"] = messages;
    j["model_id"] = req.model_id;
    j["stop"] = req.stop ? nlohmann::json(*req.stop) : nlohmann::json(nullptr);
    j["temperature"] = req.temperature;
    return j;
}

std::string cache_digest(const CompletionRequest& req) {
    return sha256_hex(canonical_json(req).dump());
}

std::string sanitize_model_dir(std::string_view model_id) {
    std::string out;
    out.reserve(model_id.size());
    for (char c : model_id) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                  c == '_' || c == '.' || c == '-';
        out.push_back(ok ? c : '_');
    }
    return out.empty() ? "model" : out;
}

// -- HttpBackend ---------------------------------------------------------

HttpBackend::HttpBackend(HttpConfig cfg) : cfg_(std::move(cfg)) {}

namespace {

struct ParsedUrl {
    std::string base;  // scheme://host[:port]
    std::string path;
};

ParsedUrl parse_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint_url needs a scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/v1/chat/completions"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

bool retryable_status(int status) {
    return status == 408 || status == 429 || status >= 500;
}

}  // namespace

std::string HttpBackend::complete(const CompletionRequest& req) {
    const auto url = parse_url(cfg_.endpoint_url);

    nlohmann::json body;
    body["model"] = req.model_id;
    nlohmann::json messages = nlohmann::json::array();
    for (const auto& m : req.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    body["messages"] = messages;
    body["temperature"] = req.temperature;
    body["max_tokens"] = req.max_tokens;
    if (req.stop) body["stop"] = *req.stop;
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key)
        headers.emplace("Authorization", std::string("Bearer ") + key);

    std::string last_error = "no attempts made";
    for (int attempt = 0; attempt <= cfg_.retry_max; ++attempt) {
        if (attempt > 0) {
            auto backoff = std::chrono::milliseconds(
                static_cast<long long>(500.0 * static_cast<double>(1LL << (attempt - 1))));
            std::this_thread::sleep_for(backoff);
        }
        httplib::Client cli(url.base);
        cli.set_connection_timeout(std::chrono::duration<double>(cfg_.timeout_s));
        cli.set_read_timeout(std::chrono::duration<double>(cfg_.timeout_s));
        auto res = cli.Post(url.path, headers, payload, "application/json");
        if (!res) {
            last_error = "connection failed: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 401 || res->status == 403)
            throw AuthError("endpoint returned " + std::to_string(res->status));
        if (retryable_status(res->status)) {
            last_error = "status " + std::to_string(res->status);
            continue;
        }
        if (res->status < 200 || res->status >= 300)
            throw TransportError("endpoint returned status " + std::to_string(res->status) +
                                 ": " + res->body.substr(0, 200));
        try {
            auto j = nlohmann::json::parse(res->body);
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw TransportError(std::string("malformed completion response: ") + e.what());
        }
    }
    throw TransportError("request failed after " + std::to_string(cfg_.retry_max + 1) +
                         " attempts: " + last_error);
}

// -- ReplayBackend ---------------------------------------------------------

std::string ReplayBackend::complete(const CompletionRequest& req) {
    if (strict_) throw CacheMiss("no cached response for digest " + cache_digest(req));
    return "";
}

// -- Client ----------------------------------------------------------------

Client::Client(std::shared_ptr<Backend> backend, ClientConfig cfg)
    : backend_(std::move(backend)), cfg_(std::move(cfg)) {
    if (!backend_) throw ConfigError("client needs a backend");
    if (cfg_.concurrency < 1) throw ConfigError("concurrency must be >= 1");
}

Client::Shard& Client::shard_for(const std::string& model_id) {
    std::lock_guard lock(shards_mu_);
    auto& slot = shards_[sanitize_model_dir(model_id)];
    if (!slot) slot = std::make_unique<Shard>();
    return *slot;
}

namespace {

std::filesystem::path shard_path(const std::filesystem::path& cache_dir,
                                 const std::string& model_id) {
    return cache_dir / sanitize_model_dir(model_id) / "responses.jsonl";
}

}  // namespace

std::optional<std::string> Client::cache_lookup(const CompletionRequest& req,
                                                const std::string& digest) {
    if (!cfg_.use_cache) return std::nullopt;
    auto& shard = shard_for(req.model_id);
    std::lock_guard lock(shard.mu);
    if (!shard.loaded) {
        // Corrupt lines are skipped: appends are atomic per record, so a torn
        // tail line only loses that record.
        std::ifstream in(shard_path(cfg_.cache_dir, req.model_id));
        std::string line;
        while (in && std::getline(in, line)) {
            if (line.empty()) continue;
            try {
                auto j = nlohmann::json::parse(line);
                shard.by_digest[j.at("digest").get<std::string>()] =
                    j.at("text").get<std::string>();
            } catch (const nlohmann::json::exception&) {
                continue;
            }
        }
        shard.loaded = true;
    }
    auto it = shard.by_digest.find(digest);
    if (it == shard.by_digest.end()) return std::nullopt;
    return it->second;
}

void Client::cache_store(const CompletionRequest& req, const std::string& digest,
                         const std::string& text) {
    if (!cfg_.use_cache) return;
    auto& shard = shard_for(req.model_id);
    std::lock_guard lock(shard.mu);
    shard.by_digest[digest] = text;
    auto path = shard_path(cfg_.cache_dir, req.model_id);
    std::filesystem::create_directories(path.parent_path());
    nlohmann::json record;
    record["digest"] = digest;
    record["request"] = canonical_json(req);
    record["text"] = text;
    std::ofstream out(path, std::ios::app);
    out << record.dump() << "\n";
    out.flush();
}

CompletionResult Client::complete(const CompletionRequest& req) {
    if (req.messages.empty()) throw ConfigError("completion request has no messages");
    if (req.temperature < 0.0) throw ConfigError("temperature must be >= 0");

    long long prompt_tokens = 0;
    for (const auto& m : req.messages)
        prompt_tokens += static_cast<long long>(text::estimate_tokens(m.content));

    const std::string digest = cache_digest(req);
    if (auto hit = cache_lookup(req, digest)) {
        CompletionResult result;
        result.text = *hit;
        result.meta.prompt_tokens = prompt_tokens;
        result.meta.completion_tokens = static_cast<long long>(text::estimate_tokens(result.text));
        result.meta.from_cache = true;
        result.meta.backend = backend_->name();
        return result;
    }

    std::shared_future<std::string> future;
    std::promise<std::string> promise;
    bool leader = false;
    {
        std::lock_guard lock(inflight_mu_);
        auto it = inflight_.find(digest);
        if (it != inflight_.end()) {
            future = it->second;
        } else {
            future = promise.get_future().share();
            inflight_.emplace(digest, future);
            leader = true;
        }
    }

    if (!leader) {
        CompletionResult result;
        result.text = future.get();  // rethrows the leader's failure
        result.meta.prompt_tokens = prompt_tokens;
        result.meta.completion_tokens = static_cast<long long>(text::estimate_tokens(result.text));
        result.meta.from_cache = true;
        result.meta.backend = backend_->name();
        return result;
    }

    auto release = [&] {
        std::lock_guard lock(inflight_mu_);
        inflight_.erase(digest);
    };

    try {
        {
            std::unique_lock lock(slots_mu_);
            slots_cv_.wait(lock, [&] { return slots_in_use_ < cfg_.concurrency; });
            ++slots_in_use_;
        }
        auto t0 = std::chrono::steady_clock::now();
        std::string text;
        try {
            backend_calls_.fetch_add(1);
            text = backend_->complete(req);
        } catch (...) {
            std::lock_guard lock(slots_mu_);
            --slots_in_use_;
            slots_cv_.notify_one();
            throw;
        }
        double latency_ms = std::chrono::duration<double, std::milli>(
                                std::chrono::steady_clock::now() - t0)
                                .count();
        {
            std::lock_guard lock(slots_mu_);
            --slots_in_use_;
            slots_cv_.notify_one();
        }
        cache_store(req, digest, text);
        promise.set_value(text);
        release();

        CompletionResult result;
        result.text = std::move(text);
        result.meta.prompt_tokens = prompt_tokens;
        result.meta.completion_tokens = static_cast<long long>(text::estimate_tokens(result.text));
        result.meta.latency_ms = latency_ms;
        result.meta.from_cache = false;
        result.meta.backend = backend_->name();
        return result;
    } catch (...) {
        promise.set_exception(std::current_exception());
        release();
        throw;
    }
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    auto workers = static_cast<std::size_t>(std::max(threads, 1));
    workers = std::min(workers, n);
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr first_error;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(err_mu);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace rulemt::llm
