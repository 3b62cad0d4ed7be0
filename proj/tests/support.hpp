#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include "rulemt/corpus.hpp"
#include "rulemt/llm.hpp"

namespace testsupport {

inline std::filesystem::path fixture_dir(const std::string& name) {
    return std::filesystem::path(RULEMT_FIXTURE_DIR) / name;
}

inline rulemt::corpus::Rulebook demo_book() {
    return rulemt::corpus::load_rulebook(fixture_dir("zhuang_demo"));
}

inline rulemt::corpus::Rulebook tiny_book() {
    return rulemt::corpus::load_rulebook(fixture_dir("tiny"));
}

// Fresh directory under the system temp root, removed by the caller when it
// cares; unique per call so parallel test runs never collide.
inline std::filesystem::path temp_dir(const std::string& stem) {
    static std::atomic<unsigned> counter{0};
    std::random_device rd;
    std::ostringstream name;
    name << "rulemt-" << stem << "-" << std::hex << rd() << "-" << counter.fetch_add(1);
    auto dir = std::filesystem::temp_directory_path() / name.str();
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

// Backend that counts invocations and can stall to widen race windows.
class CountingBackend : public rulemt::llm::Backend {
public:
    explicit CountingBackend(std::string reply = "ok", int delay_ms = 0)
        : reply_(std::move(reply)), delay_ms_(delay_ms) {}

    std::string name() const override { return "counting"; }

    std::string complete(const rulemt::llm::CompletionRequest& req) override {
        int now = inflight_.fetch_add(1) + 1;
        int seen = max_inflight_.load();
        while (now > seen && !max_inflight_.compare_exchange_weak(seen, now)) {
        }
        if (delay_ms_ > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms_));
        calls_.fetch_add(1);
        inflight_.fetch_sub(1);
        return reply_ + ":" + rulemt::llm::cache_digest(req).substr(0, 8);
    }

    int calls() const { return calls_.load(); }
    int max_inflight() const { return max_inflight_.load(); }

private:
    std::string reply_;
    int delay_ms_;
    std::atomic<int> calls_{0};
    std::atomic<int> inflight_{0};
    std::atomic<int> max_inflight_{0};
};

// Backend whose replies come from a caller-supplied function of the request.
class InlineBackend : public rulemt::llm::Backend {
public:
    using Fn = std::function<std::string(const rulemt::llm::CompletionRequest&)>;

    explicit InlineBackend(Fn fn) : fn_(std::move(fn)) {}
    explicit InlineBackend(std::string fixed)
        : fn_([reply = std::move(fixed)](const rulemt::llm::CompletionRequest&) {
              return reply;
          }) {}

    std::string name() const override { return "inline"; }
    std::string complete(const rulemt::llm::CompletionRequest& req) override { return fn_(req); }

private:
    Fn fn_;
};

// Client over an InlineBackend with caching off: pure function of the request.
inline rulemt::llm::Client inline_client(InlineBackend::Fn fn, int concurrency = 4) {
    rulemt::llm::ClientConfig cfg;
    cfg.use_cache = false;
    cfg.concurrency = concurrency;
    return rulemt::llm::Client(std::make_shared<InlineBackend>(std::move(fn)), cfg);
}

}  // namespace testsupport
