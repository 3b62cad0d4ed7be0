#include <benchmark/benchmark.h>

#include <algorithm>
#include <string>
#include <vector>

#include "rulemt/corpus.hpp"
#include "rulemt/metrics.hpp"
#include "rulemt/mock_backend.hpp"
#include "rulemt/retrieval.hpp"
#include "rulemt/translator.hpp"

using namespace rulemt;

namespace {

const corpus::Rulebook& book() {
    static const corpus::Rulebook instance =
        corpus::load_rulebook(std::filesystem::path(RULEMT_FIXTURE_DIR) / "zhuang_demo");
    return instance;
}

// Identity corpus with every other hypothesis token-reversed, so the metric
// loops see both matching and non-matching n-grams.
std::pair<std::vector<std::string>, std::vector<std::string>> scoring_corpus() {
    std::vector<std::string> hyps, refs;
    for (std::size_t i = 0; i < book().examples.size(); ++i) {
        refs.push_back(book().examples[i].target_text);
        if (i % 2 == 0) {
            hyps.push_back(refs.back());
        } else {
            auto tokens = text::whitespace_tokens(refs.back());
            std::reverse(tokens.begin(), tokens.end());
            std::string joined;
            for (const auto& token : tokens) {
                if (!joined.empty()) joined += ' ';
                joined += token;
            }
            hyps.push_back(joined);
        }
    }
    return {hyps, refs};
}

void BM_Bm25Build(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(retrieval::bm25_build(book()));
}
BENCHMARK(BM_Bm25Build);

void BM_Bm25Query(benchmark::State& state) {
    auto index = retrieval::bm25_build(book());
    for (auto _ : state) benchmark::DoNotOptimize(index.query("他不去看书吗", 5));
}
BENCHMARK(BM_Bm25Query);

void BM_CorpusBleu(benchmark::State& state) {
    auto [hyps, refs] = scoring_corpus();
    metrics::MetricConfig cfg;
    cfg.tokenization = text::Tokenization::whitespace;
    for (auto _ : state) benchmark::DoNotOptimize(metrics::bleu(hyps, refs, cfg));
}
BENCHMARK(BM_CorpusBleu);

void BM_CorpusChrf(benchmark::State& state) {
    auto [hyps, refs] = scoring_corpus();
    metrics::MetricConfig cfg;
    cfg.tokenization = text::Tokenization::whitespace;
    for (auto _ : state) benchmark::DoNotOptimize(metrics::chrf_pp(hyps, refs, cfg));
}
BENCHMARK(BM_CorpusChrf);

void BM_OracleTranslation(benchmark::State& state) {
    for (auto _ : state) {
        for (const auto& example : book().examples)
            benchmark::DoNotOptimize(
                llm::oracle_translation(example, book(), engine::Direction::hi_to_lo));
    }
}
BENCHMARK(BM_OracleTranslation);

void BM_BuildPrompt(benchmark::State& state) {
    translator::ApplicationConfig cfg;
    cfg.direction = engine::Direction::hi_to_lo;
    const auto& instance = *book().find_example("e009");
    for (auto _ : state)
        benchmark::DoNotOptimize(translator::build_prompt(instance, book(), cfg, {}));
}
BENCHMARK(BM_BuildPrompt);

}  // namespace

BENCHMARK_MAIN();
