#include "rulemt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "rulemt/errors.hpp"

namespace rulemt::metrics {

namespace {

void check_config(const MetricConfig& cfg) {
    if (cfg.bleu_max_order < 1) throw ConfigError("bleu_max_order must be >= 1");
    if (cfg.chrf_char_order < 1) throw ConfigError("chrf_char_order must be >= 1");
    if (cfg.chrf_word_order < 0) throw ConfigError("chrf_word_order must be >= 0");
    if (cfg.chrf_beta <= 0.0) throw ConfigError("chrf_beta must be > 0");
}

void check_lengths(std::size_t n_hyp, std::size_t n_ref) {
    if (n_hyp != n_ref)
        throw LengthMismatch("hypotheses (" + std::to_string(n_hyp) + ") and references (" +
                             std::to_string(n_ref) + ") differ in length");
}

// n-gram multiset keyed by the joined pieces; '\x1f' cannot occur in tokens.
std::map<std::string, long long> ngram_counts(const std::vector<std::string>& pieces,
                                              std::size_t n, char sep) {
    std::map<std::string, long long> counts;
    if (n == 0 || pieces.size() < n) return counts;
    for (std::size_t i = 0; i + n <= pieces.size(); ++i) {
        std::string key = pieces[i];
        for (std::size_t k = 1; k < n; ++k) {
            if (sep) key.push_back(sep);
            key += pieces[i + k];
        }
        ++counts[key];
    }
    return counts;
}

long long clipped_matches(const std::map<std::string, long long>& hyp,
                          const std::map<std::string, long long>& ref) {
    long long matched = 0;
    for (const auto& [gram, count] : hyp) {
        auto it = ref.find(gram);
        if (it != ref.end()) matched += std::min(count, it->second);
    }
    return matched;
}

}  // namespace

double bleu(const std::vector<std::string>& hypotheses,
            const std::vector<std::string>& references, const MetricConfig& cfg) {
    check_config(cfg);
    check_lengths(hypotheses.size(), references.size());

    const auto order = static_cast<std::size_t>(cfg.bleu_max_order);
    std::vector<long long> matched(order, 0);
    std::vector<long long> total(order, 0);
    long long hyp_len = 0;
    long long ref_len = 0;

    for (std::size_t i = 0; i < hypotheses.size(); ++i) {
        auto hyp = text::metric_tokens(hypotheses[i], cfg.tokenization);
        auto ref = text::metric_tokens(references[i], cfg.tokenization);
        if (ref.empty()) throw EmptyReference("reference " + std::to_string(i) + " is empty");
        hyp_len += static_cast<long long>(hyp.size());
        ref_len += static_cast<long long>(ref.size());
        for (std::size_t n = 1; n <= order; ++n) {
            if (hyp.size() < n) break;
            auto hyp_grams = ngram_counts(hyp, n, '\x1f');
            auto ref_grams = ngram_counts(ref, n, '\x1f');
            matched[n - 1] += clipped_matches(hyp_grams, ref_grams);
            total[n - 1] += static_cast<long long>(hyp.size() - n + 1);
        }
    }

    if (hyp_len == 0) return 0.0;

    double log_sum = 0.0;
    int effective_orders = 0;
    double smooth_inv = 1.0;
    for (std::size_t n = 0; n < order; ++n) {
        if (total[n] == 0) break;  // every hypothesis shorter than n+1 tokens
        double p;
        if (matched[n] > 0) {
            p = static_cast<double>(matched[n]) / static_cast<double>(total[n]);
        } else if (cfg.bleu_smoothing == BleuSmoothing::exp_floor) {
            smooth_inv *= 2.0;
            p = 1.0 / (smooth_inv * static_cast<double>(total[n]));
        } else {
            return 0.0;
        }
        log_sum += std::log(p);
        ++effective_orders;
    }
    if (effective_orders == 0) return 0.0;

    double bp = 1.0;
    if (cfg.bp && hyp_len <= ref_len)
        bp = std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));

    return 100.0 * bp * std::exp(log_sum / effective_orders);
}

namespace {

std::vector<std::string> char_pieces(const std::string& s) {
    std::vector<std::string> pieces;
    for (auto& ch : text::utf8_chars(s)) {
        if (ch == " " || ch == "\t" || ch == "\n" || ch == "\r" || ch == "　") continue;
        pieces.push_back(std::move(ch));
    }
    return pieces;
}

struct OrderTally {
    double precision_sum = 0.0;
    double recall_sum = 0.0;
    int orders = 0;

    void add(const std::vector<std::string>& hyp, const std::vector<std::string>& ref,
             std::size_t n, char sep) {
        auto hyp_grams = ngram_counts(hyp, n, sep);
        auto ref_grams = ngram_counts(ref, n, sep);
        long long hyp_total = 0;
        long long ref_total = 0;
        for (const auto& [_, c] : hyp_grams) hyp_total += c;
        for (const auto& [_, c] : ref_grams) ref_total += c;
        if (hyp_total == 0 && ref_total == 0) return;
        long long match = clipped_matches(hyp_grams, ref_grams);
        precision_sum +=
            hyp_total > 0 ? static_cast<double>(match) / static_cast<double>(hyp_total) : 0.0;
        recall_sum +=
            ref_total > 0 ? static_cast<double>(match) / static_cast<double>(ref_total) : 0.0;
        ++orders;
    }
};

double sentence_chrf(const std::string& hypothesis, const std::string& reference,
                     const MetricConfig& cfg) {
    auto hyp_chars = char_pieces(hypothesis);
    auto ref_chars = char_pieces(reference);
    auto hyp_words = text::latin_tokens(hypothesis);
    auto ref_words = text::latin_tokens(reference);

    OrderTally tally;
    for (int n = 1; n <= cfg.chrf_char_order; ++n)
        tally.add(hyp_chars, ref_chars, static_cast<std::size_t>(n), '\0');
    for (int n = 1; n <= cfg.chrf_word_order; ++n)
        tally.add(hyp_words, ref_words, static_cast<std::size_t>(n), '\x1f');
    if (tally.orders == 0) return 0.0;

    double precision = tally.precision_sum / tally.orders;
    double recall = tally.recall_sum / tally.orders;
    double beta_sq = cfg.chrf_beta * cfg.chrf_beta;
    double denom = beta_sq * precision + recall;
    if (denom == 0.0) return 0.0;
    return (1.0 + beta_sq) * precision * recall / denom;
}

}  // namespace

double chrf_pp(const std::vector<std::string>& hypotheses,
               const std::vector<std::string>& references, const MetricConfig& cfg) {
    check_config(cfg);
    check_lengths(hypotheses.size(), references.size());
    if (hypotheses.empty()) return 0.0;

    double sum = 0.0;
    for (std::size_t i = 0; i < hypotheses.size(); ++i) {
        if (char_pieces(references[i]).empty())
            throw EmptyReference("reference " + std::to_string(i) + " is empty");
        sum += sentence_chrf(hypotheses[i], references[i], cfg);
    }
    return 100.0 * sum / static_cast<double>(hypotheses.size());
}

int recall_at_k(const RetrievalJudgment& judgment, int k) {
    const auto& retrieved = judgment.retrieved_rule_ids;
    const auto limit = std::min<std::size_t>(retrieved.size(), k > 0 ? static_cast<std::size_t>(k) : 0);
    for (std::size_t i = 0; i < limit; ++i) {
        if (judgment.gold_rule_ids.count(retrieved[i])) return 1;
    }
    return 0;
}

double recall_at_k(const std::vector<RetrievalJudgment>& judgments, int k) {
    if (judgments.empty()) return 0.0;
    long long hits = 0;
    for (const auto& j : judgments) hits += recall_at_k(j, k);
    return static_cast<double>(hits) / static_cast<double>(judgments.size());
}

RetrievalSummary retrieval_recall_and_count(const std::vector<RetrievalJudgment>& judgments) {
    RetrievalSummary summary;
    if (judgments.empty()) return summary;
    long long covered = 0;
    long long retrieved_total = 0;
    for (const auto& j : judgments) {
        bool all = std::all_of(j.gold_rule_ids.begin(), j.gold_rule_ids.end(),
                               [&](const std::string& id) {
                                   return std::find(j.retrieved_rule_ids.begin(),
                                                    j.retrieved_rule_ids.end(),
                                                    id) != j.retrieved_rule_ids.end();
                               });
        if (all) ++covered;
        retrieved_total += static_cast<long long>(j.retrieved_rule_ids.size());
    }
    summary.recall = static_cast<double>(covered) / static_cast<double>(judgments.size());
    summary.avg_count =
        static_cast<double>(retrieved_total) / static_cast<double>(judgments.size());
    return summary;
}

}  // namespace rulemt::metrics
