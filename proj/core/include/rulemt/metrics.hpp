#pragma once

#include <set>
#include <string>
#include <vector>

#include "rulemt/text.hpp"

// Corpus scorers (BLEU, chrF++) and retrieval quality metrics. Scores live in
// [0, 100]; an identity corpus scores exactly 100. All functions are pure.
namespace rulemt::metrics {

enum class BleuSmoothing { none, exp_floor };

struct MetricConfig {
    int bleu_max_order = 4;
    BleuSmoothing bleu_smoothing = BleuSmoothing::exp_floor;
    bool bp = true;  // brevity penalty
    int chrf_char_order = 6;
    int chrf_word_order = 2;
    double chrf_beta = 2.0;
    text::Tokenization tokenization = text::Tokenization::whitespace;
};

// Corpus BLEU: BP * exp(mean of ln p_n) over clipped n-gram precisions
// aggregated across the corpus. Orders with no hypothesis n-grams at all drop
// out of the mean; with exp_floor smoothing a zero-match order n contributes
// 1 / (2^k * total_n) where k counts zero-match orders so far.
// Throws LengthMismatch and EmptyReference.
double bleu(const std::vector<std::string>& hypotheses,
            const std::vector<std::string>& references, const MetricConfig& cfg = {});

// chrF++: per sentence, precision and recall of character n-grams (orders
// 1..chrf_char_order, whitespace removed) and word n-grams (orders
// 1..chrf_word_order, punctuation split off) are averaged across orders, then
// combined as F_beta. Orders where neither side has n-grams are skipped. The
// corpus score is the mean of sentence scores.
double chrf_pp(const std::vector<std::string>& hypotheses,
               const std::vector<std::string>& references, const MetricConfig& cfg = {});

struct RetrievalJudgment {
    std::set<std::string> gold_rule_ids;
    std::vector<std::string> retrieved_rule_ids;  // ranked, no duplicates
};

// 1 iff some gold rule appears in the first k retrieved.
int recall_at_k(const RetrievalJudgment& judgment, int k);
double recall_at_k(const std::vector<RetrievalJudgment>& judgments, int k);

struct RetrievalSummary {
    double recall = 0.0;     // fraction of judgments with gold set fully retrieved
    double avg_count = 0.0;  // mean number of retrieved rules
};

RetrievalSummary retrieval_recall_and_count(const std::vector<RetrievalJudgment>& judgments);

}  // namespace rulemt::metrics
