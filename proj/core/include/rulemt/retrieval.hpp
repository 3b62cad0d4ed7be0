#pragma once

#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rulemt/corpus.hpp"
#include "rulemt/llm.hpp"

// The three retrieval strategies over a rulebook: BM25 ranking, Full-Book
// prompting (whole numbered book, ask which rules apply), and Rule-by-Rule
// prompting (one applicability classification per rule).
namespace rulemt::retrieval {

enum class Strategy { bm25, full_book, rule_by_rule };
enum class RuleFormat { text, code };
enum class DocScope { rule_text, rule_text_plus_examples };

std::string to_string(Strategy s);
std::string to_string(RuleFormat f);
Strategy strategy_from_string(std::string_view name);
RuleFormat rule_format_from_string(std::string_view name);

// Query/document tokenization: CJK codepoints pair into character bigrams
// (single char when a run has length 1), everything else whitespace-splits
// into lowercased words. Pure whitespace would make a CJK rule one token.
std::vector<std::string> bm25_tokens(std::string_view s);

struct Bm25Params {
    double k1 = 1.5;
    double b = 0.75;
};

class Bm25Index {
public:
    // docs: (id, text) pairs; ids must be unique.
    Bm25Index(std::vector<std::pair<std::string, std::string>> docs, Bm25Params params = {});

    // Top-k by Okapi score; ties break by id order; zero-score docs excluded.
    std::vector<std::pair<std::string, double>> query(std::string_view sentence, int k) const;

    std::size_t size() const { return docs_.size(); }
    double avgdl() const { return avgdl_; }
    const Bm25Params& params() const { return params_; }

private:
    struct Doc {
        std::string id;
        std::map<std::string, long long> tf;
        std::size_t len = 0;
    };

    std::vector<Doc> docs_;            // id order
    std::map<std::string, long long> df_;
    double avgdl_ = 0.0;
    Bm25Params params_;
};

// One document per rule. Throws EmptyBook.
Bm25Index bm25_build(const corpus::Rulebook& book, DocScope scope = DocScope::rule_text,
                     Bm25Params params = {});

struct RetrievalResult {
    std::string instance_id;
    Strategy strategy = Strategy::bm25;
    RuleFormat rule_format = RuleFormat::text;
    std::vector<std::string> retrieved;  // rule ids, duplicate-free
    std::string raw_llm_output;
    bool parse_failed = false;             // full_book reply yielded no ids
    bool partial = false;                  // rule_by_rule: some calls failed
    std::vector<std::string> dropped;      // unusable citations, for audit
    std::vector<std::string> flagged;      // rule ids with non-yes/no answers
};

nlohmann::json to_json(const RetrievalResult& result);
RetrievalResult retrieval_result_from_json(const nlohmann::json& j);

struct RetrievalOptions {
    RuleFormat rule_format = RuleFormat::text;
    engine::Direction direction = engine::Direction::lo_to_hi;
    bool include_lexicon = true;
    std::string model_id = "default";
    int context_budget = 8192;  // estimated tokens; full_book refuses beyond it
};

// Prompt = full numbered book + dictionary + test sentence; the reply's rule
// numbers (any integer token) and verbatim rule-text prefixes (>= 15
// codepoints) map back to ids. Unusable citations are dropped and recorded.
// Throws ContextOverflow.
RetrievalResult retrieve_full_book(const corpus::ParallelExample& instance,
                                   const corpus::Rulebook& book, const RetrievalOptions& options,
                                   llm::Client& client);

// One yes/no classification per rule, fanned out concurrently; retrieved
// keeps book order regardless of completion order. A reply whose first token
// is not in {是, 否, yes, no} counts as "no" and is flagged. Failed calls
// count as "no" and mark the result partial.
RetrievalResult retrieve_rule_by_rule(const corpus::ParallelExample& instance,
                                      const corpus::Rulebook& book,
                                      const RetrievalOptions& options, llm::Client& client);

// Sentence the strategies match against: the translation-source side.
const std::string& query_sentence(const corpus::ParallelExample& instance,
                                  engine::Direction direction);

}  // namespace rulemt::retrieval
