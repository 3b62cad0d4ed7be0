#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rulemt/corpus.hpp"
#include "rulemt/llm.hpp"
#include "rulemt/retrieval.hpp"
#include "rulemt/rulecraft.hpp"
#include "rulemt/ruleengine.hpp"

// Rule-application prompting: assembles the translation prompt for every
// experimental condition, combines code rules, and parses translations out
// of free-form replies.
namespace rulemt::translator {

enum class RuleMode { none, random_rule, gold };
std::string to_string(RuleMode mode);
RuleMode rule_mode_from_string(std::string_view name);

struct ApplicationConfig {
    RuleMode rule_mode = RuleMode::gold;
    retrieval::RuleFormat rule_format = retrieval::RuleFormat::text;
    int n_examples = 2;
    bool use_igt = false;
    bool use_lexicon = true;
    engine::Direction direction = engine::Direction::lo_to_hi;
    std::uint64_t seed = 0;
    std::string model_id = "default";
};

// IGT lines only gloss the low-resource side, so use_igt requires lo_to_hi.
// Throws IgtUnavailable or ConfigError.
void check_config(const ApplicationConfig& cfg);

struct PromptOverrides {
    std::vector<std::string> rule_ids;              // replaces rule_mode selection
    const rulecraft::CodeRule* combined = nullptr;  // replaces the rule block body
};

struct BuiltPrompt {
    llm::CompletionRequest request;
    std::vector<std::string> rule_ids_in_prompt;  // prompt order
    std::vector<std::string> example_ids;         // ICL examples used
    int n_irrelevant = 0;                         // rules in prompt outside the gold set
    bool insufficient_examples = false;           // pool smaller than n_examples
    std::string igt_source;                       // "book", "lexicon", "mixed", "" when unused
};

// Deterministic under (cfg.seed, instance.id). Sampled examples share a rule
// with the instance and never include the instance itself; random mode never
// samples a gold rule.
BuiltPrompt build_prompt(const corpus::ParallelExample& instance, const corpus::Rulebook& book,
                         const ApplicationConfig& cfg, const PromptOverrides& overrides = {});

enum class CombineStrategy { func_call, inline_template, inline_llm };
std::string to_string(CombineStrategy strategy);
CombineStrategy combine_strategy_from_string(std::string_view name);

// Merges two validated application-style code rules. inline_template is
// purely local: bodies concatenated in seed-parity order with locals
// suffixed _a/_b and the first body's returns rewritten as assignments.
// func_call and inline_llm issue one LLM call, validated with one retry.
rulecraft::CodeRule combine_code_rules(const rulecraft::CodeRule& a, const rulecraft::CodeRule& b,
                                       CombineStrategy strategy, llm::Client& client,
                                       std::uint64_t seed, const std::string& model_id = "default");

struct TranslationRecord {
    std::string instance_id;
    std::string prompt_digest;
    std::string raw_output;
    std::string extracted_translation;
    std::string extracted_igt;
    std::vector<std::string> rule_ids_in_prompt;
    std::vector<std::string> example_ids;
    bool insufficient_examples = false;
    bool empty_output = false;
    bool from_cache = false;
};

nlohmann::json to_json(const TranslationRecord& record);
TranslationRecord translation_record_from_json(const nlohmann::json& j);

// Answer extraction: last non-empty line after stripping label prefixes and
// surrounding quotes; with expect_igt the preceding line is the IGT. Returns
// {translation, igt}. Empty raw input yields empty fields, never throws.
std::pair<std::string, std::string> extract_answer(const std::string& raw, bool expect_igt);

TranslationRecord translate(const corpus::ParallelExample& instance, const corpus::Rulebook& book,
                            const ApplicationConfig& cfg, llm::Client& client,
                            const PromptOverrides& overrides = {});

}  // namespace rulemt::translator
