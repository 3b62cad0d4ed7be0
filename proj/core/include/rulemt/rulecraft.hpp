#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "rulemt/code_rule.hpp"
#include "rulemt/corpus.hpp"
#include "rulemt/llm.hpp"

// LLM-assisted rule transformation: text -> code conversion in two styles,
// structural validation of generated code, IGT generation, and rule
// induction from parallel examples. Generated pseudo-code is never executed;
// validation is purely structural.
namespace rulemt::rulecraft {

enum class Violation {
    NoFunction,
    MultipleFunctions,
    WrongParameters,
    StyleReturnMismatch,
    MissingRuleText,
    UnbalancedDelimiters,
    ForbiddenStatement
};

std::string to_string(Violation v);

// Structural checks: exactly one top-level function with the canonical
// parameters, style-consistent returns (retrieval_check returns booleans,
// application returns a sentence), balanced brackets outside string literals,
// no import/IO. Each expected text must appear verbatim in the comment block.
std::vector<Violation> validate_code_rule(const CodeRule& code,
                                          const std::vector<std::string>& expected_texts = {});

// Splits raw LLM output into comment block + function body; markdown fences
// and prose outside the comment/def region are discarded. Throws
// GenerationInvalid when no function definition is found.
CodeRule parse_code_rule(const std::string& raw, CodeRule::Style style);

struct ConversionExemplar {
    std::string rule_text;
    std::string code;
};

struct IgtShot {
    std::string sentence;
    corpus::Igt igt;
};

struct InductionShot {
    std::vector<std::pair<std::string, std::string>> pairs;  // (source, target)
    std::string rule_text;
};

struct Exemplars {
    std::vector<ConversionExemplar> conversion_application;
    std::vector<ConversionExemplar> conversion_retrieval;
    std::vector<IgtShot> igt;
    std::vector<InductionShot> induction;
};

Exemplars load_exemplars(const std::filesystem::path& path);

// Few-shot text -> code conversion. The result always passes
// validate_code_rule: an invalid generation is retried once with the
// violations appended to the prompt, then GenerationInvalid.
CodeRule convert_rule(const corpus::GrammarRule& rule, CodeRule::Style style,
                      llm::Client& client, const std::vector<ConversionExemplar>& exemplars,
                      const std::string& model_id = "default");

struct IgtResult {
    corpus::Igt igt;
    std::vector<std::string> unknown_symbols;  // glosses outside the inventory
};

// Generates an aligned IGT for a low-resource-side sentence. A misaligned
// reply is re-prompted once with the token counts spelled out, then
// AlignmentError. instance_id, when known, lets offline backends resolve the
// gold annotation.
IgtResult generate_igt(const std::string& sentence,
                       const std::map<std::string, std::string>& lexicon, llm::Client& client,
                       const std::vector<IgtShot>& shots,
                       const std::vector<std::string>& gloss_inventory,
                       const std::string& instance_id = "",
                       const std::string& model_id = "default");

struct InductionRequest {
    std::vector<corpus::ParallelExample> examples;  // same rule cluster, >= 2
    std::vector<InductionShot> shots;               // two-shot ICL
    std::string cluster_rule_id;                    // rule the cluster demonstrates
};

// Summarizes a grammar rule from parallel examples. Throws EmptyGeneration.
std::string induce_rule(const InductionRequest& request, llm::Client& client,
                        const std::string& model_id = "default");

}  // namespace rulemt::rulecraft
