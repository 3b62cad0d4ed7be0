#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rulemt/code_rule.hpp"
#include "rulemt/ruleengine.hpp"

// Rulebook data model: grammar rules with attribute annotations, parallel
// examples keyed by rule id, and the bundle loader/saver. A bundle directory
// holds book.json (languages, gloss inventory) plus rules.jsonl and
// examples.jsonl, one record per line.
namespace rulemt::corpus {

enum class ActionKind { add, delete_, reorder, break_, select };
enum class Difficulty { easy, medium, hard };
enum class WalsDomain {
    morphology,
    nominal_categories,
    nominal_syntax,
    verbal_categories,
    word_order,
    simple_clauses,
    complex_sentences,
    lexicon
};
enum class Granularity { phrase, sentence };

std::string to_string(ActionKind a);
std::string to_string(Difficulty d);
std::string to_string(WalsDomain w);
std::string to_string(Granularity g);
ActionKind action_from_string(std::string_view name);
Difficulty difficulty_from_string(std::string_view name);
WalsDomain domain_from_string(std::string_view name);
Granularity granularity_from_string(std::string_view name);

// Interlinear glossed text: one gloss token per surface morpheme token.
struct Igt {
    std::vector<std::string> surface_tokens;
    std::vector<std::string> gloss_tokens;

    // Grammatical symbols appearing in the glosses (e.g. "1SG", "CL"),
    // uppercase segments split out of each gloss token.
    std::set<std::string> gloss_symbols() const;
};

struct GrammarRule {
    std::string id;
    std::string text;
    std::string rule_language;
    std::set<ActionKind> actions;
    Difficulty difficulty = Difficulty::easy;
    WalsDomain wals_domain = WalsDomain::word_order;
    std::optional<rulecraft::CodeRule> code_application;
    std::optional<rulecraft::CodeRule> code_retrieval;
    std::optional<engine::RuleProgram> program;
};

struct ParallelExample {
    std::string id;
    std::vector<std::string> rule_ids;  // length >= 1; 2 for multi-rule instances
    std::string source_text;            // high-resource side
    std::string target_text;            // low-resource side
    // Keys are low-resource-side words, values their high-resource glosses.
    // Records tagged "lexicon_keys": "hi" are inverted to this layout on load.
    std::map<std::string, std::string> lexicon;
    Granularity granularity = Granularity::sentence;
    std::optional<Igt> igt;

    // Gloss -> low-resource word; multi-word glosses keep their spaces so the
    // inverted map can drive longest-match segmentation of unsegmented text.
    std::map<std::string, std::string> inverted_lexicon() const;
};

struct Rulebook {
    std::vector<GrammarRule> rules;        // sorted by id
    std::vector<ParallelExample> examples; // sorted by id
    std::string source_language;
    std::string target_language;
    std::vector<std::string> gloss_inventory;
    std::vector<std::string> warnings;  // non-fatal findings from the loader

    const GrammarRule* find_rule(std::string_view id) const;
    const ParallelExample* find_example(std::string_view id) const;
    std::vector<const ParallelExample*> examples_for_rule(std::string_view id) const;
    // 0-based position in the sorted rule list; "Rule {n}" uses index + 1.
    std::optional<std::size_t> rule_index(std::string_view id) const;
};

struct DatasetStats {
    std::size_t n_rules = 0;
    std::size_t n_examples = 0;
    std::size_t n_phrase = 0;
    std::size_t n_sentence = 0;
    std::size_t n_multi_rule = 0;
    std::map<ActionKind, std::size_t> per_action;
    std::map<Difficulty, std::size_t> per_difficulty;
    std::map<WalsDomain, std::size_t> per_domain;
    double avg_example_len_source = 0.0;
    double avg_example_len_target = 0.0;
};

Rulebook load_rulebook(const std::filesystem::path& bundle_dir);
void save_rulebook(const Rulebook& book, const std::filesystem::path& bundle_dir);

DatasetStats compute_stats(const Rulebook& book);

enum class BookFormat { text, code_retrieval, code_application };

std::string to_string(BookFormat f);
BookFormat book_format_from_string(std::string_view name);

// Deterministic numbered concatenation of all rules, id order, "Rule {n}:"
// numbering from 1. Code formats render the respective code form and throw
// MissingCodeError naming the first rule that lacks one.
std::string book_string(const Rulebook& book, BookFormat format = BookFormat::text);

nlohmann::json rule_to_json(const GrammarRule& rule);
GrammarRule rule_from_json(const nlohmann::json& j);
nlohmann::json example_to_json(const ParallelExample& example);
ParallelExample example_from_json(const nlohmann::json& j);

// "word: gloss" dictionary lines for prompts, one entry per line, keyed on
// the translation-source side for the given direction.
std::string lexicon_block(const ParallelExample& example, engine::Direction direction);

// Prose extraction: examples appear as three consecutive lines (surface
// sentence, aligned gloss, free translation) inside a paragraph; the nearest
// preceding prose paragraph supplies the rule text. Patterns are data so a
// bundle manifest can override them per book.
struct ProsePatterns {
    std::string surface_line = R"(\S)";
    std::string gloss_line = R"(\S)";
    std::string translation_line = R"(\S)";

    static ProsePatterns from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct RawTriple {
    std::string surface;
    std::string gloss;
    std::string translation;
};

struct ExtractedRule {
    std::string rule_text;
    std::vector<RawTriple> examples;
};

struct SkipRecord {
    std::size_t offset = 0;  // byte offset of the skipped region
    std::string reason;
};

struct ExtractionResult {
    std::vector<ExtractedRule> entries;
    std::vector<SkipRecord> skips;
};

ExtractionResult extract_from_prose(const std::string& book_text,
                                    const ProsePatterns& patterns = {});

// One JSON object per skip: {"offset": n, "reason": "..."}.
void write_skip_log(const ExtractionResult& result, const std::filesystem::path& path);

}  // namespace rulemt::corpus
