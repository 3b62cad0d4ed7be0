#pragma once

#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

// Deterministic interpreter for executable rule encodings. Each program is a
// short pipeline of token-rewrite steps; the step variants mirror the action
// taxonomy one-to-one (add -> Insert, delete -> Delete, reorder -> Permute,
// break -> Split, select -> Branch) plus a lexicon-lookup step. Programs are
// the ground-truth oracle behind the offline mock backend.
namespace rulemt::engine {

enum class Direction { hi_to_lo, lo_to_hi };

std::string to_string(Direction d);
Direction direction_from_string(std::string_view name);

// Per-example bilingual word map. Keys are words on the side a program reads
// its input from; multi-word values expand to several tokens on lookup.
using Lexicon = std::map<std::string, std::string>;

// Matches a single token. Total: never errors on any token.
struct TokenPredicate {
    enum class Kind { any, equals, maps_to };
    Kind kind = Kind::any;
    std::string value;

    bool matches(const std::string& token, const Lexicon& lexicon) const;
};

// Matches the whole token list.
struct SentencePredicate {
    std::string contains;
    bool negate = false;

    bool matches(const std::vector<std::string>& tokens) const;
};

struct PositionSpec {
    enum class Kind { start, end, before, after, index };
    Kind kind = Kind::end;
    std::string token;  // before/after anchor; falls back to end when absent
    int index = 0;      // clamped to [0, size]
};

struct Step;

struct MapTokensStep {};

struct InsertStep {
    std::string token;
    PositionSpec position;
};

struct DeleteStep {
    TokenPredicate pred;
};

struct PermuteStep {
    std::vector<TokenPredicate> pattern;
    std::vector<int> order;  // order[i] = pattern slot placed at window slot i
    bool mandatory = false;
};

struct SplitStep {
    TokenPredicate pred;
    std::vector<std::string> parts;
};

struct BranchStep {
    SentencePredicate pred;
    std::vector<Step> then_steps;
    std::vector<Step> else_steps;
};

struct Step {
    std::variant<MapTokensStep, InsertStep, DeleteStep, PermuteStep, SplitStep, BranchStep> op;
};

struct RuleProgram {
    std::vector<Step> steps;
    Direction direction = Direction::hi_to_lo;
};

// Structural checks: at least one step, Permute orders are permutations,
// Branch nesting depth at most 2. Throws ProgramError.
void validate_program(const RuleProgram& program);

struct ApplyResult {
    std::vector<std::string> tokens;
    // Tokens MapTokens saw without a lexicon entry; they pass through
    // unchanged, mirroring LLM behaviour on OOV items.
    std::vector<std::string> missing_lexicon;
};

// Runs the program over the token list. Pure: no step mutates its input.
// Throws ProgramError when a mandatory Permute pattern does not match.
ApplyResult apply_program(const RuleProgram& program,
                          const std::vector<std::string>& source_tokens,
                          const Lexicon& lexicon);

enum class ComposeStrategy { sequential };

// Steps of `a` followed by steps of `b`. Throws DirectionMismatch.
RuleProgram compose_programs(const RuleProgram& a, const RuleProgram& b,
                             ComposeStrategy strategy = ComposeStrategy::sequential);

nlohmann::json to_json(const RuleProgram& program);
RuleProgram program_from_json(const nlohmann::json& j);

}  // namespace rulemt::engine
