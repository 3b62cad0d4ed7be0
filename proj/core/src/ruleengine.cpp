#include "rulemt/ruleengine.hpp"

#include <algorithm>
#include <set>

#include "rulemt/errors.hpp"
#include "rulemt/text.hpp"

namespace rulemt::engine {

std::string to_string(Direction d) {
    return d == Direction::hi_to_lo ? "hi_to_lo" : "lo_to_hi";
}

Direction direction_from_string(std::string_view name) {
    if (name == "hi_to_lo") return Direction::hi_to_lo;
    if (name == "lo_to_hi") return Direction::lo_to_hi;
    throw SchemaError("unknown direction: " + std::string(name));
}

bool TokenPredicate::matches(const std::string& token, const Lexicon& lexicon) const {
    switch (kind) {
        case Kind::any:
            return true;
        case Kind::equals:
            return token == value;
        case Kind::maps_to: {
            auto it = lexicon.find(token);
            return it != lexicon.end() && it->second == value;
        }
    }
    return false;
}

bool SentencePredicate::matches(const std::vector<std::string>& tokens) const {
    bool found = std::find(tokens.begin(), tokens.end(), contains) != tokens.end();
    return negate ? !found : found;
}

namespace {

void apply_steps(const std::vector<Step>& steps, std::vector<std::string>& tokens,
                 const Lexicon& lexicon, std::vector<std::string>& missing);

void apply_map_tokens(std::vector<std::string>& tokens, const Lexicon& lexicon,
                      std::vector<std::string>& missing) {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& tok : tokens) {
        auto it = lexicon.find(tok);
        if (it == lexicon.end()) {
            missing.push_back(tok);
            out.push_back(tok);
            continue;
        }
        for (auto& piece : text::whitespace_tokens(it->second)) out.push_back(std::move(piece));
    }
    tokens = std::move(out);
}

std::size_t resolve_position(const PositionSpec& pos, const std::vector<std::string>& tokens) {
    switch (pos.kind) {
        case PositionSpec::Kind::start:
            return 0;
        case PositionSpec::Kind::end:
            return tokens.size();
        case PositionSpec::Kind::before: {
            auto it = std::find(tokens.begin(), tokens.end(), pos.token);
            return it == tokens.end() ? tokens.size()
                                      : static_cast<std::size_t>(it - tokens.begin());
        }
        case PositionSpec::Kind::after: {
            auto it = std::find(tokens.begin(), tokens.end(), pos.token);
            return it == tokens.end() ? tokens.size()
                                      : static_cast<std::size_t>(it - tokens.begin()) + 1;
        }
        case PositionSpec::Kind::index: {
            auto idx = static_cast<std::size_t>(std::max(pos.index, 0));
            return std::min(idx, tokens.size());
        }
    }
    return tokens.size();
}

void apply_permute(const PermuteStep& step, std::vector<std::string>& tokens,
                   const Lexicon& lexicon) {
    const std::size_t n = step.pattern.size();
    if (n == 0 || tokens.size() < n) {
        if (step.mandatory) throw ProgramError("mandatory permute pattern did not match");
        return;
    }
    for (std::size_t start = 0; start + n <= tokens.size(); ++start) {
        bool ok = true;
        for (std::size_t k = 0; k < n; ++k) {
            if (!step.pattern[k].matches(tokens[start + k], lexicon)) {
                ok = false;
                break;
            }
        }
        if (!ok) continue;
        std::vector<std::string> window(n);
        for (std::size_t k = 0; k < n; ++k)
            window[k] = tokens[start + static_cast<std::size_t>(step.order[k])];
        for (std::size_t k = 0; k < n; ++k) tokens[start + k] = std::move(window[k]);
        return;  // first matching window only
    }
    if (step.mandatory) throw ProgramError("mandatory permute pattern did not match");
}

void apply_split(const SplitStep& step, std::vector<std::string>& tokens, const Lexicon& lexicon) {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& tok : tokens) {
        if (step.pred.matches(tok, lexicon)) {
            out.insert(out.end(), step.parts.begin(), step.parts.end());
        } else {
            out.push_back(tok);
        }
    }
    tokens = std::move(out);
}

void apply_one(const Step& step, std::vector<std::string>& tokens, const Lexicon& lexicon,
               std::vector<std::string>& missing) {
    std::visit(
        [&](const auto& op) {
            using T = std::decay_t<decltype(op)>;
            if constexpr (std::is_same_v<T, MapTokensStep>) {
                apply_map_tokens(tokens, lexicon, missing);
            } else if constexpr (std::is_same_v<T, InsertStep>) {
                tokens.insert(tokens.begin() +
                                  static_cast<std::ptrdiff_t>(resolve_position(op.position, tokens)),
                              op.token);
            } else if constexpr (std::is_same_v<T, DeleteStep>) {
                std::erase_if(tokens,
                              [&](const std::string& t) { return op.pred.matches(t, lexicon); });
            } else if constexpr (std::is_same_v<T, PermuteStep>) {
                apply_permute(op, tokens, lexicon);
            } else if constexpr (std::is_same_v<T, SplitStep>) {
                apply_split(op, tokens, lexicon);
            } else if constexpr (std::is_same_v<T, BranchStep>) {
                apply_steps(op.pred.matches(tokens) ? op.then_steps : op.else_steps, tokens,
                            lexicon, missing);
            }
        },
        step.op);
}

void apply_steps(const std::vector<Step>& steps, std::vector<std::string>& tokens,
                 const Lexicon& lexicon, std::vector<std::string>& missing) {
    for (const auto& step : steps) apply_one(step, tokens, lexicon, missing);
}

int branch_depth(const std::vector<Step>& steps) {
    int depth = 0;
    for (const auto& step : steps) {
        if (const auto* br = std::get_if<BranchStep>(&step.op)) {
            int inner = 1 + std::max(branch_depth(br->then_steps), branch_depth(br->else_steps));
            depth = std::max(depth, inner);
        }
    }
    return depth;
}

void validate_steps(const std::vector<Step>& steps) {
    for (const auto& step : steps) {
        if (const auto* perm = std::get_if<PermuteStep>(&step.op)) {
            if (perm->pattern.empty()) throw ProgramError("permute pattern is empty");
            if (perm->order.size() != perm->pattern.size())
                throw ProgramError("permute order length differs from pattern length");
            std::set<int> seen(perm->order.begin(), perm->order.end());
            if (seen.size() != perm->order.size() || *seen.begin() != 0 ||
                *seen.rbegin() != static_cast<int>(perm->order.size()) - 1)
                throw ProgramError("permute order is not a permutation of 0..n-1");
        } else if (const auto* split = std::get_if<SplitStep>(&step.op)) {
            if (split->parts.empty()) throw ProgramError("split parts are empty");
        } else if (const auto* br = std::get_if<BranchStep>(&step.op)) {
            validate_steps(br->then_steps);
            validate_steps(br->else_steps);
        }
    }
}

}  // namespace

void validate_program(const RuleProgram& program) {
    if (program.steps.empty()) throw ProgramError("program has no steps");
    if (branch_depth(program.steps) > 2) throw ProgramError("branch nesting deeper than 2");
    validate_steps(program.steps);
}

ApplyResult apply_program(const RuleProgram& program, const std::vector<std::string>& source_tokens,
                          const Lexicon& lexicon) {
    ApplyResult result;
    result.tokens = source_tokens;
    apply_steps(program.steps, result.tokens, lexicon, result.missing_lexicon);
    return result;
}

RuleProgram compose_programs(const RuleProgram& a, const RuleProgram& b, ComposeStrategy) {
    if (a.direction != b.direction)
        throw DirectionMismatch("cannot compose programs with different directions");
    RuleProgram out;
    out.direction = a.direction;
    out.steps = a.steps;
    out.steps.insert(out.steps.end(), b.steps.begin(), b.steps.end());
    return out;
}

namespace {

nlohmann::json pred_to_json(const TokenPredicate& pred) {
    switch (pred.kind) {
        case TokenPredicate::Kind::any:
            return {{"any", true}};
        case TokenPredicate::Kind::equals:
            return {{"equals", pred.value}};
        case TokenPredicate::Kind::maps_to:
            return {{"maps_to", pred.value}};
    }
    return {};
}

TokenPredicate pred_from_json(const nlohmann::json& j) {
    TokenPredicate pred;
    if (j.contains("equals")) {
        pred.kind = TokenPredicate::Kind::equals;
        pred.value = j.at("equals").get<std::string>();
    } else if (j.contains("maps_to")) {
        pred.kind = TokenPredicate::Kind::maps_to;
        pred.value = j.at("maps_to").get<std::string>();
    } else if (j.contains("any")) {
        pred.kind = TokenPredicate::Kind::any;
    } else {
        throw SchemaError("token predicate needs one of: any, equals, maps_to");
    }
    return pred;
}

nlohmann::json position_to_json(const PositionSpec& pos) {
    switch (pos.kind) {
        case PositionSpec::Kind::start:
            return {{"kind", "start"}};
        case PositionSpec::Kind::end:
            return {{"kind", "end"}};
        case PositionSpec::Kind::before:
            return {{"kind", "before"}, {"token", pos.token}};
        case PositionSpec::Kind::after:
            return {{"kind", "after"}, {"token", pos.token}};
        case PositionSpec::Kind::index:
            return {{"kind", "index"}, {"index", pos.index}};
    }
    return {};
}

PositionSpec position_from_json(const nlohmann::json& j) {
    PositionSpec pos;
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "start") {
        pos.kind = PositionSpec::Kind::start;
    } else if (kind == "end") {
        pos.kind = PositionSpec::Kind::end;
    } else if (kind == "before") {
        pos.kind = PositionSpec::Kind::before;
        pos.token = j.at("token").get<std::string>();
    } else if (kind == "after") {
        pos.kind = PositionSpec::Kind::after;
        pos.token = j.at("token").get<std::string>();
    } else if (kind == "index") {
        pos.kind = PositionSpec::Kind::index;
        pos.index = j.at("index").get<int>();
    } else {
        throw SchemaError("unknown position kind: " + kind);
    }
    return pos;
}

nlohmann::json steps_to_json(const std::vector<Step>& steps);

nlohmann::json step_to_json(const Step& step) {
    return std::visit(
        [](const auto& op) -> nlohmann::json {
            using T = std::decay_t<decltype(op)>;
            if constexpr (std::is_same_v<T, MapTokensStep>) {
                return {{"op", "map_tokens"}};
            } else if constexpr (std::is_same_v<T, InsertStep>) {
                return {{"op", "insert"},
                        {"token", op.token},
                        {"position", position_to_json(op.position)}};
            } else if constexpr (std::is_same_v<T, DeleteStep>) {
                return {{"op", "delete"}, {"pred", pred_to_json(op.pred)}};
            } else if constexpr (std::is_same_v<T, PermuteStep>) {
                nlohmann::json pattern = nlohmann::json::array();
                for (const auto& p : op.pattern) pattern.push_back(pred_to_json(p));
                return {{"op", "permute"},
                        {"pattern", pattern},
                        {"order", op.order},
                        {"mandatory", op.mandatory}};
            } else if constexpr (std::is_same_v<T, SplitStep>) {
                return {{"op", "split"}, {"pred", pred_to_json(op.pred)}, {"parts", op.parts}};
            } else {
                nlohmann::json j = {{"op", "branch"},
                                    {"pred",
                                     {{"contains", op.pred.contains}, {"negate", op.pred.negate}}},
                                    {"then", steps_to_json(op.then_steps)}};
                if (!op.else_steps.empty()) j["else"] = steps_to_json(op.else_steps);
                return j;
            }
        },
        step.op);
}

nlohmann::json steps_to_json(const std::vector<Step>& steps) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& step : steps) arr.push_back(step_to_json(step));
    return arr;
}

std::vector<Step> steps_from_json(const nlohmann::json& arr);

Step step_from_json(const nlohmann::json& j) {
    const auto op = j.at("op").get<std::string>();
    Step step;
    if (op == "map_tokens") {
        step.op = MapTokensStep{};
    } else if (op == "insert") {
        InsertStep s;
        s.token = j.at("token").get<std::string>();
        s.position = position_from_json(j.at("position"));
        step.op = std::move(s);
    } else if (op == "delete") {
        DeleteStep s;
        s.pred = pred_from_json(j.at("pred"));
        step.op = std::move(s);
    } else if (op == "permute") {
        PermuteStep s;
        for (const auto& p : j.at("pattern")) s.pattern.push_back(pred_from_json(p));
        s.order = j.at("order").get<std::vector<int>>();
        s.mandatory = j.value("mandatory", false);
        step.op = std::move(s);
    } else if (op == "split") {
        SplitStep s;
        s.pred = pred_from_json(j.at("pred"));
        s.parts = j.at("parts").get<std::vector<std::string>>();
        step.op = std::move(s);
    } else if (op == "branch") {
        BranchStep s;
        const auto& pred = j.at("pred");
        s.pred.contains = pred.at("contains").get<std::string>();
        s.pred.negate = pred.value("negate", false);
        s.then_steps = steps_from_json(j.at("then"));
        if (j.contains("else")) s.else_steps = steps_from_json(j.at("else"));
        step.op = std::move(s);
    } else {
        throw SchemaError("unknown step op: " + op);
    }
    return step;
}

std::vector<Step> steps_from_json(const nlohmann::json& arr) {
    std::vector<Step> steps;
    for (const auto& j : arr) steps.push_back(step_from_json(j));
    return steps;
}

}  // namespace

nlohmann::json to_json(const RuleProgram& program) {
    return {{"direction", to_string(program.direction)}, {"steps", steps_to_json(program.steps)}};
}

RuleProgram program_from_json(const nlohmann::json& j) {
    RuleProgram program;
    program.direction = direction_from_string(j.at("direction").get<std::string>());
    program.steps = steps_from_json(j.at("steps"));
    return program;
}

}  // namespace rulemt::engine
