#include "rulemt/rulecraft.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>
#include <utility>

#include "rulemt/errors.hpp"
#include "rulemt/text.hpp"

namespace rulemt::rulecraft {

// -- CodeRule ----------------------------------------------------------

std::string to_string(CodeRule::Style style) {
    return style == CodeRule::Style::application ? "application" : "retrieval_check";
}

CodeRule::Style code_style_from_string(std::string_view name) {
    if (name == "application") return CodeRule::Style::application;
    if (name == "retrieval_check") return CodeRule::Style::retrieval_check;
    throw SchemaError("unknown code style: " + std::string(name));
}

std::string CodeRule::render() const {
    std::string out = comment_block;
    if (!out.empty() && out.back() != '\n') out.push_back('\n');
    out += body;
    if (!out.empty() && out.back() != '\n') out.push_back('\n');
    return out;
}

nlohmann::json CodeRule::to_json() const {
    return {{"style", rulecraft::to_string(style)},
            {"comment_block", comment_block},
            {"body", body},
            {"function_name", function_name}};
}

CodeRule CodeRule::from_json(const nlohmann::json& j) {
    CodeRule code;
    code.style = code_style_from_string(j.at("style").get<std::string>());
    code.comment_block = j.at("comment_block").get<std::string>();
    code.body = j.at("body").get<std::string>();
    code.function_name = j.at("function_name").get<std::string>();
    return code;
}

// -- parsing & validation -----------------------------------------------

namespace {

std::string rstrip(std::string s) {
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r' || s.back() == ' ' ||
                          s.back() == '\t'))
        s.pop_back();
    return s;
}

std::vector<std::string> split_lines(const std::string& s) {
    std::vector<std::string> lines;
    std::istringstream in(s);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

std::string function_name_of(const std::string& def_line) {
    static const std::regex def_re(R"(^def\s+([A-Za-z_][A-Za-z0-9_]*)\s*\()");
    std::smatch m;
    if (std::regex_search(def_line, m, def_re)) return m[1].str();
    return "";
}

bool starts_with(const std::string& s, std::string_view prefix) {
    return s.rfind(prefix, 0) == 0;
}

}  // namespace

CodeRule parse_code_rule(const std::string& raw, CodeRule::Style style) {
    std::vector<std::string> comment_lines;
    std::vector<std::string> body_lines;
    bool in_body = false;
    for (auto& line : split_lines(raw)) {
        if (starts_with(text::trim(line), "```")) {
            if (in_body) break;
            continue;
        }
        if (!in_body) {
            if (starts_with(line, "def ")) {
                in_body = true;
                body_lines.push_back(line);
            } else if (starts_with(text::trim(line), "#")) {
                comment_lines.push_back(text::trim(line));
            }
            // prose outside comments and code is discarded
            continue;
        }
        body_lines.push_back(line);
    }
    if (body_lines.empty())
        throw GenerationInvalid("no function definition in generated code rule");

    CodeRule code;
    code.style = style;
    std::ostringstream comment;
    for (std::size_t i = 0; i < comment_lines.size(); ++i)
        comment << (i ? "\n" : "") << comment_lines[i];
    code.comment_block = comment.str();
    std::ostringstream body;
    for (std::size_t i = 0; i < body_lines.size(); ++i)
        body << (i ? "\n" : "") << body_lines[i];
    code.body = rstrip(body.str());
    code.function_name = function_name_of(body_lines.front());
    return code;
}

std::string to_string(Violation v) {
    switch (v) {
        case Violation::NoFunction: return "NoFunction";
        case Violation::MultipleFunctions: return "MultipleFunctions";
        case Violation::WrongParameters: return "WrongParameters";
        case Violation::StyleReturnMismatch: return "StyleReturnMismatch";
        case Violation::MissingRuleText: return "MissingRuleText";
        case Violation::UnbalancedDelimiters: return "UnbalancedDelimiters";
        case Violation::ForbiddenStatement: return "ForbiddenStatement";
    }
    return "";
}

namespace {

// Bracket balance outside single/double-quoted string literals.
bool balanced_delimiters(const std::string& body) {
    std::vector<char> stack;
    char quote = 0;
    for (std::size_t i = 0; i < body.size(); ++i) {
        char c = body[i];
        if (quote) {
            if (c == '\\') {
                ++i;
            } else if (c == quote) {
                quote = 0;
            }
            continue;
        }
        if (c == '\'' || c == '"') {
            quote = c;
        } else if (c == '(' || c == '[' || c == '{') {
            stack.push_back(c);
        } else if (c == ')' || c == ']' || c == '}') {
            char open = c == ')' ? '(' : c == ']' ? '[' : '{';
            if (stack.empty() || stack.back() != open) return false;
            stack.pop_back();
        }
    }
    return stack.empty() && quote == 0;
}

bool boolean_literal(const std::string& expr) {
    return expr == "True" || expr == "False";
}

}  // namespace

std::vector<Violation> validate_code_rule(const CodeRule& code,
                                          const std::vector<std::string>& expected_texts) {
    std::vector<Violation> violations;
    auto lines = split_lines(code.body);

    int top_level_defs = 0;
    for (const auto& line : lines) {
        if (starts_with(line, "def ")) ++top_level_defs;
    }
    if (top_level_defs == 0) {
        violations.push_back(Violation::NoFunction);
    } else if (top_level_defs > 1) {
        violations.push_back(Violation::MultipleFunctions);
    }

    if (top_level_defs >= 1) {
        const std::string params = "(" + std::string(kCodeRuleParams) + ")";
        if (lines.front().find(params) == std::string::npos ||
            function_name_of(lines.front()) != code.function_name ||
            code.function_name.empty())
            violations.push_back(Violation::WrongParameters);
    }

    std::vector<std::string> returns;
    for (const auto& line : lines) {
        std::string t = text::trim(line);
        if (starts_with(t, "return ")) returns.push_back(text::trim(t.substr(7)));
        else if (t == "return") returns.push_back("");
    }
    bool style_ok;
    if (code.style == CodeRule::Style::retrieval_check) {
        style_ok = !returns.empty() && std::all_of(returns.begin(), returns.end(),
                                                   [](const std::string& r) {
                                                       return boolean_literal(r);
                                                   });
    } else {
        style_ok = !returns.empty() && std::none_of(returns.begin(), returns.end(),
                                                    [](const std::string& r) {
                                                        return r.empty() || boolean_literal(r);
                                                    });
    }
    if (!style_ok) violations.push_back(Violation::StyleReturnMismatch);

    for (const auto& expected : expected_texts) {
        if (code.comment_block.find(expected) == std::string::npos) {
            violations.push_back(Violation::MissingRuleText);
            break;
        }
    }

    if (!balanced_delimiters(code.body)) violations.push_back(Violation::UnbalancedDelimiters);

    for (const auto& line : lines) {
        std::string t = text::trim(line);
        if (starts_with(t, "import ") || starts_with(t, "from ") ||
            t.find("open(") != std::string::npos || t.find("print(") != std::string::npos ||
            t.find("input(") != std::string::npos) {
            violations.push_back(Violation::ForbiddenStatement);
            break;
        }
    }

    return violations;
}

// -- exemplars ----------------------------------------------------------

Exemplars load_exemplars(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.filename().string() + ": " + e.what());
    }

    Exemplars out;
    auto load_conversion = [&](const char* key, std::vector<ConversionExemplar>& dst) {
        for (const auto& item : j.value(key, nlohmann::json::array())) {
            dst.push_back({item.at("rule_text").get<std::string>(),
                           item.at("code").get<std::string>()});
        }
    };
    load_conversion("conversion_application", out.conversion_application);
    load_conversion("conversion_retrieval", out.conversion_retrieval);
    for (const auto& item : j.value("igt", nlohmann::json::array())) {
        IgtShot shot;
        shot.sentence = item.at("sentence").get<std::string>();
        shot.igt.surface_tokens = item.at("surface").get<std::vector<std::string>>();
        shot.igt.gloss_tokens = item.at("gloss").get<std::vector<std::string>>();
        if (shot.igt.surface_tokens.size() != shot.igt.gloss_tokens.size())
            throw SchemaError("igt exemplar for \"" + shot.sentence + "\" is misaligned");
        out.igt.push_back(std::move(shot));
    }
    for (const auto& item : j.value("induction", nlohmann::json::array())) {
        InductionShot shot;
        for (const auto& pair : item.at("pairs"))
            shot.pairs.emplace_back(pair.at(0).get<std::string>(),
                                    pair.at(1).get<std::string>());
        shot.rule_text = item.at("rule_text").get<std::string>();
        out.induction.push_back(std::move(shot));
    }
    return out;
}

// -- convert_rule ---------------------------------------------------------

namespace {

std::string conversion_prompt(const corpus::GrammarRule& rule,
                              const std::vector<ConversionExemplar>& exemplars) {
    std::ostringstream out;
    out << "请将语法规则改写为带注释的伪代码函数。注释依次为原规则和编号的步骤。\n\n";
    for (const auto& ex : exemplars) {
        out << "规则：" << ex.rule_text << "\n代码：\n" << rstrip(ex.code) << "\n\n";
    }
    out << "规则：" << rule.text << "\n代码：\n";
    return out.str();
}

}  // namespace

CodeRule convert_rule(const corpus::GrammarRule& rule, CodeRule::Style style,
                      llm::Client& client, const std::vector<ConversionExemplar>& exemplars,
                      const std::string& model_id) {
    if (rule.text.empty()) throw ConfigError("cannot convert a rule without text");

    llm::CompletionRequest req;
    req.model_id = model_id;
    req.messages = {{"system", "你是一名语言学家，同时擅长编写清晰的伪代码。"},
                    {"user", conversion_prompt(rule, exemplars)}};
    req.max_tokens = 1024;
    req.tags = {{"task", "convert"},
                {"rule_id", rule.id},
                {"style", rulecraft::to_string(style)}};

    auto attempt = [&](const llm::CompletionRequest& r) {
        auto text = client.complete(r).text;
        try {
            auto code = parse_code_rule(text, style);
            auto violations = validate_code_rule(code, {rule.text});
            return std::make_pair(std::move(code), std::move(violations));
        } catch (const GenerationInvalid&) {
            // Unparseable output feeds the retry loop as a missing function.
            return std::make_pair(CodeRule{}, std::vector<Violation>{Violation::NoFunction});
        }
    };

    auto [code, violations] = attempt(req);
    if (violations.empty()) return code;

    std::ostringstream feedback;
    feedback << "上一次生成的代码存在以下问题：";
    for (std::size_t i = 0; i < violations.size(); ++i)
        feedback << (i ? ", " : "") << rulecraft::to_string(violations[i]);
    feedback << "。请重新生成完整的代码。";
    llm::CompletionRequest retry = req;
    retry.messages.push_back({"user", feedback.str()});

    auto [code2, violations2] = attempt(retry);
    if (violations2.empty()) return code2;

    std::ostringstream msg;
    msg << "code rule for " << rule.id << " invalid after retry:";
    for (const auto& v : violations2) msg << " " << rulecraft::to_string(v);
    throw GenerationInvalid(msg.str());
}

// -- generate_igt ---------------------------------------------------------

namespace {

std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += tokens[i];
    }
    return out;
}

// The reply's last two non-empty lines are the surface and gloss rows;
// leading "label:" prefixes are stripped.
std::pair<std::vector<std::string>, std::vector<std::string>> parse_igt_reply(
    const std::string& raw) {
    std::vector<std::string> lines;
    for (auto& line : split_lines(raw)) {
        auto t = text::trim(line);
        if (!t.empty()) lines.push_back(t);
    }
    if (lines.size() < 2) return {};
    auto strip_label = [](std::string s) {
        for (auto sep : {std::string("："), std::string(":")}) {
            auto pos = s.find(sep);
            if (pos != std::string::npos && pos < 12) return text::trim(s.substr(pos + sep.size()));
        }
        return s;
    };
    auto surface = text::whitespace_tokens(strip_label(lines[lines.size() - 2]));
    auto gloss = text::whitespace_tokens(strip_label(lines[lines.size() - 1]));
    return {surface, gloss};
}

}  // namespace

IgtResult generate_igt(const std::string& sentence,
                       const std::map<std::string, std::string>& lexicon, llm::Client& client,
                       const std::vector<IgtShot>& shots,
                       const std::vector<std::string>& gloss_inventory,
                       const std::string& instance_id, const std::string& model_id) {
    std::ostringstream user;
    user << "请为句子生成逐词注释（IGT），两行输出：第一行为表层词，第二行为对齐的注释。\n";
    if (!gloss_inventory.empty()) {
        user << "可用注释符号：";
        for (std::size_t i = 0; i < gloss_inventory.size(); ++i)
            user << (i ? " " : "") << gloss_inventory[i];
        user << "\n";
    }
    user << "\n";
    for (const auto& shot : shots) {
        user << "句子：" << shot.sentence << "\n"
             << join_tokens(shot.igt.surface_tokens) << "\n"
             << join_tokens(shot.igt.gloss_tokens) << "\n\n";
    }
    if (!lexicon.empty()) {
        user << "字典：\n";
        for (const auto& [word, gloss] : lexicon) user << word << ": " << gloss << "\n";
    }
    user << "句子：" << sentence << "\n";

    llm::CompletionRequest req;
    req.model_id = model_id;
    req.messages = {{"system", "你是一名从事语言记录的语言学家。"}, {"user", user.str()}};
    req.max_tokens = 256;
    req.tags = {{"task", "igt"}, {"sentence", sentence}};
    if (!instance_id.empty()) req.tags["instance_id"] = instance_id;
    if (!lexicon.empty()) req.tags["lexicon"] = nlohmann::json(lexicon).dump();

    auto [surface, gloss] = parse_igt_reply(client.complete(req).text);
    if (surface.empty() || surface.size() != gloss.size()) {
        std::ostringstream feedback;
        feedback << "上一次输出的两行没有对齐：表层 " << surface.size() << " 个词，注释 "
                 << gloss.size() << " 个。请重新输出两行，每个表层词对应一个注释。";
        llm::CompletionRequest retry = req;
        retry.messages.push_back({"user", feedback.str()});
        std::tie(surface, gloss) = parse_igt_reply(client.complete(retry).text);
        if (surface.empty() || surface.size() != gloss.size())
            throw AlignmentError("igt for \"" + sentence + "\" misaligned after retry");
    }

    IgtResult result;
    result.igt.surface_tokens = std::move(surface);
    result.igt.gloss_tokens = std::move(gloss);
    std::set<std::string> inventory(gloss_inventory.begin(), gloss_inventory.end());
    for (const auto& symbol : result.igt.gloss_symbols()) {
        if (!inventory.count(symbol)) result.unknown_symbols.push_back(symbol);
    }
    return result;
}

// -- induce_rule ------------------------------------------------------------

std::string induce_rule(const InductionRequest& request, llm::Client& client,
                        const std::string& model_id) {
    if (request.examples.size() < 2)
        throw ConfigError("rule induction needs at least 2 examples");

    std::ostringstream user;
    user << "请根据平行例句总结出一条语法规则，用一段中文描述。\n\n";
    for (const auto& shot : request.shots) {
        user << "例句：\n";
        for (const auto& [src, tgt] : shot.pairs) user << src << " → " << tgt << "\n";
        user << "规则：" << shot.rule_text << "\n\n";
    }
    user << "例句：\n";
    for (const auto& ex : request.examples)
        user << ex.source_text << " → " << ex.target_text << "\n";
    user << "规则：";

    llm::CompletionRequest req;
    req.model_id = model_id;
    req.messages = {{"system", "你是一名语言学家，擅长从例句中归纳语法规律。"},
                    {"user", user.str()}};
    req.max_tokens = 256;
    req.tags = {{"task", "induce"}};
    if (!request.cluster_rule_id.empty()) req.tags["induced_from"] = request.cluster_rule_id;

    std::string reply = text::trim(client.complete(req).text);
    if (starts_with(reply, "规则：")) reply = text::trim(reply.substr(std::string("规则：").size()));
    if (reply.empty()) throw EmptyGeneration("induction produced no rule text");
    return reply;
}

}  // namespace rulemt::rulecraft
