#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

namespace rulemt::rulecraft {

// A grammar rule re-expressed as a commented pseudo-code function.
// `application` style simulates the translation process and returns a
// sentence; `retrieval_check` style decides applicability and returns a
// boolean. The comment block keeps the original rule text verbatim followed
// by numbered steps.
struct CodeRule {
    enum class Style { application, retrieval_check };

    Style style = Style::application;
    std::string comment_block;
    std::string body;
    std::string function_name;

    // Full rule text: the comment lines followed by the function definition.
    std::string render() const;

    nlohmann::json to_json() const;
    static CodeRule from_json(const nlohmann::json& j);
};

std::string to_string(CodeRule::Style style);
CodeRule::Style code_style_from_string(std::string_view name);

// Canonical parameter list every code rule takes.
inline constexpr std::string_view kCodeRuleParams = "source_sentence, dictionary";

}  // namespace rulemt::rulecraft
