#include "rulemt/translator.hpp"

#include <algorithm>
#include <regex>
#include <set>
#include <sstream>

#include "rulemt/errors.hpp"
#include "rulemt/rand.hpp"
#include "rulemt/text.hpp"

namespace rulemt::translator {

std::string to_string(RuleMode mode) {
    switch (mode) {
        case RuleMode::none: return "none";
        case RuleMode::random_rule: return "random";
        case RuleMode::gold: return "gold";
    }
    return "";
}

RuleMode rule_mode_from_string(std::string_view name) {
    if (name == "none") return RuleMode::none;
    if (name == "random") return RuleMode::random_rule;
    if (name == "gold") return RuleMode::gold;
    throw ConfigError("unknown rule mode: " + std::string(name));
}

std::string to_string(CombineStrategy strategy) {
    switch (strategy) {
        case CombineStrategy::func_call: return "func_call";
        case CombineStrategy::inline_template: return "inline_template";
        case CombineStrategy::inline_llm: return "inline_llm";
    }
    return "";
}

CombineStrategy combine_strategy_from_string(std::string_view name) {
    if (name == "func_call") return CombineStrategy::func_call;
    if (name == "inline_template") return CombineStrategy::inline_template;
    if (name == "inline_llm") return CombineStrategy::inline_llm;
    throw ConfigError("unknown combine strategy: " + std::string(name));
}

void check_config(const ApplicationConfig& cfg) {
    if (cfg.use_igt && cfg.direction == engine::Direction::hi_to_lo)
        throw IgtUnavailable("IGT prompts only support lo_to_hi translation");
    if (cfg.n_examples < 0) throw ConfigError("n_examples must be >= 0");
    if (cfg.model_id.empty()) throw ConfigError("model_id must not be empty");
}

namespace {

constexpr const char* kHiName = "汉语";
constexpr const char* kLoName = "壮语";

std::string rstrip(std::string s) {
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r' || s.back() == ' ' ||
                          s.back() == '\t'))
        s.pop_back();
    return s;
}

std::string join_csv(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ',';
        out += items[i];
    }
    return out;
}

std::string lexicon_json(const corpus::ParallelExample& example, engine::Direction direction) {
    if (direction == engine::Direction::hi_to_lo)
        return nlohmann::json(example.inverted_lexicon()).dump();
    return nlohmann::json(example.lexicon).dump();
}

// Gloss row for an in-context example: the stored IGT when present, else a
// per-token lexicon gloss of the low-resource surface.
std::string igt_gloss_line(const corpus::ParallelExample& example, bool& from_book) {
    std::ostringstream out;
    if (example.igt) {
        from_book = true;
        for (std::size_t i = 0; i < example.igt->gloss_tokens.size(); ++i)
            out << (i ? " " : "") << example.igt->gloss_tokens[i];
        return out.str();
    }
    from_book = false;
    auto [body, punct] = text::split_final_punct(example.target_text);
    (void)punct;
    auto tokens = text::whitespace_tokens(body);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        auto it = example.lexicon.find(text::to_lower_ascii(tokens[i]));
        if (it == example.lexicon.end()) it = example.lexicon.find(tokens[i]);
        out << (i ? " " : "") << (it != example.lexicon.end() ? it->second : tokens[i]);
    }
    return out.str();
}

const corpus::GrammarRule& resolve_rule(const corpus::Rulebook& book, const std::string& id) {
    const auto* rule = book.find_rule(id);
    if (!rule) throw ConfigError("unknown rule id in prompt: " + id);
    return *rule;
}

std::string rule_block(const corpus::Rulebook& book, const std::vector<std::string>& ids,
                       retrieval::RuleFormat format, const rulecraft::CodeRule* combined) {
    std::ostringstream out;
    if (combined) {
        out << "# 以下是一条关于壮语的语法规则：\n" << rstrip(combined->render());
        return out.str();
    }
    out << (ids.size() == 1 ? "# 以下是一条关于壮语的语法规则：" : "# 以下是一些关于壮语的语法规则：");
    if (format == retrieval::RuleFormat::text) {
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const auto& rule = resolve_rule(book, ids[i]);
            out << "\n";
            if (ids.size() > 1) out << "(" << i + 1 << "). ";
            out << rule.text;
        }
    } else {
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const auto& rule = resolve_rule(book, ids[i]);
            if (!rule.code_application)
                throw MissingCodeError("rule " + rule.id + " has no application code rule");
            out << "\n" << (i ? "\n" : "") << rstrip(rule.code_application->render());
        }
    }
    return out.str();
}

}  // namespace

BuiltPrompt build_prompt(const corpus::ParallelExample& instance, const corpus::Rulebook& book,
                         const ApplicationConfig& cfg, const PromptOverrides& overrides) {
    check_config(cfg);
    const bool to_lo = cfg.direction == engine::Direction::hi_to_lo;
    const char* src_name = to_lo ? kHiName : kLoName;
    const char* tgt_name = to_lo ? kLoName : kHiName;

    BuiltPrompt built;
    const std::set<std::string> gold(instance.rule_ids.begin(), instance.rule_ids.end());

    if (!overrides.rule_ids.empty() || overrides.combined) {
        built.rule_ids_in_prompt = overrides.rule_ids;
    } else if (cfg.rule_mode == RuleMode::gold) {
        built.rule_ids_in_prompt = instance.rule_ids;
    } else if (cfg.rule_mode == RuleMode::random_rule) {
        std::vector<std::string> candidates;
        for (const auto& rule : book.rules)
            if (!gold.count(rule.id)) candidates.push_back(rule.id);
        rng::seeded_shuffle(candidates, rng::mix_seed(cfg.seed, instance.id + "|rules"));
        auto k = std::min(candidates.size(), instance.rule_ids.size());
        built.rule_ids_in_prompt.assign(candidates.begin(), candidates.begin() + k);
    }
    for (const auto& id : built.rule_ids_in_prompt)
        if (!gold.count(id)) ++built.n_irrelevant;

    // ICL pool: examples sharing a rule with the instance, instance excluded.
    std::vector<const corpus::ParallelExample*> pool;
    for (const auto& example : book.examples) {
        if (example.id == instance.id) continue;
        if (std::any_of(example.rule_ids.begin(), example.rule_ids.end(),
                        [&](const std::string& id) { return gold.count(id) > 0; }))
            pool.push_back(&example);
    }
    rng::seeded_shuffle(pool, rng::mix_seed(cfg.seed, instance.id + "|examples"));
    const auto want = static_cast<std::size_t>(cfg.n_examples);
    if (pool.size() > want) pool.resize(want);
    built.insufficient_examples = pool.size() < want;
    for (const auto* example : pool) built.example_ids.push_back(example->id);

    std::vector<std::string> sections;
    std::ostringstream framing;
    framing << "# 壮语是中国的一门少数民族语言。你是一名语言学家，请根据给出的信息将" << src_name
            << "短语或句子翻译成" << tgt_name << "。你的回答应该只包含翻译结果，不要包含任何其他额外信息。";
    sections.push_back(framing.str());

    if (!built.rule_ids_in_prompt.empty() || overrides.combined)
        sections.push_back(
            rule_block(book, built.rule_ids_in_prompt, cfg.rule_format, overrides.combined));

    bool all_book = true, any_book = false;
    if (!pool.empty()) {
        std::ostringstream block;
        if (built.rule_ids_in_prompt.empty() && !overrides.combined) {
            block << "# 以下为一些例句，可以帮助你完成翻译：";
        } else if (cfg.use_igt) {
            block << "# 以下为该规则的一些例句及其IGT(Interlinear Glossed Text)，可以帮助你完成翻译：";
        } else {
            block << "# 以下为该规则的一些例句，可以帮助你完成翻译：";
        }
        for (std::size_t i = 0; i < pool.size(); ++i) {
            const auto& example = *pool[i];
            block << "\n\n## 例句" << i + 1 << "：";
            if (cfg.use_lexicon)
                block << "\n字典为：" << lexicon_json(example, cfg.direction);
            const auto& input = to_lo ? example.source_text : example.target_text;
            const auto& output = to_lo ? example.target_text : example.source_text;
            block << "\n" << src_name << "：" << input;
            if (cfg.use_igt) {
                bool from_book = false;
                block << "\nIGT：" << igt_gloss_line(example, from_book);
                all_book = all_book && from_book;
                any_book = any_book || from_book;
            }
            block << "\n" << tgt_name << "：" << output;
        }
        sections.push_back(block.str());
    }
    if (cfg.use_igt && !pool.empty())
        built.igt_source = all_book ? "book" : any_book ? "mixed" : "lexicon";

    std::ostringstream test;
    if (cfg.use_igt) {
        test << "## 请首先写出下面的" << src_name << "短语或句子的IGT，然后将其翻译成" << tgt_name
             << "：\n\n";
    } else {
        test << "## 请将下面的" << src_name << "短语或句子翻译成" << tgt_name << "：\n\n";
    }
    if (cfg.use_lexicon) test << "字典为：" << lexicon_json(instance, cfg.direction) << "\n";
    test << src_name << "：" << (to_lo ? instance.source_text : instance.target_text) << "\n";
    if (cfg.use_igt) {
        test << "## 所以，该" << src_name << "短语或句子的IGT和" << tgt_name << "翻译分别是：";
    } else {
        test << "## 所以，该" << src_name << "短语或句子的" << tgt_name << "翻译是：";
    }
    sections.push_back(test.str());

    std::string prompt;
    for (std::size_t i = 0; i < sections.size(); ++i) {
        if (i) prompt += "\n\n";
        prompt += rstrip(sections[i]);
    }

    built.request.model_id = cfg.model_id;
    built.request.messages = {{"user", prompt}};
    built.request.tags = {{"task", "translate"},
                          {"instance_id", instance.id},
                          {"direction", engine::to_string(cfg.direction)},
                          {"rule_ids_in_prompt", join_csv(built.rule_ids_in_prompt)},
                          {"n_irrelevant", std::to_string(built.n_irrelevant)}};
    if (cfg.use_igt) built.request.tags["igt"] = "1";
    return built;
}

// -- combine ---------------------------------------------------------------

namespace {

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

std::set<std::string> local_names(const std::vector<std::string>& lines) {
    static const std::regex assign_re(R"(([A-Za-z_][A-Za-z0-9_]*)\s*=(?!=))");
    static const std::regex for_re(R"(for\s+([A-Za-z_][A-Za-z0-9_]*)\s+in\b)");
    std::set<std::string> names;
    for (const auto& line : lines) {
        for (auto it = std::sregex_iterator(line.begin(), line.end(), assign_re);
             it != std::sregex_iterator(); ++it)
            names.insert((*it)[1].str());
        for (auto it = std::sregex_iterator(line.begin(), line.end(), for_re);
             it != std::sregex_iterator(); ++it)
            names.insert((*it)[1].str());
    }
    names.erase("source_sentence");
    names.erase("dictionary");
    return names;
}

std::vector<std::string> inner_lines(const rulecraft::CodeRule& code, const std::string& suffix,
                                     bool returns_to_assignments) {
    auto lines = split_lines(code.body);
    lines.erase(lines.begin());  // def line
    const auto names = local_names(lines);
    static const std::regex return_re(R"(^(\s*)return\s+(.+)$)");
    std::vector<std::string> out;
    for (auto line : lines) {
        for (const auto& name : names) {
            std::regex word("\\b" + name + "\\b");
            line = std::regex_replace(line, word, name + suffix);
        }
        if (returns_to_assignments)
            line = std::regex_replace(line, return_re, "$1source_sentence = $2");
        out.push_back(line);
    }
    return out;
}

rulecraft::CodeRule inline_template_combine(const rulecraft::CodeRule& a,
                                            const rulecraft::CodeRule& b, std::uint64_t seed) {
    const bool a_first = (seed & 1) == 0;
    const auto& first = a_first ? a : b;
    const auto& second = a_first ? b : a;
    const std::string first_suffix = a_first ? "_a" : "_b";
    const std::string second_suffix = a_first ? "_b" : "_a";

    rulecraft::CodeRule combined;
    combined.style = rulecraft::CodeRule::Style::application;
    combined.function_name = "apply_combined_rule";
    combined.comment_block = first.comment_block;
    if (!combined.comment_block.empty() && !second.comment_block.empty())
        combined.comment_block += "\n";
    combined.comment_block += second.comment_block;

    std::ostringstream body;
    body << "def apply_combined_rule(" << rulecraft::kCodeRuleParams << "):";
    for (const auto& line : inner_lines(first, first_suffix, true)) body << "\n" << line;
    for (const auto& line : inner_lines(second, second_suffix, false)) body << "\n" << line;
    combined.body = body.str();
    return combined;
}

}  // namespace

rulecraft::CodeRule combine_code_rules(const rulecraft::CodeRule& a, const rulecraft::CodeRule& b,
                                       CombineStrategy strategy, llm::Client& client,
                                       std::uint64_t seed, const std::string& model_id) {
    if (a.style != rulecraft::CodeRule::Style::application ||
        b.style != rulecraft::CodeRule::Style::application)
        throw ConfigError("combine_code_rules requires application-style rules");
    if (!rulecraft::validate_code_rule(a).empty() || !rulecraft::validate_code_rule(b).empty())
        throw ConfigError("combine_code_rules requires validated rules");

    if (strategy == CombineStrategy::inline_template) {
        auto combined = inline_template_combine(a, b, seed);
        auto violations = rulecraft::validate_code_rule(combined);
        if (!violations.empty()) {
            std::ostringstream msg;
            msg << "inline_template combination invalid:";
            for (const auto& v : violations) msg << " " << rulecraft::to_string(v);
            throw GenerationInvalid(msg.str());
        }
        return combined;
    }

    std::ostringstream user;
    user << "以下是两个翻译规则函数：\n\n" << rstrip(a.render()) << "\n\n" << rstrip(b.render())
         << "\n\n";
    if (strategy == CombineStrategy::func_call) {
        user << "请生成一个新函数 apply_combined_rule(" << rulecraft::kCodeRuleParams
             << ")，在函数体内依次调用上述两个函数完成翻译，并返回最终译文。";
    } else {
        user << "请生成一个新函数 apply_combined_rule(" << rulecraft::kCodeRuleParams
             << ")，将上述两个函数的处理步骤合并到同一个函数体内，并返回最终译文。";
    }

    llm::CompletionRequest req;
    req.model_id = model_id;
    req.messages = {{"system", "你是一名语言学家，同时擅长编写清晰的伪代码。"}, {"user", user.str()}};
    req.max_tokens = 1024;
    req.tags = {{"task", "combine"},
                {"function_a", a.function_name},
                {"function_b", b.function_name},
                {"strategy", to_string(strategy)}};

    auto attempt = [&](const llm::CompletionRequest& r) {
        auto code = rulecraft::parse_code_rule(client.complete(r).text,
                                               rulecraft::CodeRule::Style::application);
        auto violations = rulecraft::validate_code_rule(code);
        return std::make_pair(std::move(code), std::move(violations));
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
    msg << "combined code rule invalid after retry:";
    for (const auto& v : violations2) msg << " " << rulecraft::to_string(v);
    throw GenerationInvalid(msg.str());
}

// -- answer extraction -------------------------------------------------------

namespace {

std::string strip_label(const std::string& line) {
    static const std::regex label_re(
        "^\\s*(?:翻译结果|汉语翻译|壮语翻译|译文|翻译|IGT|Translation|translation|Answer|答案)"
        "\\s*(?::|：)\\s*");
    return std::regex_replace(line, label_re, "");
}

std::string strip_quotes(std::string s) {
    static const std::vector<std::pair<std::string, std::string>> pairs = {
        {"“", "”"}, {"\"", "\""}, {"‘", "’"}, {"'", "'"}, {"「", "」"}, {"『", "』"}};
    bool changed = true;
    while (changed) {
        changed = false;
        s = text::trim(s);
        for (const auto& [open, close] : pairs) {
            if (s.size() >= open.size() + close.size() && s.rfind(open, 0) == 0 &&
                s.compare(s.size() - close.size(), close.size(), close) == 0) {
                s = s.substr(open.size(), s.size() - open.size() - close.size());
                changed = true;
            }
        }
    }
    return s;
}

}  // namespace

std::pair<std::string, std::string> extract_answer(const std::string& raw, bool expect_igt) {
    std::vector<std::string> lines;
    for (const auto& line : split_lines(raw)) {
        auto t = text::trim(line);
        if (!t.empty()) lines.push_back(t);
    }
    if (lines.empty()) return {"", ""};
    std::string translation = strip_quotes(strip_label(lines.back()));
    std::string igt;
    if (expect_igt && lines.size() >= 2)
        igt = strip_quotes(strip_label(lines[lines.size() - 2]));
    return {translation, igt};
}

// from_cache is execution metadata, not part of the record: serialized
// records must be byte-identical between a live run and its replay.
nlohmann::json to_json(const TranslationRecord& record) {
    return {{"instance_id", record.instance_id},
            {"prompt_digest", record.prompt_digest},
            {"raw_output", record.raw_output},
            {"extracted_translation", record.extracted_translation},
            {"extracted_igt", record.extracted_igt},
            {"rule_ids_in_prompt", record.rule_ids_in_prompt},
            {"example_ids", record.example_ids},
            {"insufficient_examples", record.insufficient_examples},
            {"empty_output", record.empty_output}};
}

TranslationRecord translation_record_from_json(const nlohmann::json& j) {
    TranslationRecord record;
    record.instance_id = j.at("instance_id").get<std::string>();
    record.prompt_digest = j.value("prompt_digest", "");
    record.raw_output = j.value("raw_output", "");
    record.extracted_translation = j.value("extracted_translation", "");
    record.extracted_igt = j.value("extracted_igt", "");
    record.rule_ids_in_prompt = j.value("rule_ids_in_prompt", std::vector<std::string>{});
    record.example_ids = j.value("example_ids", std::vector<std::string>{});
    record.insufficient_examples = j.value("insufficient_examples", false);
    record.empty_output = j.value("empty_output", false);
    record.from_cache = j.value("from_cache", false);
    return record;
}

TranslationRecord translate(const corpus::ParallelExample& instance, const corpus::Rulebook& book,
                            const ApplicationConfig& cfg, llm::Client& client,
                            const PromptOverrides& overrides) {
    auto built = build_prompt(instance, book, cfg, overrides);
    auto result = client.complete(built.request);

    TranslationRecord record;
    record.instance_id = instance.id;
    record.prompt_digest = llm::cache_digest(built.request);
    record.raw_output = result.text;
    auto [translation, igt] = extract_answer(result.text, cfg.use_igt);
    record.extracted_translation = std::move(translation);
    record.extracted_igt = std::move(igt);
    record.rule_ids_in_prompt = built.rule_ids_in_prompt;
    record.example_ids = built.example_ids;
    record.insufficient_examples = built.insufficient_examples;
    record.empty_output = text::trim(result.text).empty();
    record.from_cache = result.meta.from_cache;
    return record;
}

}  // namespace rulemt::translator
