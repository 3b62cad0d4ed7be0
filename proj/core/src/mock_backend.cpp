#include "rulemt/mock_backend.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "rulemt/errors.hpp"
#include "rulemt/text.hpp"

namespace rulemt::llm {

std::string to_string(const MockProfile& profile) {
    switch (profile.kind) {
        case MockProfile::Kind::perfect_classifier: return "perfect_classifier";
        case MockProfile::Kind::always_yes: return "always_yes";
        case MockProfile::Kind::distracted: {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "distracted:%g", profile.p);
            return buf;
        }
        case MockProfile::Kind::perfect_translator: return "perfect_translator";
        case MockProfile::Kind::no_rule_translator: return "no_rule_translator";
    }
    return "";
}

MockProfile mock_profile_from_string(std::string_view spec) {
    MockProfile profile;
    std::string_view head = spec;
    std::string_view arg;
    if (auto colon = spec.find(':'); colon != std::string_view::npos) {
        head = spec.substr(0, colon);
        arg = spec.substr(colon + 1);
    }
    if (head == "perfect_classifier") {
        profile.kind = MockProfile::Kind::perfect_classifier;
    } else if (head == "always_yes") {
        profile.kind = MockProfile::Kind::always_yes;
    } else if (head == "distracted") {
        profile.kind = MockProfile::Kind::distracted;
        if (!arg.empty()) {
            try {
                profile.p = std::stod(std::string(arg));
            } catch (const std::exception&) {
                throw ConfigError("bad distracted probability: " + std::string(arg));
            }
            if (profile.p < 0.0 || profile.p > 1.0)
                throw ConfigError("distracted probability must be in [0,1]");
        }
    } else if (head == "perfect_translator") {
        profile.kind = MockProfile::Kind::perfect_translator;
    } else if (head == "no_rule_translator") {
        profile.kind = MockProfile::Kind::no_rule_translator;
    } else {
        throw ConfigError("unknown mock profile: " + std::string(spec));
    }
    return profile;
}

std::string oracle_translation(const corpus::ParallelExample& example,
                               const corpus::Rulebook& book, engine::Direction direction) {
    if (direction == engine::Direction::lo_to_hi) return example.source_text;

    auto [body, punct] = text::split_final_punct(example.source_text);
    auto lexicon = example.inverted_lexicon();
    std::vector<std::string> keys;
    keys.reserve(lexicon.size());
    for (const auto& [hi, _] : lexicon) keys.push_back(hi);
    auto tokens = text::segment_by_lexicon(body, keys);

    std::optional<engine::RuleProgram> composed;
    for (const auto& rid : example.rule_ids) {
        const auto* rule = book.find_rule(rid);
        if (!rule || !rule->program)
            throw ProfileError("no oracle program for rule " + rid);
        if (rule->program->direction != direction)
            throw ProfileError("oracle program for rule " + rid + " has the other direction");
        composed = composed ? engine::compose_programs(*composed, *rule->program)
                            : *rule->program;
    }
    auto applied = engine::apply_program(*composed, tokens, lexicon);
    bool sentence_case = example.granularity == corpus::Granularity::sentence;
    return text::join_lo(applied.tokens, sentence_case) + text::punct_for_lo(punct);
}

std::string lexicon_only_translation(const corpus::ParallelExample& example,
                                     engine::Direction direction) {
    if (direction == engine::Direction::hi_to_lo) {
        auto [body, punct] = text::split_final_punct(example.source_text);
        auto lexicon = example.inverted_lexicon();
        std::vector<std::string> keys;
        keys.reserve(lexicon.size());
        for (const auto& [hi, _] : lexicon) keys.push_back(hi);
        std::vector<std::string> out;
        for (const auto& tok : text::segment_by_lexicon(body, keys)) {
            auto it = lexicon.find(tok);
            if (it == lexicon.end()) {
                out.push_back(tok);
                continue;
            }
            for (auto& piece : text::whitespace_tokens(it->second)) out.push_back(std::move(piece));
        }
        bool sentence_case = example.granularity == corpus::Granularity::sentence;
        return text::join_lo(out, sentence_case) + text::punct_for_lo(punct);
    }
    auto [body, punct] = text::split_final_punct(example.target_text);
    std::vector<std::string> out;
    for (const auto& tok : text::latin_tokens(body)) {
        auto it = example.lexicon.find(text::to_lower_ascii(tok));
        if (it == example.lexicon.end()) it = example.lexicon.find(tok);
        out.push_back(it == example.lexicon.end() ? tok : it->second);
    }
    return text::join_hi(out) + text::punct_for_hi(punct);
}

MockBackend::MockBackend(std::shared_ptr<const corpus::Rulebook> book, MockProfile profile,
                         std::uint64_t seed)
    : book_(std::move(book)), profile_(profile), seed_(seed) {
    if (!book_) throw ConfigError("mock backend needs a rulebook");
}

std::string MockBackend::name() const { return "mock:" + to_string(profile_); }

namespace {

std::uint64_t fnv1a64(std::string_view s, std::uint64_t h) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

const std::string& require_tag(const CompletionRequest& req, const std::string& key) {
    auto it = req.tags.find(key);
    if (it == req.tags.end())
        throw ProfileError("mock request lacks required tag '" + key + "'");
    return it->second;
}

int tag_int(const CompletionRequest& req, const std::string& key, int fallback) {
    auto it = req.tags.find(key);
    if (it == req.tags.end()) return fallback;
    return std::stoi(it->second);
}

std::vector<std::string> split_csv(std::string_view s) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto comma = s.find(',', start);
        auto piece = s.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                     : comma - start);
        if (!piece.empty()) parts.emplace_back(piece);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return parts;
}

std::string reverse_tokens(const std::string& s) {
    auto tokens = text::whitespace_tokens(s);
    std::reverse(tokens.begin(), tokens.end());
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0) out += ' ';
        out += tokens[i];
    }
    return out;
}

}  // namespace

double MockBackend::uniform(std::initializer_list<std::string_view> salt) const {
    std::uint64_t h = fnv1a64(std::to_string(seed_), 1469598103934665603ull);
    for (auto part : salt) {
        h = fnv1a64("\x1f", h);
        h = fnv1a64(part, h);
    }
    return static_cast<double>(h >> 11) / 9007199254740992.0;  // 2^53
}

const corpus::ParallelExample& MockBackend::example_for(const CompletionRequest& req) const {
    const auto& id = require_tag(req, "instance_id");
    const auto* ex = book_->find_example(id);
    if (!ex) throw ProfileError("mock backend knows no instance '" + id + "'");
    return *ex;
}

std::string MockBackend::complete(const CompletionRequest& req) {
    const auto& task = require_tag(req, "task");
    if (task == "classify") return classify(req);
    if (task == "full_book") return full_book(req);
    if (task == "translate") return translate(req);
    if (task == "igt") return igt(req);
    if (task == "induce") return induce(req);
    if (task == "convert") return convert(req);
    if (task == "combine") return combine(req);
    throw ProfileError("mock backend cannot serve task '" + task + "'");
}

std::string MockBackend::classify(const CompletionRequest& req) const {
    if (profile_.kind == MockProfile::Kind::always_yes) return "是";
    const auto& ex = example_for(req);
    const auto& rule_id = require_tag(req, "rule_id");
    bool gold = std::find(ex.rule_ids.begin(), ex.rule_ids.end(), rule_id) != ex.rule_ids.end();
    if (profile_.kind == MockProfile::Kind::distracted) {
        bool correct = uniform({ex.id, rule_id, "classify"}) < profile_.p;
        if (!correct) gold = !gold;
    }
    return gold ? "是" : "否";
}

std::string MockBackend::full_book(const CompletionRequest& req) const {
    const auto& ex = example_for(req);
    std::vector<std::string> ids(ex.rule_ids.begin(), ex.rule_ids.end());
    if (profile_.kind == MockProfile::Kind::always_yes) {
        ids.clear();
        for (const auto& rule : book_->rules) ids.push_back(rule.id);
    } else if (profile_.kind == MockProfile::Kind::distracted &&
               uniform({ex.id, "full_book"}) >= profile_.p) {
        // Confused reply: cite one wrong rule instead of the gold set.
        std::size_t pick =
            static_cast<std::size_t>(uniform({ex.id, "full_book_pick"}) *
                                     static_cast<double>(book_->rules.size()));
        pick = std::min(pick, book_->rules.size() - 1);
        ids = {book_->rules[pick].id};
    }
    std::ostringstream out;
    out << "相关规则：";
    bool first = true;
    for (const auto& id : ids) {
        auto index = book_->rule_index(id);
        if (!index) continue;
        if (!first) out << ", ";
        out << "Rule " << (*index + 1);
        first = false;
    }
    if (first) out << "无";
    return out.str();
}

std::string MockBackend::translate(const CompletionRequest& req) const {
    const auto& ex = example_for(req);
    auto direction = engine::direction_from_string(require_tag(req, "direction"));

    bool gold_in_prompt = true;
    if (auto it = req.tags.find("rule_ids_in_prompt"); it != req.tags.end()) {
        auto in_prompt = split_csv(it->second);
        for (const auto& rid : ex.rule_ids) {
            if (std::find(in_prompt.begin(), in_prompt.end(), rid) == in_prompt.end()) {
                gold_in_prompt = false;
                break;
            }
        }
    }

    std::string translation;
    if (profile_.kind == MockProfile::Kind::no_rule_translator || !gold_in_prompt) {
        translation = lexicon_only_translation(ex, direction);
    } else if (profile_.kind == MockProfile::Kind::distracted) {
        int n_irrelevant = tag_int(req, "n_irrelevant", 0);
        double keep = std::pow(profile_.p, n_irrelevant + 1);
        std::string gold = oracle_translation(ex, *book_, direction);
        translation = uniform({ex.id, "translate"}) < keep ? gold : reverse_tokens(gold);
    } else {
        translation = oracle_translation(ex, *book_, direction);
    }

    std::ostringstream out;
    if (req.tags.count("igt")) {
        const auto* source =
            direction == engine::Direction::hi_to_lo ? &ex.source_text : &ex.target_text;
        auto [body, punct] = text::split_final_punct(*source);
        (void)punct;
        out << "IGT: " << body << "\n";
    }
    out << "翻译结果：" << translation;
    return out.str();
}

std::string MockBackend::igt(const CompletionRequest& req) const {
    if (auto it = req.tags.find("instance_id"); it != req.tags.end()) {
        const auto* ex = book_->find_example(it->second);
        if (ex && ex->igt) {
            std::ostringstream out;
            for (std::size_t i = 0; i < ex->igt->surface_tokens.size(); ++i)
                out << (i ? " " : "") << ex->igt->surface_tokens[i];
            out << "\n";
            for (std::size_t i = 0; i < ex->igt->gloss_tokens.size(); ++i)
                out << (i ? " " : "") << ex->igt->gloss_tokens[i];
            return out.str();
        }
    }
    const auto& sentence = require_tag(req, "sentence");
    std::map<std::string, std::string> lexicon;
    if (auto it = req.tags.find("lexicon"); it != req.tags.end())
        lexicon = nlohmann::json::parse(it->second).get<std::map<std::string, std::string>>();
    auto [body, punct] = text::split_final_punct(sentence);
    (void)punct;
    auto tokens = text::whitespace_tokens(body);
    std::ostringstream surface, gloss;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        surface << (i ? " " : "") << tokens[i];
        auto it = lexicon.find(text::to_lower_ascii(tokens[i]));
        gloss << (i ? " " : "") << (it != lexicon.end() ? it->second : tokens[i]);
    }
    return surface.str() + "\n" + gloss.str();
}

std::string MockBackend::induce(const CompletionRequest& req) const {
    const auto& rule_id = require_tag(req, "induced_from");
    const auto* rule = book_->find_rule(rule_id);
    if (!rule) throw ProfileError("mock backend knows no rule '" + rule_id + "'");
    return rule->text;
}

namespace {

std::string synth_code(const corpus::GrammarRule& rule, rulecraft::CodeRule::Style style) {
    std::ostringstream out;
    out << "# " << rule.text << "\n";
    if (style == rulecraft::CodeRule::Style::application) {
        out << "# 1. 使用词典逐词翻译源句。\n"
            << "# 2. 按照规则调整语序并组装译文。\n"
            << "def apply_rule(source_sentence, dictionary):\n"
            << "    tokens = tokenize(source_sentence)\n"
            << "    target_tokens = [dictionary.get(token, token) for token in tokens]\n"
            << "    target_sentence = ' '.join(target_tokens)\n"
            << "    return target_sentence\n";
    } else {
        out << "# 1. 检查句子中是否出现与规则相关的词。\n"
            << "# 2. 出现则返回 True，否则返回 False。\n"
            << "def check_whether_apply(source_sentence, dictionary):\n"
            << "    tokens = tokenize(source_sentence)\n"
            << "    for token in tokens:\n"
            << "        if token in dictionary:\n"
            << "            return True\n"
            << "    return False\n";
    }
    return out.str();
}

}  // namespace

std::string MockBackend::convert(const CompletionRequest& req) const {
    const auto& rule_id = require_tag(req, "rule_id");
    const auto* rule = book_->find_rule(rule_id);
    if (!rule) throw ProfileError("mock backend knows no rule '" + rule_id + "'");
    auto style = rulecraft::code_style_from_string(require_tag(req, "style"));
    const auto& stored = style == rulecraft::CodeRule::Style::application ? rule->code_application
                                                                          : rule->code_retrieval;
    if (stored) return stored->render();
    return synth_code(*rule, style);
}

std::string MockBackend::combine(const CompletionRequest& req) const {
    const auto& fn_a = require_tag(req, "function_a");
    const auto& fn_b = require_tag(req, "function_b");
    const auto& strategy = require_tag(req, "strategy");
    std::ostringstream out;
    out << "# 组合规则：先应用 " << fn_a << "，再应用 " << fn_b << "。\n";
    if (strategy == "func_call") {
        out << "def apply_combined_rule(source_sentence, dictionary):\n"
            << "    intermediate_sentence = " << fn_a << "(source_sentence, dictionary)\n"
            << "    target_sentence = " << fn_b << "(intermediate_sentence, dictionary)\n"
            << "    return target_sentence\n";
    } else {
        out << "# 将 " << fn_a << " 与 " << fn_b << " 的处理步骤合并为一个函数。\n"
            << "def apply_combined_rule(source_sentence, dictionary):\n"
            << "    tokens = tokenize(source_sentence)\n"
            << "    target_tokens = [dictionary.get(token, token) for token in tokens]\n"
            << "    target_sentence = ' '.join(target_tokens)\n"
            << "    return target_sentence\n";
    }
    return out.str();
}

}  // namespace rulemt::llm
