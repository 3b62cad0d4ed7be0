#include "rulemt/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "rulemt/errors.hpp"
#include "rulemt/text.hpp"

namespace rulemt::retrieval {

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::bm25: return "bm25";
        case Strategy::full_book: return "full_book";
        case Strategy::rule_by_rule: return "rule_by_rule";
    }
    return "";
}

std::string to_string(RuleFormat f) { return f == RuleFormat::text ? "text" : "code"; }

Strategy strategy_from_string(std::string_view name) {
    if (name == "bm25") return Strategy::bm25;
    if (name == "full_book") return Strategy::full_book;
    if (name == "rule_by_rule") return Strategy::rule_by_rule;
    throw SchemaError("unknown retrieval strategy: " + std::string(name));
}

RuleFormat rule_format_from_string(std::string_view name) {
    if (name == "text") return RuleFormat::text;
    if (name == "code") return RuleFormat::code;
    throw SchemaError("unknown rule format: " + std::string(name));
}

namespace {

bool bigram_material(std::string_view utf8_char) {
    std::size_t len = 0;
    char32_t cp = text::decode_first(utf8_char, len);
    if (!text::is_cjk(cp)) return false;
    // CJK punctuation and fullwidth forms separate, they don't form bigrams
    if (cp >= 0x3000 && cp <= 0x303F) return false;
    if (cp >= 0xFF00 && cp <= 0xFFEF) return false;
    return true;
}

bool punct_only_token(const std::string& tok) {
    return std::all_of(tok.begin(), tok.end(),
                       [](unsigned char c) { return std::ispunct(c); });
}

}  // namespace

std::vector<std::string> bm25_tokens(std::string_view s) {
    std::vector<std::string> tokens;
    std::vector<std::string> cjk_run;
    std::string latin_buf;

    auto flush_cjk = [&] {
        if (cjk_run.size() == 1) {
            tokens.push_back(cjk_run[0]);
        } else {
            for (std::size_t i = 0; i + 1 < cjk_run.size(); ++i)
                tokens.push_back(cjk_run[i] + cjk_run[i + 1]);
        }
        cjk_run.clear();
    };
    auto flush_latin = [&] {
        for (const auto& word : text::latin_tokens(latin_buf)) {
            if (punct_only_token(word)) continue;
            tokens.push_back(text::to_lower_ascii(word));
        }
        latin_buf.clear();
    };

    for (const auto& ch : text::utf8_chars(s)) {
        if (bigram_material(ch)) {
            if (!latin_buf.empty()) flush_latin();
            cjk_run.push_back(ch);
            continue;
        }
        if (!cjk_run.empty()) flush_cjk();
        std::size_t len = 0;
        char32_t cp = text::decode_first(ch, len);
        if (cp < 0x80) {
            latin_buf.push_back(static_cast<char>(cp));
        } else if (text::is_cjk(cp)) {
            flush_latin();  // fullwidth/CJK punctuation acts as a separator
        } else {
            latin_buf += ch;
        }
    }
    if (!cjk_run.empty()) flush_cjk();
    flush_latin();
    return tokens;
}

Bm25Index::Bm25Index(std::vector<std::pair<std::string, std::string>> docs, Bm25Params params)
    : params_(params) {
    std::sort(docs.begin(), docs.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    double total_len = 0.0;
    for (auto& [id, body] : docs) {
        Doc doc;
        doc.id = std::move(id);
        for (auto& tok : bm25_tokens(body)) ++doc.tf[tok];
        for (const auto& [term, _] : doc.tf) ++df_[term];
        doc.len = 0;
        for (const auto& [_, f] : doc.tf) doc.len += static_cast<std::size_t>(f);
        total_len += static_cast<double>(doc.len);
        docs_.push_back(std::move(doc));
    }
    if (!docs_.empty()) avgdl_ = total_len / static_cast<double>(docs_.size());
}

std::vector<std::pair<std::string, double>> Bm25Index::query(std::string_view sentence,
                                                             int k) const {
    std::vector<std::pair<std::string, double>> scored;
    if (docs_.empty() || k < 1 || avgdl_ <= 0.0) return scored;

    std::set<std::string> terms;
    for (auto& tok : bm25_tokens(sentence)) terms.insert(std::move(tok));
    const double n = static_cast<double>(docs_.size());

    for (const auto& doc : docs_) {
        double score = 0.0;
        for (const auto& term : terms) {
            auto tf_it = doc.tf.find(term);
            if (tf_it == doc.tf.end()) continue;
            auto df_it = df_.find(term);
            double df = static_cast<double>(df_it->second);
            double idf = std::log((n - df + 0.5) / (df + 0.5) + 1.0);
            double f = static_cast<double>(tf_it->second);
            double norm = params_.k1 * (1.0 - params_.b +
                                        params_.b * static_cast<double>(doc.len) / avgdl_);
            score += idf * f * (params_.k1 + 1.0) / (f + norm);
        }
        if (score > 0.0) scored.emplace_back(doc.id, score);
    }
    // docs_ is id-ordered, so a stable sort leaves ties in id order
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    if (scored.size() > static_cast<std::size_t>(k)) scored.resize(static_cast<std::size_t>(k));
    return scored;
}

Bm25Index bm25_build(const corpus::Rulebook& book, DocScope scope, Bm25Params params) {
    if (book.rules.empty()) throw EmptyBook("cannot index an empty rulebook");
    std::vector<std::pair<std::string, std::string>> docs;
    docs.reserve(book.rules.size());
    for (const auto& rule : book.rules) {
        std::string body = rule.text;
        if (scope == DocScope::rule_text_plus_examples) {
            for (const auto* ex : book.examples_for_rule(rule.id)) {
                body += " " + ex->source_text + " " + ex->target_text;
            }
        }
        docs.emplace_back(rule.id, std::move(body));
    }
    return Bm25Index(std::move(docs), params);
}

nlohmann::json to_json(const RetrievalResult& result) {
    nlohmann::json j;
    j["instance_id"] = result.instance_id;
    j["strategy"] = to_string(result.strategy);
    j["rule_format"] = to_string(result.rule_format);
    j["retrieved"] = result.retrieved;
    j["raw_llm_output"] = result.raw_llm_output;
    j["parse_failed"] = result.parse_failed;
    j["partial"] = result.partial;
    j["dropped"] = result.dropped;
    j["flagged"] = result.flagged;
    return j;
}

RetrievalResult retrieval_result_from_json(const nlohmann::json& j) {
    RetrievalResult result;
    result.instance_id = j.at("instance_id").get<std::string>();
    result.strategy = strategy_from_string(j.at("strategy").get<std::string>());
    result.rule_format = rule_format_from_string(j.at("rule_format").get<std::string>());
    result.retrieved = j.at("retrieved").get<std::vector<std::string>>();
    result.raw_llm_output = j.value("raw_llm_output", std::string());
    result.parse_failed = j.value("parse_failed", false);
    result.partial = j.value("partial", false);
    result.dropped = j.value("dropped", std::vector<std::string>{});
    result.flagged = j.value("flagged", std::vector<std::string>{});
    return result;
}

const std::string& query_sentence(const corpus::ParallelExample& instance,
                                  engine::Direction direction) {
    return direction == engine::Direction::hi_to_lo ? instance.source_text
                                                    : instance.target_text;
}

namespace {

std::string target_language_name(engine::Direction direction) {
    return direction == engine::Direction::hi_to_lo ? "壮语" : "中文";
}

}  // namespace

RetrievalResult retrieve_full_book(const corpus::ParallelExample& instance,
                                   const corpus::Rulebook& book, const RetrievalOptions& options,
                                   llm::Client& client) {
    const std::string book_str = corpus::book_string(
        book, options.rule_format == RuleFormat::code ? corpus::BookFormat::code_retrieval
                                                      : corpus::BookFormat::text);
    const std::string& sentence = query_sentence(instance, options.direction);

    std::ostringstream user;
    user << "语法书：\n" << book_str << "\n\n";
    if (options.include_lexicon)
        user << "字典：\n" << corpus::lexicon_block(instance, options.direction) << "\n";
    user << "句子：" << sentence << "\n"
         << "请列出将该句子翻译成" << target_language_name(options.direction)
         << "时适用的规则编号。";

    llm::CompletionRequest req;
    req.model_id = options.model_id;
    req.messages = {{"system", "你是一名语言学家，熟悉壮语和中文的语法。"},
                    {"user", user.str()}};
    req.max_tokens = 256;
    req.tags = {{"task", "full_book"}, {"instance_id", instance.id}};

    double estimated = 0.0;
    for (const auto& m : req.messages) estimated += text::estimate_tokens(m.content);
    if (estimated > static_cast<double>(options.context_budget))
        throw ContextOverflow("full-book prompt for " + instance.id + " estimated at " +
                              std::to_string(static_cast<long long>(estimated)) +
                              " tokens, budget " + std::to_string(options.context_budget));

    RetrievalResult result;
    result.instance_id = instance.id;
    result.strategy = Strategy::full_book;
    result.rule_format = options.rule_format;
    result.raw_llm_output = client.complete(req).text;

    std::set<std::string> seen;
    // any integer token is a candidate rule number
    const std::string& raw = result.raw_llm_output;
    for (std::size_t i = 0; i < raw.size();) {
        if (!std::isdigit(static_cast<unsigned char>(raw[i]))) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < raw.size() && std::isdigit(static_cast<unsigned char>(raw[j]))) ++j;
        std::string digits = raw.substr(i, j - i);
        i = j;
        unsigned long number = 0;
        try {
            number = std::stoul(digits);
        } catch (const std::exception&) {
            result.dropped.push_back(digits);
            continue;
        }
        if (number < 1 || number > book.rules.size()) {
            result.dropped.push_back(digits);
            continue;
        }
        const std::string& id = book.rules[number - 1].id;
        if (seen.insert(id).second) result.retrieved.push_back(id);
    }

    // verbatim rule-text citations: a reply containing a long enough prefix
    // of a rule's text counts as citing it
    for (const auto& rule : book.rules) {
        if (seen.count(rule.id)) continue;
        auto chars = text::utf8_chars(rule.text);
        const std::size_t want = 15;
        if (chars.size() < want) {
            if (raw.find(rule.text) == std::string::npos) continue;
        } else {
            std::string prefix;
            for (std::size_t c = 0; c < want; ++c) prefix += chars[c];
            if (raw.find(prefix) == std::string::npos) continue;
        }
        seen.insert(rule.id);
        result.retrieved.push_back(rule.id);
    }

    result.parse_failed = result.retrieved.empty();
    return result;
}

namespace {

enum class Answer { yes, no, unparsed };

Answer normalize_answer(const std::string& raw) {
    std::string trimmed = text::trim(raw);
    if (trimmed.rfind("是", 0) == 0) return Answer::yes;
    if (trimmed.rfind("否", 0) == 0) return Answer::no;
    auto tokens = text::latin_tokens(trimmed);
    for (const auto& tok : tokens) {
        if (punct_only_token(tok)) continue;
        std::string low = text::to_lower_ascii(tok);
        if (low == "yes") return Answer::yes;
        if (low == "no") return Answer::no;
        break;  // only the first word counts
    }
    return Answer::unparsed;
}

}  // namespace

RetrievalResult retrieve_rule_by_rule(const corpus::ParallelExample& instance,
                                      const corpus::Rulebook& book,
                                      const RetrievalOptions& options, llm::Client& client) {
    const std::string& sentence = query_sentence(instance, options.direction);
    const std::string lexicon =
        options.include_lexicon ? corpus::lexicon_block(instance, options.direction) : "";

    const std::size_t n = book.rules.size();
    std::vector<Answer> answers(n, Answer::no);
    std::vector<char> failed(n, 0);
    std::vector<char> unparsed(n, 0);

    llm::parallel_for(n, client.config().concurrency, [&](std::size_t i) {
        const auto& rule = book.rules[i];
        std::string rule_block;
        if (options.rule_format == RuleFormat::code) {
            if (!rule.code_retrieval)
                throw MissingCodeError("rule " + rule.id + " has no retrieval code");
            rule_block = rule.code_retrieval->render();
        } else {
            rule_block = rule.text;
        }

        std::ostringstream user;
        user << "规则：\n" << rule_block << "\n\n";
        if (!lexicon.empty()) user << "字典：\n" << lexicon << "\n";
        user << "句子：" << sentence << "\n"
             << "将该句子翻译成" << target_language_name(options.direction)
             << "时是否需要应用这条规则？只回答“是”或“否”。";

        llm::CompletionRequest req;
        req.model_id = options.model_id;
        req.messages = {{"system", "你是一名语言学家，熟悉壮语和中文的语法。"},
                        {"user", user.str()}};
        req.max_tokens = 64;
        req.tags = {{"task", "classify"},
                    {"instance_id", instance.id},
                    {"rule_id", rule.id}};

        try {
            auto answer = normalize_answer(client.complete(req).text);
            answers[i] = answer == Answer::yes ? Answer::yes : Answer::no;
            if (answer == Answer::unparsed) unparsed[i] = 1;
        } catch (const MissingCodeError&) {
            throw;
        } catch (const Error&) {
            failed[i] = 1;
        }
    });

    RetrievalResult result;
    result.instance_id = instance.id;
    result.strategy = Strategy::rule_by_rule;
    result.rule_format = options.rule_format;
    for (std::size_t i = 0; i < n; ++i) {
        if (answers[i] == Answer::yes) result.retrieved.push_back(book.rules[i].id);
        if (unparsed[i]) result.flagged.push_back(book.rules[i].id);
        if (failed[i]) result.partial = true;
    }
    return result;
}

}  // namespace rulemt::retrieval
