#include "rulemt/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <regex>
#include <sstream>

#include "rulemt/errors.hpp"
#include "rulemt/text.hpp"

namespace rulemt::corpus {

std::string to_string(ActionKind a) {
    switch (a) {
        case ActionKind::add: return "add";
        case ActionKind::delete_: return "delete";
        case ActionKind::reorder: return "reorder";
        case ActionKind::break_: return "break";
        case ActionKind::select: return "select";
    }
    return "";
}

std::string to_string(Difficulty d) {
    switch (d) {
        case Difficulty::easy: return "easy";
        case Difficulty::medium: return "medium";
        case Difficulty::hard: return "hard";
    }
    return "";
}

std::string to_string(WalsDomain w) {
    switch (w) {
        case WalsDomain::morphology: return "morphology";
        case WalsDomain::nominal_categories: return "nominal_categories";
        case WalsDomain::nominal_syntax: return "nominal_syntax";
        case WalsDomain::verbal_categories: return "verbal_categories";
        case WalsDomain::word_order: return "word_order";
        case WalsDomain::simple_clauses: return "simple_clauses";
        case WalsDomain::complex_sentences: return "complex_sentences";
        case WalsDomain::lexicon: return "lexicon";
    }
    return "";
}

std::string to_string(Granularity g) {
    return g == Granularity::phrase ? "phrase" : "sentence";
}

ActionKind action_from_string(std::string_view name) {
    if (name == "add") return ActionKind::add;
    if (name == "delete") return ActionKind::delete_;
    if (name == "reorder") return ActionKind::reorder;
    if (name == "break") return ActionKind::break_;
    if (name == "select") return ActionKind::select;
    throw SchemaError("unknown action: " + std::string(name));
}

Difficulty difficulty_from_string(std::string_view name) {
    if (name == "easy") return Difficulty::easy;
    if (name == "medium") return Difficulty::medium;
    if (name == "hard") return Difficulty::hard;
    throw SchemaError("unknown difficulty: " + std::string(name));
}

WalsDomain domain_from_string(std::string_view name) {
    static const std::map<std::string_view, WalsDomain> table = {
        {"morphology", WalsDomain::morphology},
        {"nominal_categories", WalsDomain::nominal_categories},
        {"nominal_syntax", WalsDomain::nominal_syntax},
        {"verbal_categories", WalsDomain::verbal_categories},
        {"word_order", WalsDomain::word_order},
        {"simple_clauses", WalsDomain::simple_clauses},
        {"complex_sentences", WalsDomain::complex_sentences},
        {"lexicon", WalsDomain::lexicon},
    };
    auto it = table.find(name);
    if (it == table.end()) throw SchemaError("unknown wals_domain: " + std::string(name));
    return it->second;
}

Granularity granularity_from_string(std::string_view name) {
    if (name == "phrase") return Granularity::phrase;
    if (name == "sentence") return Granularity::sentence;
    throw SchemaError("unknown granularity: " + std::string(name));
}

std::set<std::string> Igt::gloss_symbols() const {
    std::set<std::string> symbols;
    for (const auto& gloss : gloss_tokens) {
        std::string piece;
        auto flush = [&] {
            bool has_upper = std::any_of(piece.begin(), piece.end(), [](unsigned char c) {
                return std::isupper(c);
            });
            bool plain = std::all_of(piece.begin(), piece.end(), [](unsigned char c) {
                return std::isupper(c) || std::isdigit(c);
            });
            if (!piece.empty() && has_upper && plain) symbols.insert(piece);
            piece.clear();
        };
        for (char c : gloss) {
            if (c == '-' || c == '.' || c == '=') {
                flush();
            } else {
                piece.push_back(c);
            }
        }
        flush();
    }
    return symbols;
}

std::map<std::string, std::string> ParallelExample::inverted_lexicon() const {
    std::map<std::string, std::string> inverted;
    for (const auto& [lo, hi] : lexicon) inverted.emplace(hi, lo);  // first key wins
    return inverted;
}

const GrammarRule* Rulebook::find_rule(std::string_view id) const {
    auto it = std::lower_bound(rules.begin(), rules.end(), id,
                               [](const GrammarRule& r, std::string_view v) { return r.id < v; });
    return it != rules.end() && it->id == id ? &*it : nullptr;
}

const ParallelExample* Rulebook::find_example(std::string_view id) const {
    auto it = std::lower_bound(
        examples.begin(), examples.end(), id,
        [](const ParallelExample& e, std::string_view v) { return e.id < v; });
    return it != examples.end() && it->id == id ? &*it : nullptr;
}

std::vector<const ParallelExample*> Rulebook::examples_for_rule(std::string_view id) const {
    std::vector<const ParallelExample*> out;
    for (const auto& ex : examples) {
        if (std::find(ex.rule_ids.begin(), ex.rule_ids.end(), id) != ex.rule_ids.end())
            out.push_back(&ex);
    }
    return out;
}

std::optional<std::size_t> Rulebook::rule_index(std::string_view id) const {
    const GrammarRule* rule = find_rule(id);
    if (!rule) return std::nullopt;
    return static_cast<std::size_t>(rule - rules.data());
}

namespace {

bool valid_id(const std::string& id) {
    if (id.empty()) return false;
    return std::all_of(id.begin(), id.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '_' || c == '.' || c == '-';
    });
}

void require_valid_id(const std::string& id, const char* what) {
    if (!valid_id(id))
        throw SchemaError(std::string(what) + " id must match [A-Za-z0-9_.-]+: \"" + id + "\"");
}

bool punct_only(const std::string& token) {
    return !token.empty() && std::all_of(token.begin(), token.end(), [](unsigned char c) {
        return std::ispunct(c);
    });
}

// Applies fn to each non-empty line of a JSONL file, converting JSON syntax
// errors into ParseError with the 1-based line number.
template <typename Fn>
void for_each_jsonl(const std::filesystem::path& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(path.filename().string() + ": " + e.what(), line_no);
        }
        try {
            fn(j);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path.filename().string() + ": " + e.what(), line_no);
        }
    }
}

}  // namespace

nlohmann::json rule_to_json(const GrammarRule& rule) {
    nlohmann::json j;
    j["id"] = rule.id;
    j["text"] = rule.text;
    j["rule_language"] = rule.rule_language;
    nlohmann::json actions = nlohmann::json::array();
    for (ActionKind a : rule.actions) actions.push_back(to_string(a));
    j["actions"] = actions;
    j["difficulty"] = to_string(rule.difficulty);
    j["wals_domain"] = to_string(rule.wals_domain);
    if (rule.code_application) j["code_application"] = rule.code_application->to_json();
    if (rule.code_retrieval) j["code_retrieval"] = rule.code_retrieval->to_json();
    if (rule.program) j["program"] = engine::to_json(*rule.program);
    return j;
}

GrammarRule rule_from_json(const nlohmann::json& j) {
    GrammarRule rule;
    rule.id = j.at("id").get<std::string>();
    require_valid_id(rule.id, "rule");
    rule.text = j.at("text").get<std::string>();
    if (rule.text.empty()) throw SchemaError("rule " + rule.id + " has empty text");
    rule.rule_language = j.value("rule_language", std::string("zh"));
    for (const auto& a : j.at("actions"))
        rule.actions.insert(action_from_string(a.get<std::string>()));
    rule.difficulty = difficulty_from_string(j.at("difficulty").get<std::string>());
    rule.wals_domain = domain_from_string(j.at("wals_domain").get<std::string>());
    if (j.contains("code_application"))
        rule.code_application = rulecraft::CodeRule::from_json(j.at("code_application"));
    if (j.contains("code_retrieval"))
        rule.code_retrieval = rulecraft::CodeRule::from_json(j.at("code_retrieval"));
    if (j.contains("program")) rule.program = engine::program_from_json(j.at("program"));
    return rule;
}

nlohmann::json example_to_json(const ParallelExample& example) {
    nlohmann::json j;
    j["id"] = example.id;
    j["rule_ids"] = example.rule_ids;
    j["source_text"] = example.source_text;
    j["target_text"] = example.target_text;
    j["lexicon"] = example.lexicon;
    j["granularity"] = to_string(example.granularity);
    if (example.igt) {
        j["igt"] = {{"surface", example.igt->surface_tokens},
                    {"gloss", example.igt->gloss_tokens}};
    }
    return j;
}

ParallelExample example_from_json(const nlohmann::json& j) {
    ParallelExample ex;
    ex.id = j.at("id").get<std::string>();
    require_valid_id(ex.id, "example");
    ex.rule_ids = j.at("rule_ids").get<std::vector<std::string>>();
    if (ex.rule_ids.empty()) throw SchemaError("example " + ex.id + " has no rule_ids");
    ex.source_text = j.at("source_text").get<std::string>();
    ex.target_text = j.at("target_text").get<std::string>();
    if (j.contains("lexicon"))
        ex.lexicon = j.at("lexicon").get<std::map<std::string, std::string>>();
    if (j.value("lexicon_keys", std::string("lo")) == "hi") {
        std::map<std::string, std::string> flipped;
        for (const auto& [hi, lo] : ex.lexicon) flipped.emplace(lo, hi);
        ex.lexicon = std::move(flipped);
    }
    ex.granularity = granularity_from_string(j.value("granularity", std::string("sentence")));
    if (j.contains("igt")) {
        Igt igt;
        igt.surface_tokens = j.at("igt").at("surface").get<std::vector<std::string>>();
        igt.gloss_tokens = j.at("igt").at("gloss").get<std::vector<std::string>>();
        if (igt.surface_tokens.size() != igt.gloss_tokens.size())
            throw SchemaError("example " + ex.id + " igt surface/gloss lengths differ");
        ex.igt = std::move(igt);
    }
    return ex;
}

Rulebook load_rulebook(const std::filesystem::path& bundle_dir) {
    Rulebook book;

    const auto manifest_path = bundle_dir / "book.json";
    std::ifstream manifest_in(manifest_path);
    if (!manifest_in) throw ParseError("cannot open " + manifest_path.string());
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(manifest_in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("book.json: " + std::string(e.what()));
    }
    book.source_language = manifest.at("source_language").get<std::string>();
    book.target_language = manifest.at("target_language").get<std::string>();
    if (manifest.contains("gloss_inventory"))
        book.gloss_inventory = manifest.at("gloss_inventory").get<std::vector<std::string>>();

    for_each_jsonl(bundle_dir / "rules.jsonl",
                   [&](const nlohmann::json& j) { book.rules.push_back(rule_from_json(j)); });
    for_each_jsonl(bundle_dir / "examples.jsonl", [&](const nlohmann::json& j) {
        book.examples.push_back(example_from_json(j));
    });

    std::sort(book.rules.begin(), book.rules.end(),
              [](const GrammarRule& a, const GrammarRule& b) { return a.id < b.id; });
    std::sort(book.examples.begin(), book.examples.end(),
              [](const ParallelExample& a, const ParallelExample& b) { return a.id < b.id; });

    for (std::size_t i = 1; i < book.rules.size(); ++i) {
        if (book.rules[i].id == book.rules[i - 1].id)
            throw IntegrityError("duplicate rule id: " + book.rules[i].id);
    }
    for (std::size_t i = 1; i < book.examples.size(); ++i) {
        if (book.examples[i].id == book.examples[i - 1].id)
            throw IntegrityError("duplicate example id: " + book.examples[i].id);
    }
    for (const auto& ex : book.examples) {
        for (const auto& rid : ex.rule_ids) {
            if (!book.find_rule(rid))
                throw IntegrityError("example " + ex.id + " references unknown rule " + rid);
        }
    }

    // Lexicon coverage is advisory: inserted particles legitimately lack
    // entries, so uncovered tokens only warn.
    for (const auto& ex : book.examples) {
        for (const auto& token : text::latin_tokens(ex.target_text)) {
            if (punct_only(token)) continue;
            if (ex.lexicon.count(text::to_lower_ascii(token))) continue;
            if (ex.lexicon.count(token)) continue;
            book.warnings.push_back("example " + ex.id + ": token \"" + token +
                                    "\" not in lexicon");
        }
    }

    return book;
}

void save_rulebook(const Rulebook& book, const std::filesystem::path& bundle_dir) {
    std::filesystem::create_directories(bundle_dir);

    nlohmann::json manifest;
    manifest["source_language"] = book.source_language;
    manifest["target_language"] = book.target_language;
    manifest["gloss_inventory"] = book.gloss_inventory;
    std::ofstream manifest_out(bundle_dir / "book.json");
    manifest_out << manifest.dump(2) << "\n";

    std::ofstream rules_out(bundle_dir / "rules.jsonl");
    for (const auto& rule : book.rules) rules_out << rule_to_json(rule).dump() << "\n";

    std::ofstream examples_out(bundle_dir / "examples.jsonl");
    for (const auto& ex : book.examples) examples_out << example_to_json(ex).dump() << "\n";
}

DatasetStats compute_stats(const Rulebook& book) {
    DatasetStats stats;
    stats.n_rules = book.rules.size();
    stats.n_examples = book.examples.size();
    for (const auto& rule : book.rules) {
        for (ActionKind a : rule.actions) ++stats.per_action[a];
        ++stats.per_difficulty[rule.difficulty];
        ++stats.per_domain[rule.wals_domain];
    }
    double src_len = 0.0;
    double tgt_len = 0.0;
    for (const auto& ex : book.examples) {
        if (ex.granularity == Granularity::phrase) {
            ++stats.n_phrase;
        } else {
            ++stats.n_sentence;
        }
        if (ex.rule_ids.size() > 1) ++stats.n_multi_rule;
        src_len += static_cast<double>(
            text::metric_tokens(ex.source_text, text::Tokenization::mixed).size());
        tgt_len += static_cast<double>(
            text::metric_tokens(ex.target_text, text::Tokenization::whitespace).size());
    }
    if (!book.examples.empty()) {
        stats.avg_example_len_source = src_len / static_cast<double>(book.examples.size());
        stats.avg_example_len_target = tgt_len / static_cast<double>(book.examples.size());
    }
    return stats;
}

std::string to_string(BookFormat f) {
    switch (f) {
        case BookFormat::text: return "text";
        case BookFormat::code_retrieval: return "code_retrieval";
        case BookFormat::code_application: return "code_application";
    }
    return "";
}

BookFormat book_format_from_string(std::string_view name) {
    if (name == "text") return BookFormat::text;
    if (name == "code_retrieval") return BookFormat::code_retrieval;
    if (name == "code_application") return BookFormat::code_application;
    throw SchemaError("unknown book format: " + std::string(name));
}

std::string book_string(const Rulebook& book, BookFormat format) {
    std::ostringstream out;
    for (std::size_t i = 0; i < book.rules.size(); ++i) {
        const auto& rule = book.rules[i];
        if (i > 0) out << "\n\n";
        if (format == BookFormat::text) {
            out << "Rule " << (i + 1) << ": " << rule.text;
            continue;
        }
        const auto& code =
            format == BookFormat::code_retrieval ? rule.code_retrieval : rule.code_application;
        if (!code) {
            throw MissingCodeError("rule " + rule.id + " has no " +
                                   (format == BookFormat::code_retrieval ? "retrieval"
                                                                         : "application") +
                                   " code");
        }
        out << "# Rule " << (i + 1) << "\n" << code->render();
    }
    return out.str();
}

std::string lexicon_block(const ParallelExample& example, engine::Direction direction) {
    std::ostringstream out;
    if (direction == engine::Direction::hi_to_lo) {
        for (const auto& [hi, lo] : example.inverted_lexicon()) out << hi << ": " << lo << "\n";
    } else {
        for (const auto& [lo, hi] : example.lexicon) out << lo << ": " << hi << "\n";
    }
    return out.str();
}

ProsePatterns ProsePatterns::from_json(const nlohmann::json& j) {
    ProsePatterns p;
    p.surface_line = j.value("surface_line", p.surface_line);
    p.gloss_line = j.value("gloss_line", p.gloss_line);
    p.translation_line = j.value("translation_line", p.translation_line);
    return p;
}

nlohmann::json ProsePatterns::to_json() const {
    return {{"surface_line", surface_line},
            {"gloss_line", gloss_line},
            {"translation_line", translation_line}};
}

namespace {

struct Paragraph {
    std::size_t offset = 0;
    std::vector<std::string> lines;
};

std::vector<Paragraph> split_paragraphs(const std::string& body) {
    std::vector<Paragraph> paragraphs;
    Paragraph current;
    std::size_t line_start = 0;
    auto flush = [&] {
        if (!current.lines.empty()) paragraphs.push_back(std::move(current));
        current = Paragraph{};
    };
    while (line_start <= body.size()) {
        std::size_t nl = body.find('\n', line_start);
        std::string line = body.substr(
            line_start, nl == std::string::npos ? std::string::npos : nl - line_start);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        bool blank = line.find_first_not_of(" \t") == std::string::npos;
        if (blank) {
            flush();
        } else {
            if (current.lines.empty()) current.offset = line_start;
            current.lines.push_back(std::move(line));
        }
        if (nl == std::string::npos) break;
        line_start = nl + 1;
    }
    flush();
    return paragraphs;
}

bool triple_matches(const std::string& surface, const std::string& gloss,
                    const std::string& translation, const std::regex& surface_re,
                    const std::regex& gloss_re, const std::regex& translation_re) {
    if (!std::regex_search(surface, surface_re)) return false;
    if (!std::regex_search(gloss, gloss_re)) return false;
    if (!std::regex_search(translation, translation_re)) return false;
    // surface and gloss must align token-for-token
    return text::whitespace_tokens(surface).size() == text::whitespace_tokens(gloss).size();
}

}  // namespace

ExtractionResult extract_from_prose(const std::string& book_text, const ProsePatterns& patterns) {
    const std::regex surface_re(patterns.surface_line);
    const std::regex gloss_re(patterns.gloss_line);
    const std::regex translation_re(patterns.translation_line);

    ExtractionResult result;
    std::optional<Paragraph> pending;
    std::vector<RawTriple> collected;

    auto flush_pending = [&] {
        if (!pending) return;
        if (collected.empty()) {
            result.skips.push_back({pending->offset, "pattern mismatch"});
        } else {
            std::string rule_text;
            for (std::size_t i = 0; i < pending->lines.size(); ++i) {
                if (i > 0) rule_text += ' ';
                rule_text += pending->lines[i];
            }
            result.entries.push_back({std::move(rule_text), std::move(collected)});
        }
        pending.reset();
        collected.clear();
    };

    for (auto& paragraph : split_paragraphs(book_text)) {
        bool is_example_block = !paragraph.lines.empty() && paragraph.lines.size() % 3 == 0;
        if (is_example_block) {
            for (std::size_t i = 0; i < paragraph.lines.size(); i += 3) {
                if (!triple_matches(paragraph.lines[i], paragraph.lines[i + 1],
                                    paragraph.lines[i + 2], surface_re, gloss_re,
                                    translation_re)) {
                    is_example_block = false;
                    break;
                }
            }
        }
        if (!is_example_block) {
            flush_pending();
            pending = std::move(paragraph);
            continue;
        }
        if (!pending) {
            result.skips.push_back({paragraph.offset, "empty paragraph"});
            continue;
        }
        for (std::size_t i = 0; i < paragraph.lines.size(); i += 3) {
            collected.push_back({paragraph.lines[i], paragraph.lines[i + 1],
                                 paragraph.lines[i + 2]});
        }
    }
    flush_pending();
    return result;
}

void write_skip_log(const ExtractionResult& result, const std::filesystem::path& path) {
    std::ofstream out(path);
    for (const auto& skip : result.skips) {
        nlohmann::json j{{"offset", skip.offset}, {"reason", skip.reason}};
        out << j.dump() << "\n";
    }
}

}  // namespace rulemt::corpus
