#include "rulemt/text.hpp"

#include <algorithm>
#include <cctype>

namespace rulemt::text {

char32_t decode_first(std::string_view s, std::size_t& len) {
    if (s.empty()) {
        len = 0;
        return 0;
    }
    const auto b0 = static_cast<unsigned char>(s[0]);
    if (b0 < 0x80) {
        len = 1;
        return b0;
    }
    int need = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        need = 1;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        need = 2;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        need = 3;
        cp = b0 & 0x07;
    } else {
        len = 1;
        return 0xFFFD;
    }
    if (s.size() < static_cast<std::size_t>(need) + 1) {
        len = 1;
        return 0xFFFD;
    }
    for (int i = 1; i <= need; ++i) {
        const auto b = static_cast<unsigned char>(s[i]);
        if ((b & 0xC0) != 0x80) {
            len = 1;
            return 0xFFFD;
        }
        cp = (cp << 6) | (b & 0x3F);
    }
    len = static_cast<std::size_t>(need) + 1;
    return cp;
}

std::vector<std::string> utf8_chars(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        std::size_t len = 0;
        decode_first(s.substr(i), len);
        if (len == 0) break;
        out.emplace_back(s.substr(i, len));
        i += len;
    }
    return out;
}

std::size_t codepoint_count(std::string_view s) {
    std::size_t n = 0, i = 0;
    while (i < s.size()) {
        std::size_t len = 0;
        decode_first(s.substr(i), len);
        if (len == 0) break;
        i += len;
        ++n;
    }
    return n;
}

bool is_cjk(char32_t cp) {
    return (cp >= 0x4E00 && cp <= 0x9FFF) ||    // unified ideographs
           (cp >= 0x3400 && cp <= 0x4DBF) ||    // extension A
           (cp >= 0xF900 && cp <= 0xFAFF) ||    // compatibility ideographs
           (cp >= 0x3000 && cp <= 0x303F) ||    // CJK punctuation
           (cp >= 0x3040 && cp <= 0x30FF) ||    // kana
           (cp >= 0xFF00 && cp <= 0xFFEF);      // fullwidth forms
}

bool is_cjk_char(std::string_view utf8_char) {
    std::size_t len = 0;
    return is_cjk(decode_first(utf8_char, len));
}

bool contains_cjk(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
        std::size_t len = 0;
        if (is_cjk(decode_first(s.substr(i), len))) return true;
        if (len == 0) break;
        i += len;
    }
    return false;
}

std::string trim(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

std::string to_lower_ascii(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::vector<std::string> whitespace_tokens(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        std::size_t j = i;
        while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
        if (j > i) out.emplace_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

namespace {

bool is_ascii_punct(char c) {
    static constexpr std::string_view kPunct = ".,!?;:\"'()";
    return kPunct.find(c) != std::string_view::npos;
}

}  // namespace

std::vector<std::string> latin_tokens(std::string_view s) {
    std::vector<std::string> out;
    for (const auto& word : whitespace_tokens(s)) {
        std::size_t a = 0, b = word.size();
        std::vector<std::string> leading, trailing;
        while (a < b && is_ascii_punct(word[a])) leading.emplace_back(1, word[a++]);
        while (b > a && is_ascii_punct(word[b - 1])) trailing.emplace_back(1, word[--b]);
        for (auto& p : leading) out.push_back(std::move(p));
        if (b > a) out.emplace_back(word.substr(a, b - a));
        for (auto it = trailing.rbegin(); it != trailing.rend(); ++it) out.push_back(std::move(*it));
    }
    return out;
}

std::vector<std::string> segment_by_lexicon(std::string_view s,
                                            const std::vector<std::string>& keys) {
    // Longest keys first so the greedy match prefers multi-character entries.
    std::vector<std::string_view> sorted(keys.begin(), keys.end());
    std::sort(sorted.begin(), sorted.end(),
              [](std::string_view a, std::string_view b) {
                  return a.size() != b.size() ? a.size() > b.size() : a < b;
              });

    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        if (std::isspace(static_cast<unsigned char>(s[i]))) {
            ++i;
            continue;
        }
        std::string_view rest = s.substr(i);
        bool matched = false;
        for (const auto key : sorted) {
            if (!key.empty() && rest.substr(0, key.size()) == key) {
                out.emplace_back(key);
                i += key.size();
                matched = true;
                break;
            }
        }
        if (matched) continue;
        std::size_t len = 0;
        const char32_t cp = decode_first(rest, len);
        if (len == 0) break;
        if (cp < 0x80 && (std::isalnum(static_cast<unsigned char>(s[i])))) {
            // Consume a whole Latin run.
            std::size_t j = i;
            while (j < s.size() && std::isalnum(static_cast<unsigned char>(s[j]))) ++j;
            out.emplace_back(s.substr(i, j - i));
            i = j;
        } else {
            out.emplace_back(s.substr(i, len));
            i += len;
        }
    }
    return out;
}

Tokenization tokenization_from_string(std::string_view name) {
    if (name == "whitespace") return Tokenization::whitespace;
    if (name == "cjk_char") return Tokenization::cjk_char;
    if (name == "mixed") return Tokenization::mixed;
    return Tokenization::mixed;
}

std::string to_string(Tokenization t) {
    switch (t) {
        case Tokenization::whitespace: return "whitespace";
        case Tokenization::cjk_char: return "cjk_char";
        case Tokenization::mixed: return "mixed";
    }
    return "mixed";
}

std::vector<std::string> metric_tokens(std::string_view s, Tokenization t) {
    if (t == Tokenization::whitespace) return whitespace_tokens(s);
    std::vector<std::string> out;
    std::string latin;
    auto flush_latin = [&] {
        if (!latin.empty()) {
            for (auto& w : whitespace_tokens(latin)) out.push_back(std::move(w));
            latin.clear();
        }
    };
    std::size_t i = 0;
    while (i < s.size()) {
        std::size_t len = 0;
        const char32_t cp = decode_first(s.substr(i), len);
        if (len == 0) break;
        const bool is_space = (cp < 0x80 && std::isspace(static_cast<char>(cp))) || cp == 0x3000;
        if (t == Tokenization::cjk_char) {
            if (!is_space) out.emplace_back(s.substr(i, len));
        } else if (is_cjk(cp) && cp != 0x3000) {
            flush_latin();
            out.emplace_back(s.substr(i, len));
        } else if (cp == 0x3000) {
            // Ideographic space separates but whitespace_tokens cannot split it.
            flush_latin();
        } else {
            latin.append(s.substr(i, len));
        }
        i += len;
    }
    flush_latin();
    return out;
}

std::string join_lo(const std::vector<std::string>& tokens, bool sentence_case) {
    std::string out;
    for (const auto& tok : tokens) {
        const bool attach = tok.size() == 1 && is_ascii_punct(tok[0]);
        if (!out.empty() && !attach) out.push_back(' ');
        out += tok;
    }
    if (sentence_case && !out.empty() && std::islower(static_cast<unsigned char>(out[0])))
        out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
    return out;
}

std::string join_hi(const std::vector<std::string>& tokens) {
    std::string out;
    for (const auto& tok : tokens) out += tok;
    return out;
}

std::pair<std::string, std::string> split_final_punct(std::string_view s) {
    const std::string trimmed = trim(s);
    static const std::vector<std::string> kFinal = {"。", "？", "！", "．", ".", "?", "!"};
    for (const auto& p : kFinal) {
        if (trimmed.size() >= p.size() &&
            trimmed.compare(trimmed.size() - p.size(), p.size(), p) == 0) {
            return {trim(trimmed.substr(0, trimmed.size() - p.size())), p};
        }
    }
    return {trimmed, ""};
}

std::string punct_for_lo(std::string_view punct) {
    if (punct == "。" || punct == "．") return ".";
    if (punct == "？") return "?";
    if (punct == "！") return "!";
    return std::string(punct);
}

std::string punct_for_hi(std::string_view punct) {
    if (punct == ".") return "。";
    if (punct == "?") return "？";
    if (punct == "!") return "！";
    return std::string(punct);
}

double estimate_tokens(std::string_view s) {
    double est = 0.0;
    std::string latin;
    std::size_t i = 0;
    while (i < s.size()) {
        std::size_t len = 0;
        const char32_t cp = decode_first(s.substr(i), len);
        if (len == 0) break;
        if (is_cjk(cp)) {
            est += 1.0;
            if (!latin.empty()) {
                est += 1.3 * static_cast<double>(whitespace_tokens(latin).size());
                latin.clear();
            }
        } else {
            latin.append(s.substr(i, len));
        }
        i += len;
    }
    if (!latin.empty()) est += 1.3 * static_cast<double>(whitespace_tokens(latin).size());
    return est;
}

}  // namespace rulemt::text
