#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

// Small UTF-8 / tokenization helpers shared by the corpus, metrics and
// rule-engine modules. Zhuang is Latin-script and whitespace-separated;
// Chinese is unsegmented, so the CJK side is segmented greedily against
// the per-example lexicon keys.
namespace rulemt::text {

// Decodes the first UTF-8 codepoint of `s`; `len` receives its byte length.
// Invalid bytes decode as U+FFFD with len 1.
char32_t decode_first(std::string_view s, std::size_t& len);

// One string per codepoint.
std::vector<std::string> utf8_chars(std::string_view s);

std::size_t codepoint_count(std::string_view s);

bool is_cjk(char32_t cp);

// True if the first codepoint of the (single-codepoint) string is CJK.
bool is_cjk_char(std::string_view utf8_char);

bool contains_cjk(std::string_view s);

std::string trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);

// Plain whitespace split.
std::vector<std::string> whitespace_tokens(std::string_view s);

// Whitespace split with leading/trailing ASCII punctuation peeled off into
// separate tokens ("gou." -> "gou", ".").
std::vector<std::string> latin_tokens(std::string_view s);

// Greedy longest-match segmentation against `keys` (whitespace acts as a
// separator). Unmatched CJK codepoints become single-character tokens;
// unmatched Latin runs become whole-word tokens.
std::vector<std::string> segment_by_lexicon(std::string_view s,
                                            const std::vector<std::string>& keys);

enum class Tokenization { whitespace, cjk_char, mixed };

Tokenization tokenization_from_string(std::string_view name);
std::string to_string(Tokenization t);

// whitespace: split on whitespace. cjk_char: every non-space codepoint is a
// token. mixed: CJK codepoints are single tokens, the rest splits on
// whitespace.
std::vector<std::string> metric_tokens(std::string_view s, Tokenization t);

// Space-joined Latin-side detokenization; sentence punctuation tokens attach
// to the preceding word. sentence_case uppercases the first ASCII letter.
std::string join_lo(const std::vector<std::string>& tokens, bool sentence_case = false);

// CJK-side detokenization: plain concatenation.
std::string join_hi(const std::vector<std::string>& tokens);

// Splits one trailing sentence-final punctuation mark (ASCII or fullwidth)
// off `s`; returns {body, punct} where punct may be empty.
std::pair<std::string, std::string> split_final_punct(std::string_view s);

// Maps sentence punctuation across scripts: 。-> "." etc. and back.
std::string punct_for_lo(std::string_view punct);
std::string punct_for_hi(std::string_view punct);

// Context-budget heuristic: each CJK codepoint counts 1 token-equivalent,
// each Latin word 1.3.
double estimate_tokens(std::string_view s);

}  // namespace rulemt::text
