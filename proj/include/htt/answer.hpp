#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "htt/common/text.hpp"
#include "htt/grammar.hpp"

// Answer scoring: crop the last sentence, collect full-word matches of the
// answer vocabulary, and accept only a single distinct match equal to gold.
namespace htt {

namespace detail {

inline bool is_terminator(char c) { return c == '.' || c == '!' || c == '?' || c == '\n'; }

inline bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '-' || c == '_';
}

}  // namespace detail

inline std::string last_sentence(std::string_view text) {
  std::size_t end = text.size();
  while (end > 0 && (text::is_space(text[end - 1]) || detail::is_terminator(text[end - 1]))) --end;
  std::size_t begin = end;
  while (begin > 0 && !detail::is_terminator(text[begin - 1])) --begin;
  return std::string(text::trim(text.substr(begin, end - begin)));
}

// Maximal runs of word characters.
inline std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!detail::is_word_char(s[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && detail::is_word_char(s[j])) ++j;
    out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

/// Distinct vocabulary items present as whole words in the last sentence (case-insensitive).
inline std::set<std::string> matched_answers(std::string_view text, const std::vector<std::string>& vocabulary) {
  std::set<std::string> vocab;
  for (const auto& v : vocabulary) vocab.insert(text::lower(v));
  std::set<std::string> out;
  for (const auto& w : words(last_sentence(text))) {
    const auto lw = text::lower(w);
    if (vocab.count(lw)) out.insert(lw);
  }
  return out;
}

/// Maximal tokens of the last sentence written only in the base-b alphabet (case-sensitive).
inline std::set<std::string> matched_numerals(std::string_view text, int base) {
  const std::string_view alphabet = grammar::kDigits.substr(0, static_cast<std::size_t>(base));
  std::set<std::string> out;
  for (const auto& w : words(last_sentence(text))) {
    if (w.find_first_not_of(alphabet) == std::string::npos) out.insert(w);
  }
  return out;
}

inline std::optional<std::string> extract_answer(std::string_view text, const std::vector<std::string>& vocabulary) {
  auto m = matched_answers(text, vocabulary);
  if (m.size() != 1) return std::nullopt;
  return *m.begin();
}

inline std::optional<std::string> extract_numeral(std::string_view text, int base) {
  auto m = matched_numerals(text, base);
  if (m.size() != 1) return std::nullopt;
  return *m.begin();
}

inline bool match_answer(std::string_view prediction, std::string_view gold, const std::vector<std::string>& vocabulary) {
  const auto m = matched_answers(prediction, vocabulary);
  return m.size() == 1 && *m.begin() == text::lower(gold);
}

inline bool match_numeral(std::string_view prediction, std::string_view gold, int base) {
  const auto m = matched_numerals(prediction, base);
  return m.size() == 1 && *m.begin() == gold;
}

}  // namespace htt
