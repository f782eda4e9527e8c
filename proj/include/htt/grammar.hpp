#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "htt/common/error.hpp"
#include "htt/common/text.hpp"
#include "htt/rule.hpp"

// Canonical rule grammars of the three task families.
//
//   kinship   "X's Y is Z."           tags [X, Y]            conclusion Z
//   arith-B   "d1 + d2 = R."          tags [no_carry, d1, d2] conclusion 2 chars
//             "d1 + d2 + 1 = R."      tags [carry, d1, d2]
//   listfn    free text, period-terminated; no tags; conclusion = text
namespace htt::grammar {

inline constexpr std::string_view kDigits = "0123456789ABCDEF";

inline bool is_arith_task(std::string_view id) {
  return id == "arith-9" || id == "arith-11" || id == "arith-16";
}

inline int arith_base(std::string_view id) {
  if (id == "arith-9") return 9;
  if (id == "arith-11") return 11;
  if (id == "arith-16") return 16;
  throw TaskMismatchError("not an arithmetic task: " + std::string(id));
}

inline std::string arith_task_id(int base) { return "arith-" + std::to_string(base); }

inline bool is_known_task(std::string_view id) {
  return id == "kinship" || id == "listfn" || is_arith_task(id);
}

inline void validate_tag(std::string_view tag) {
  if (tag.empty()) throw GrammarError("empty tag");
  for (char c : tag) {
    if (text::is_space(c) || c == '<' || c == '>') throw GrammarError("invalid tag token: " + std::string(tag));
  }
}

namespace detail {

inline bool is_kin_token(std::string_view t) {
  if (t.empty() || t.front() == '-' || t.back() == '-') return false;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const char c = t[i];
    if (c == '-') {
      if (t[i - 1] == '-') return false;
    } else if (c < 'a' || c > 'z') {
      return false;
    }
  }
  return true;
}

inline std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

inline int digit_value(char c, int base) {
  const auto pos = kDigits.find(c);
  if (pos == std::string_view::npos || static_cast<int>(pos) >= base) return -1;
  return static_cast<int>(pos);
}

}  // namespace detail

inline Rule kinship_rule(std::string_view r1, std::string_view r2, std::string_view r3) {
  if (!detail::is_kin_token(r1) || !detail::is_kin_token(r2) || !detail::is_kin_token(r3)) {
    throw GrammarError("kinship rule tokens must be lowercase words");
  }
  Rule r;
  r.tag_path = {std::string(r1), std::string(r2)};
  r.text = std::string(r1) + "'s " + std::string(r2) + " is " + std::string(r3) + ".";
  r.conclusion = std::string(r3);
  return r;
}

inline Rule parse_kinship_rule(std::string_view raw) {
  std::string s = text::lower(text::normalize_ws(raw));
  s = detail::replace_all(std::move(s), "\xE2\x80\x99", "'");
  if (!s.empty() && s.back() == '.') s.pop_back();
  const auto poss = s.find("'s ");
  if (poss == std::string::npos) throw GrammarError("kinship rule lacks \"X's Y\": " + std::string(raw));
  const auto is = s.find(" is ", poss + 3);
  if (is == std::string::npos) throw GrammarError("kinship rule lacks \" is \": " + std::string(raw));
  const std::string r1 = s.substr(0, poss);
  const std::string r2 = s.substr(poss + 3, is - poss - 3);
  const std::string r3 = s.substr(is + 4);
  if (!detail::is_kin_token(r1) || !detail::is_kin_token(r2) || !detail::is_kin_token(r3)) {
    throw GrammarError("kinship rule tokens must be single lowercase words: " + std::string(raw));
  }
  return kinship_rule(r1, r2, r3);
}

// `result` is the column result as written (1 or 2+ characters).
inline Rule arith_rule(int base, bool carry, char d1, char d2, std::string_view result) {
  if (detail::digit_value(d1, base) < 0 || detail::digit_value(d2, base) < 0) {
    throw GrammarError(std::string("digit outside base-") + std::to_string(base) + " alphabet");
  }
  if (result.empty()) throw GrammarError("empty arithmetic result");
  for (char c : result) {
    if (!((c >= '0' && c <= '9') || (c >= 'A' && c <= 'Z'))) throw GrammarError("invalid result character");
  }
  std::string conclusion = result.size() == 1 ? "0" + std::string(result) : std::string(result);
  std::string shown = (conclusion.size() == 2 && conclusion[0] == '0') ? conclusion.substr(1) : conclusion;
  Rule r;
  r.tag_path = {carry ? "carry" : "no_carry", std::string(1, d1), std::string(1, d2)};
  r.text = std::string(1, d1) + " + " + std::string(1, d2) + (carry ? " + 1" : "") + " = " + shown + ".";
  r.conclusion = std::move(conclusion);
  return r;
}

inline Rule parse_arith_rule(int base, std::string_view raw) {
  std::string s = text::normalize_ws(raw);
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (!s.empty() && s.back() == '.') s.pop_back();
  // "d1 + d2 = R" or "d1 + d2 + 1 = R"
  auto bad = [&] { return GrammarError("not an arithmetic rule: " + std::string(raw)); };
  if (s.size() < 9 || s[1] != ' ' || s[2] != '+' || s[3] != ' ' || s[5] != ' ') throw bad();
  const char d1 = s[0];
  const char d2 = s[4];
  bool carry = false;
  std::size_t eq = 6;
  if (s.compare(5, 5, " + 1 ") == 0) {
    carry = true;
    eq = 10;
  }
  if (s.size() < eq + 3 || s.compare(eq, 2, "= ") != 0) throw bad();
  const std::string result = s.substr(eq + 2);
  if (result.empty() || result.find(' ') != std::string::npos) throw bad();
  return arith_rule(base, carry, d1, d2, result);
}

inline Rule listfn_rule(std::string_view raw) {
  std::string t = text::ensure_period(text::normalize_ws(raw));
  if (t == ".") throw GrammarError("empty list-function rule");
  Rule r;
  r.text = t;
  r.conclusion = t;
  return r;
}

/// Canonicalizes `text` under the grammar of `task_id`.
inline Rule parse_rule(std::string_view task_id, std::string_view raw) {
  if (task_id == "kinship") return parse_kinship_rule(raw);
  if (task_id == "listfn") return listfn_rule(raw);
  if (is_arith_task(task_id)) return parse_arith_rule(arith_base(task_id), raw);
  throw TaskMismatchError("unknown task id: " + std::string(task_id));
}

/// True iff `rule` is exactly what the task grammar produces from its own text.
inline bool conforms(std::string_view task_id, const Rule& rule) {
  try {
    const Rule canon = parse_rule(task_id, rule.text);
    return canon.text == rule.text && canon.tag_path == rule.tag_path && canon.conclusion == rule.conclusion;
  } catch (const GrammarError&) {
    return false;
  }
}

/// Same premise and tags, new conclusion.
inline Rule with_conclusion(std::string_view task_id, const Rule& rule, std::string_view conclusion) {
  if (task_id == "kinship") return kinship_rule(rule.tag_path.at(0), rule.tag_path.at(1), conclusion);
  if (task_id == "listfn") return listfn_rule(conclusion);
  if (is_arith_task(task_id)) {
    return arith_rule(arith_base(task_id), rule.tag_path.at(0) == "carry", rule.tag_path.at(1).at(0),
                      rule.tag_path.at(2).at(0), conclusion);
  }
  throw TaskMismatchError("unknown task id: " + std::string(task_id));
}

/// Number of tag levels the task's hierarchy has.
inline std::size_t key_arity(std::string_view task_id) {
  if (task_id == "kinship") return 2;
  if (is_arith_task(task_id)) return 3;
  return 0;
}

}  // namespace htt::grammar
