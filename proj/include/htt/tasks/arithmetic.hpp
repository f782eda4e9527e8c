#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "htt/answer.hpp"
#include "htt/common/assets.hpp"
#include "htt/common/error.hpp"
#include "htt/common/rng.hpp"
#include "htt/common/text.hpp"
#include "htt/grammar.hpp"
#include "htt/rulelib.hpp"
#include "htt/task.hpp"
#include "htt/template.hpp"
#include "htt/trace.hpp"

namespace htt::arith {

inline void check_base(int base) {
  if (base != 9 && base != 11 && base != 16) throw DomainError("base must be 9, 11 or 16");
}

inline std::string_view alphabet(int base) {
  check_base(base);
  return grammar::kDigits.substr(0, static_cast<std::size_t>(base));
}

inline int digit_value(int base, char c) {
  const int v = grammar::detail::digit_value(c, base);
  if (v < 0) throw DomainError(std::string("'") + c + "' is not a base-" + std::to_string(base) + " digit");
  return v;
}

inline char digit_char(int v) { return grammar::kDigits.at(static_cast<std::size_t>(v)); }

inline std::string to_base(int base, std::uint64_t n) {
  check_base(base);
  if (n == 0) return "0";
  std::string s;
  while (n) {
    s.insert(s.begin(), digit_char(static_cast<int>(n % static_cast<std::uint64_t>(base))));
    n /= static_cast<std::uint64_t>(base);
  }
  return s;
}

inline std::uint64_t from_base(int base, std::string_view s) {
  check_base(base);
  if (s.empty()) throw DomainError("empty numeral");
  std::uint64_t n = 0;
  for (char c : s) n = n * static_cast<std::uint64_t>(base) + static_cast<std::uint64_t>(digit_value(base, c));
  return n;
}

struct ArithInstance {
  std::uint64_t seed_id = 0;
  int base = 16;
  std::string x;
  std::string y;
  std::string gold;

  int digits() const { return static_cast<int>(x.size()); }
};

struct Column {
  bool carry_in = false;
  char d1 = '0';
  char d2 = '0';
  std::string result;  // carry digit then sum digit
};

struct Addition {
  std::string sum;
  std::vector<Column> steps;  // least significant column first
};

/// Right-to-left column addition of equal-length numerals.
inline Addition oracle_add(int base, std::string_view x, std::string_view y) {
  check_base(base);
  if (x.empty() || x.size() != y.size()) throw DomainError("operands must be nonempty and equally long");
  Addition a;
  bool carry = false;
  std::string digits;
  for (std::size_t i = x.size(); i-- > 0;) {
    const int s = digit_value(base, x[i]) + digit_value(base, y[i]) + (carry ? 1 : 0);
    Column c{carry, x[i], y[i], std::string{s >= base ? '1' : '0', digit_char(s % base)}};
    carry = s >= base;
    digits.insert(digits.begin(), c.result[1]);
    a.steps.push_back(std::move(c));
  }
  if (carry) digits.insert(digits.begin(), '1');
  a.sum = std::move(digits);
  return a;
}

inline Rule column_rule(int base, const Column& c) { return grammar::arith_rule(base, c.carry_in, c.d1, c.d2, c.result); }

inline std::vector<std::string> column_key(const Column& c) {
  return {c.carry_in ? "carry" : "no_carry", std::string(1, c.d1), std::string(1, c.d2)};
}

/// Two-character results: carry digit then sum digit.
inline const std::vector<std::string>& conclusion_domain(int base) {
  static const auto build = [](int b) {
    std::vector<std::string> out;
    for (char carry : {'0', '1'}) {
      for (char d : alphabet(b)) out.push_back(std::string{carry, d});
    }
    return out;
  };
  static const std::vector<std::string> d9 = build(9), d11 = build(11), d16 = build(16);
  check_base(base);
  return base == 9 ? d9 : base == 11 ? d11 : d16;
}

/// `n` instances of `digit_count`-digit operands with nonzero leading digits.
inline std::vector<ArithInstance> generate(int base, int digit_count, std::size_t n, std::uint64_t seed,
                                           std::uint64_t first_id = 0) {
  check_base(base);
  if (digit_count < 2 || digit_count > 4) throw DomainError("digit count must lie in 2..4");
  std::vector<ArithInstance> out;
  out.reserve(n);
  auto numeral = [&](Rng& rng) {
    std::string s(1, digit_char(static_cast<int>(rng.between(1, base - 1))));
    for (int i = 1; i < digit_count; ++i) s += digit_char(static_cast<int>(rng.below(static_cast<std::uint64_t>(base))));
    return s;
  };
  for (std::size_t i = 0; i < n; ++i) {
    const auto id = first_id + i;
    Rng rng(derive_seed(seed, id));
    ArithInstance inst;
    inst.seed_id = id;
    inst.base = base;
    inst.x = numeral(rng);
    inst.y = numeral(rng);
    inst.gold = oracle_add(base, inst.x, inst.y).sum;
    out.push_back(std::move(inst));
  }
  return out;
}

inline Trace oracle_trace(const ArithInstance& inst) {
  const auto add = oracle_add(inst.base, inst.x, inst.y);
  Trace t;
  for (const auto& c : add.steps) t.steps.push_back({column_rule(inst.base, c), Provenance::generated, std::nullopt});
  t.answer = add.sum;
  return t;
}

inline std::set<Rule> oracle_rules(const std::vector<ArithInstance>& instances) {
  std::set<Rule> out;
  for (const auto& inst : instances) {
    for (const auto& c : oracle_add(inst.base, inst.x, inst.y).steps) out.insert(column_rule(inst.base, c));
  }
  return out;
}

/// Every rule any 2-digit addition with nonzero leading digits can use.
inline std::set<Rule> two_digit_oracle_rules(int base) {
  std::set<Rule> out;
  const auto a = alphabet(base);
  for (char x1 : a.substr(1)) {
    for (char x0 : a) {
      for (char y1 : a.substr(1)) {
        for (char y0 : a) {
          for (const auto& c : oracle_add(base, std::string{x1, x0}, std::string{y1, y0}).steps) {
            out.insert(column_rule(base, c));
          }
        }
      }
    }
  }
  return out;
}

/// All 2·b·b column facts, each with tally (1, 1).
inline RuleLibrary full_oracle_library(int base) {
  RuleLibrary lib(grammar::arith_task_id(base));
  for (bool carry : {false, true}) {
    for (char d1 : alphabet(base)) {
      for (char d2 : alphabet(base)) {
        const int s = digit_value(base, d1) + digit_value(base, d2) + (carry ? 1 : 0);
        lib.add(grammar::arith_rule(base, carry, d1, d2, std::string{s >= base ? '1' : '0', digit_char(s % base)}),
                RuleTally{1, 1});
      }
    }
  }
  return lib;
}

/// Column addition driven by emitted results.
class Problem final : public StepProblem {
 public:
  explicit Problem(const ArithInstance& inst) : inst_(inst) {}

  bool done() const override { return col_ >= inst_.x.size(); }
  std::vector<std::string> key() const override {
    const auto i = inst_.x.size() - 1 - col_;
    return {carry_ ? "carry" : "no_carry", std::string(1, inst_.x[i]), std::string(1, inst_.y[i])};
  }
  std::optional<std::string> truth() const override {
    const auto i = inst_.x.size() - 1 - col_;
    const int b = inst_.base;
    const int s = digit_value(b, inst_.x[i]) + digit_value(b, inst_.y[i]) + (carry_ ? 1 : 0);
    return std::string{s >= b ? '1' : '0', digit_char(s % b)};
  }
  Rule make_rule(const std::string& conclusion) const override {
    const auto i = inst_.x.size() - 1 - col_;
    return grammar::arith_rule(inst_.base, carry_, inst_.x[i], inst_.y[i], conclusion);
  }
  bool advance(const Rule& applied) override {
    const auto& r = applied.conclusion;
    if (applied.tag_path != key() || r.size() != 2 || (r[0] != '0' && r[0] != '1') ||
        grammar::detail::digit_value(r[1], inst_.base) < 0) {
      return false;
    }
    digits_.insert(digits_.begin(), r[1]);
    carry_ = r[0] == '1';
    ++col_;
    return true;
  }
  std::optional<std::string> answer() const override {
    if (!done()) return std::nullopt;
    return carry_ ? "1" + digits_ : digits_;
  }
  const std::vector<std::string>& domain() const override { return conclusion_domain(inst_.base); }

 private:
  const ArithInstance& inst_;
  std::size_t col_ = 0;
  bool carry_ = false;
  std::string digits_;
};

enum class MissingPolicy { abstain, fallback };

struct ExecPolicy {
  MissingPolicy missing = MissingPolicy::abstain;
  // Supplies a conclusion for a key absent from the library (fallback policy).
  std::function<std::string(const std::vector<std::string>& key)> generator;
};

struct ExecResult {
  std::optional<std::string> answer;
  Trace trace;
  std::vector<std::vector<std::string>> missing_keys;
  bool malformed = false;
};

/// Runs the column procedure, retrieving each column's rule from `library`.
inline ExecResult execute_with_library(const ArithInstance& inst, const RuleLibrary& library,
                                       const ExecPolicy& policy = {}) {
  if (library.task_id() != grammar::arith_task_id(inst.base)) {
    throw TaskMismatchError("library " + library.task_id() + " used on base-" + std::to_string(inst.base));
  }
  ExecResult res;
  Problem p(inst);
  while (!p.done()) {
    const auto key = p.key();
    Rule applied;
    Provenance prov = Provenance::retrieved;
    if (const Rule* r = library.best(key)) {
      applied = *r;
    } else {
      res.missing_keys.push_back(key);
      if (policy.missing == MissingPolicy::abstain || !policy.generator) break;
      try {
        applied = p.make_rule(policy.generator(key));
      } catch (const GrammarError&) {
        res.malformed = true;
        break;
      }
      prov = Provenance::generated;
    }
    if (!p.advance(applied)) {
      res.malformed = true;
      break;
    }
    res.trace.steps.push_back({applied, prov, std::nullopt});
  }
  if (p.done() && !res.malformed) res.answer = p.answer();
  res.trace.answer = res.answer;
  return res;
}

// ---- text ----------------------------------------------------------------

namespace detail {

inline std::string spaced(std::string_view s) {
  std::vector<std::string> parts;
  for (char c : s) parts.emplace_back(1, c);
  return text::join(parts, ", ");
}

inline std::string digits_phrase(const std::string& digits) {
  return "So far the answer has " + std::to_string(digits.size()) + (digits.size() == 1 ? " digit: " : " digits: ") +
         spaced(digits) + ".";
}

}  // namespace detail

/// Trace in the few-shot exemplar idiom; `retrieve` adds the tag path before each rule.
inline std::string render_trace(const ArithInstance& inst, const Trace& t, bool retrieve = false) {
  std::vector<std::string> lines;
  std::vector<std::string> cols;
  for (std::size_t i = inst.x.size(); i-- > 0;) cols.push_back(std::string{inst.x[i]} + " + " + inst.y[i]);
  lines.push_back(inst.x + " is " + detail::spaced(inst.x) + ". " + inst.y + " is " + detail::spaced(inst.y) +
                  ". So the steps are " + text::join(cols, ", ") + ".");
  bool carry = false;
  std::string digits;
  for (const auto& s : t.steps) {
    const std::string& r = s.rule.conclusion;
    const std::string shown = (r.size() == 2 && r[0] == '0') ? r.substr(1) : r;
    std::string line = carry ? "The carry is 1. " : "There is no carry. ";
    if (retrieve) line += xml_tags(s.rule, 3);
    line += s.rule.text + " " + shown + " is " + detail::spaced(r) + ". ";
    carry = !r.empty() && r[0] == '1';
    line += carry ? "So we set the carry to 1. " : "So we clear the carry. ";
    digits.insert(digits.begin(), r.back());
    line += "Prepend " + std::string(1, r.back()) + " to the answer. " + detail::digits_phrase(digits);
    lines.push_back(std::move(line));
  }
  if (carry) {
    digits.insert(digits.begin(), '1');
    lines.push_back("The carry is 1. Prepend 1 to the answer. " + detail::digits_phrase(digits));
  } else {
    lines.push_back("There is no carry. " + detail::digits_phrase(digits));
  }
  lines.push_back("Therefore, the answer is " + t.answer.value_or(digits) + ".");
  return text::join(lines, "\n");
}

/// Extracts "d1 + d2 = r" and "d1 + d2 + 1 = r" clauses over the base alphabet, plus the answer.
inline Trace parse_trace(int base, std::string_view raw) {
  static const std::regex clause(R"(([0-9A-Z]) \+ ([0-9A-Z])( \+ 1)? = ([0-9A-Z]+))");
  Trace t;
  t.raw_text = std::string(raw);
  const std::string s(raw);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), clause); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    const auto pos = static_cast<std::size_t>(m.position(0));
    if (pos > 0 && std::isalnum(static_cast<unsigned char>(s[pos - 1]))) continue;
    const auto end = pos + static_cast<std::size_t>(m.length(0));
    if (end < s.size() && std::isalnum(static_cast<unsigned char>(s[end]))) continue;
    try {
      t.steps.push_back({grammar::arith_rule(base, m[3].matched, m[1].str()[0], m[2].str()[0], m[4].str()),
                         Provenance::generated, std::nullopt});
    } catch (const GrammarError&) {
    }
  }
  t.answer = extract_numeral(raw, base);
  return t;
}

struct PromptOptions {
  const RuleLibrary* library = nullptr;
  RenderOptions render;
};

inline std::string prompt_dir(int base) { return "prompts/arith/" + std::to_string(base) + "/"; }

namespace detail {

inline void add_library(TemplateContext& ctx, const PromptOptions& opt) {
  RenderOptions plain = opt.render;
  plain.tag_depth = 0;
  ctx.set_list("rules", rule_lines(*opt.library, plain));
  ctx.filters["add_xml_tags"] = [tagged = rule_lines(*opt.library, opt.render)](const std::string&, std::size_t i) {
    return tagged.at(i);
  };
}

}  // namespace detail

/// Main prompt. LtM shares the CoT prompt; its per-rule sub-prompt is ltm_rule_prompt.
inline std::string build_prompt(const ArithInstance& inst, Mode mode, const PromptOptions& opt = {}) {
  TemplateContext ctx;
  ctx.set("base", std::to_string(inst.base)).set("x", inst.x).set("y", inst.y);
  std::string file = prompt_dir(inst.base);
  if (mode == Mode::zero_shot_cot) {
    if (opt.library) throw DomainError("zero-shot prompting takes no library");
    file += "zero_shot.txt";
  } else {
    file += opt.library ? "few_shot_cot_htt.txt" : "few_shot_cot.txt";
  }
  if (opt.library) detail::add_library(ctx, opt);
  return Template(read_prompt_asset(file)).render(ctx);
}

/// Single-fact sub-prompt: "In base-b, what is d1 + d2[ + 1]?".
inline std::string ltm_rule_prompt(int base, const std::vector<std::string>& key, const PromptOptions& opt = {}) {
  TemplateContext ctx;
  ctx.set("x", key.at(1)).set("y", key.at(0) == "carry" ? key.at(2) + " + 1" : key.at(2));
  if (opt.library) detail::add_library(ctx, opt);
  return Template(read_prompt_asset(prompt_dir(base) + (opt.library ? "ltm_htt_rule.txt" : "ltm_rule.txt"))).render(ctx);
}

/// Exemplar operand pairs of the few-shot prompts, chosen per base to cover
/// the same carry patterns as the base-16 set.
inline const std::vector<std::pair<std::string, std::string>>& exemplar_pairs(int base) {
  static const std::vector<std::pair<std::string, std::string>> b16 = {
      {"EC", "DD"}, {"18", "9F"}, {"79", "8B"}, {"A6", "94"}, {"54", "D3"}};
  static const std::vector<std::pair<std::string, std::string>> b11 = {
      {"A9", "87"}, {"16", "8A"}, {"69", "4A"}, {"A3", "85"}, {"32", "A4"}};
  static const std::vector<std::pair<std::string, std::string>> b9 = {
      {"87", "65"}, {"15", "64"}, {"58", "38"}, {"73", "54"}, {"42", "64"}};
  check_base(base);
  return base == 16 ? b16 : base == 11 ? b11 : b9;
}

/// Few-shot prompt files for `base`, keyed by file name.
inline std::map<std::string, std::string> exemplar_prompts(int base) {
  const std::string b = std::to_string(base);
  const std::string knowledge = "Instruction: " + std::string(kDefaultPreamble) +
                                "\nKnowledge:\n{{ rules[0] | add_xml_tags }}\n\xE2\x80\xA6\n{{ rules[n - 1] | add_xml_tags }}\n\n";
  const std::string query = "Question: In base-" + b + ", what is {{ x }} + {{ y }}?\nAnswer:";
  std::string cot, htt, ltm, ltm_htt;
  const auto& pairs = exemplar_pairs(base);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& [x, y] = pairs[k];
    ArithInstance inst{0, base, x, y, oracle_add(base, x, y).sum};
    const Trace t = oracle_trace(inst);
    const std::string q = "Question: In base-" + b + ", what is " + x + " + " + y + "?\nAnswer:\n";
    cot += q + render_trace(inst, t) + "\n\n";
    htt += q + render_trace(inst, t, true) + "\n\n";
    const Rule& fact = t.steps.at(k % 2 == 0 ? 1 : 0).rule;
    const std::string lhs = fact.text.substr(0, fact.text.find(" ="));
    ltm += "Question: In base-" + b + ", what is " + lhs + "?\nAnswer: " + fact.text + "\n\n";
    ltm_htt += "Question: In base-" + b + ", what is " + lhs + "?\nAnswer: We retrieve " + xml_tags(fact, 3) + fact.text + "\n\n";
  }
  return {{"zero_shot.txt", "Question: In base-{{ base }}, what is {{ x }} + {{ y }}?\nAnswer: Let\xE2\x80\x99s think step by step."},
          {"few_shot_cot.txt", cot + query},
          {"few_shot_cot_htt.txt", knowledge + htt + query},
          {"ltm_rule.txt", ltm + query},
          {"ltm_htt_rule.txt", knowledge + ltm_htt + query}};
}

// ---- serialization ---------------------------------------------------------

inline nlohmann::ordered_json to_json(const ArithInstance& i) {
  nlohmann::ordered_json j;
  j["task"] = "arith";
  j["base"] = i.base;
  j["x"] = i.x;
  j["y"] = i.y;
  j["gold"] = i.gold;
  j["seed_id"] = i.seed_id;
  return j;
}

inline ArithInstance from_json(const nlohmann::ordered_json& j) {
  if (j.value("task", "") != "arith") throw TaskMismatchError("not an arithmetic instance");
  ArithInstance i;
  i.base = j.at("base").get<int>();
  i.x = j.at("x").get<std::string>();
  i.y = j.at("y").get<std::string>();
  i.gold = j.at("gold").get<std::string>();
  i.seed_id = j.value("seed_id", std::uint64_t{0});
  if (oracle_add(i.base, i.x, i.y).sum != i.gold) throw DomainError("gold is not the sum of x and y");
  return i;
}

}  // namespace htt::arith
