#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "htt/common/error.hpp"
#include "htt/common/rng.hpp"
#include "htt/common/text.hpp"
#include "htt/grammar.hpp"
#include "htt/rule.hpp"

namespace htt {

inline constexpr std::string_view kLibraryFormat = "httlab-rulelib/1";
inline constexpr std::string_view kDefaultPreamble =
    "When you answer the questions, try to use the provided knowledge whenever possible. "
    "Try not to invent knowledge by yourself unless necessary.";

class RuleLibrary {
 public:
  using Entries = std::map<Rule, RuleTally>;

  RuleLibrary() = default;
  explicit RuleLibrary(std::string task_id) : task_id_(std::move(task_id)) {
    if (!grammar::is_known_task(task_id_)) throw TaskMismatchError("unknown task id: " + task_id_);
  }

  const std::string& task_id() const { return task_id_; }
  const Entries& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  bool contains(const Rule& r) const { return entries_.count(r) != 0; }
  RuleTally tally(const Rule& r) const {
    auto it = entries_.find(r);
    return it == entries_.end() ? RuleTally{} : it->second;
  }

  // Counts one training example. Duplicate rules within `rules` count once.
  void record(std::span<const Rule> rules, bool answer_correct) {
    std::set<Rule> distinct;
    for (const auto& r : rules) {
      check_rule(r);
      distinct.insert(r);
    }
    for (const auto& r : distinct) {
      auto& t = entries_[r];
      t.occurrence += 1;
      if (answer_correct) t.correct += 1;
    }
  }

  // Adds `t` to the rule's tally (inserting it if absent).
  void add(const Rule& r, RuleTally t) {
    check_rule(r);
    if (t.occurrence < 0 || t.correct < 0 || t.correct > t.occurrence) {
      throw DomainError("tally must satisfy 0 <= correct <= occurrence: " + r.text);
    }
    auto& dst = entries_[r];
    dst.occurrence += t.occurrence;
    dst.correct += t.correct;
  }

  RuleLibrary filter(const FilterParams& params) const {
    params.validate();
    RuleLibrary out(task_id_);
    out.meta = meta;
    for (const auto& [r, t] : entries_) {
      if (t.occurrence >= params.k && confidence(t) + 1e-12 >= params.p) out.entries_.emplace(r, t);
    }
    return out;
  }

  // Rules whose tag_path equals `tags`, in sorted order.
  std::vector<std::pair<Rule, RuleTally>> matching(const std::vector<std::string>& tags) const {
    std::vector<std::pair<Rule, RuleTally>> out;
    for (auto it = entries_.lower_bound(Rule{tags, "", ""}); it != entries_.end() && it->first.tag_path == tags; ++it) {
      out.emplace_back(*it);
    }
    return out;
  }

  // Rules whose tag_path starts with `prefix`, in sorted order.
  std::vector<std::pair<Rule, RuleTally>> under(const std::vector<std::string>& prefix) const {
    std::vector<std::pair<Rule, RuleTally>> out;
    for (auto it = entries_.lower_bound(Rule{prefix, "", ""}); it != entries_.end(); ++it) {
      const auto& tp = it->first.tag_path;
      if (tp.size() < prefix.size() || !std::equal(prefix.begin(), prefix.end(), tp.begin())) break;
      out.emplace_back(*it);
    }
    return out;
  }

  // Highest-confidence rule for `tags`; ties go to the lexicographically smaller text.
  const Rule* best(const std::vector<std::string>& tags) const {
    const Rule* pick = nullptr;
    double pick_conf = -1.0;
    for (auto it = entries_.lower_bound(Rule{tags, "", ""}); it != entries_.end() && it->first.tag_path == tags; ++it) {
      const double c = it->second.occurrence > 0 ? confidence(it->second) : -0.5;
      if (c > pick_conf) {
        pick = &it->first;
        pick_conf = c;
      }
    }
    return pick;
  }

  std::vector<Rule> rules() const {
    std::vector<Rule> out;
    out.reserve(entries_.size());
    for (const auto& [r, t] : entries_) out.push_back(r);
    return out;
  }

  friend bool operator==(const RuleLibrary& a, const RuleLibrary& b) {
    if (a.task_id_ != b.task_id_ || a.entries_.size() != b.entries_.size()) return false;
    for (auto ia = a.entries_.begin(), ib = b.entries_.begin(); ia != a.entries_.end(); ++ia, ++ib) {
      if (ia->first != ib->first || ia->first.conclusion != ib->first.conclusion || ia->second != ib->second) {
        return false;
      }
    }
    return true;
  }

  // Free-form provenance (captions, run settings); persisted verbatim.
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();

 private:
  void check_rule(const Rule& r) const {
    for (const auto& tag : r.tag_path) grammar::validate_tag(tag);
    if (!grammar::conforms(task_id_, r)) {
      throw GrammarError("rule does not match the " + task_id_ + " grammar: " + r.text);
    }
  }

  std::string task_id_;
  Entries entries_;
};

inline RuleLibrary record_example(RuleLibrary library, std::span<const Rule> rules, bool answer_correct) {
  library.record(rules, answer_correct);
  return library;
}

inline RuleLibrary merge(std::span<const RuleLibrary> libraries) {
  if (libraries.empty()) throw DomainError("merge needs at least one library");
  RuleLibrary out(libraries.front().task_id());
  out.meta = libraries.front().meta;
  for (const auto& lib : libraries) {
    if (lib.task_id() != out.task_id()) {
      throw TaskMismatchError("cannot merge " + lib.task_id() + " into " + out.task_id());
    }
    for (const auto& [r, t] : lib.entries()) out.add(r, t);
  }
  return out;
}

inline RuleLibrary merge(const RuleLibrary& a, const RuleLibrary& b) {
  const RuleLibrary both[] = {a, b};
  return merge(both);
}

inline std::string xml_tags(const Rule& r, std::size_t depth) {
  std::string out;
  for (std::size_t i = 0; i < std::min(depth, r.tag_path.size()); ++i) out += "<" + r.tag_path[i] + ">";
  return out;
}

inline std::string tagged_line(const Rule& r, std::size_t depth) { return xml_tags(r, depth) + r.text; }

struct RenderOptions {
  std::size_t tag_depth = 3;
  bool sorted = true;
  std::uint64_t shuffle_seed = 0;
  std::string preamble = std::string(kDefaultPreamble);
};

inline std::vector<std::string> rule_lines(const RuleLibrary& lib, const RenderOptions& opt = {}) {
  if (opt.tag_depth > 3) throw DomainError("tag depth must lie in 0..3");
  std::vector<std::string> out;
  out.reserve(lib.size());
  for (const auto& [r, t] : lib.entries()) out.push_back(tagged_line(r, opt.tag_depth));
  if (!opt.sorted) {
    Rng rng(opt.shuffle_seed);
    rng.shuffle(std::span<std::string>(out));
  }
  return out;
}

// "Instruction: <preamble>\nKnowledge:\n<line>\n<line>..." without a trailing newline.
inline std::string render_block(const RuleLibrary& lib, const RenderOptions& opt = {}) {
  std::string out = "Instruction: " + opt.preamble + "\nKnowledge:";
  for (const auto& line : rule_lines(lib, opt)) out += "\n" + line;
  return out;
}

struct ParsedLine {
  std::vector<std::string> shown_tags;
  Rule rule;
};

// Inverse of render_block: recovers each line's visible tags and the rule.
inline std::vector<ParsedLine> parse_block(std::string_view task_id, std::string_view block) {
  std::vector<ParsedLine> out;
  bool in_knowledge = false;
  for (const auto& raw : text::lines(block)) {
    if (!in_knowledge) {
      in_knowledge = raw == "Knowledge:";
      continue;
    }
    if (raw.empty()) break;
    ParsedLine pl;
    std::string_view rest = raw;
    while (!rest.empty() && rest.front() == '<') {
      const auto close = rest.find('>');
      if (close == std::string_view::npos) throw GrammarError("unterminated tag: " + raw);
      pl.shown_tags.emplace_back(rest.substr(1, close - 1));
      rest.remove_prefix(close + 1);
    }
    pl.rule = grammar::parse_rule(task_id, rest);
    out.push_back(std::move(pl));
  }
  return out;
}

/// Replaces every conclusion by a different element of `domain`.
///
/// Rules sharing a premise never collapse into one entry, so the entry count
/// and all tag paths are preserved.
inline RuleLibrary randomize_conclusions(const RuleLibrary& lib, std::uint64_t seed,
                                         const std::vector<std::string>& domain) {
  if (domain.empty()) throw DomainError("conclusion domain is empty");
  RuleLibrary out(lib.task_id());
  out.meta = lib.meta;
  Rng rng(seed);
  std::map<std::vector<std::string>, std::set<std::string>> taken;
  for (const auto& [r, t] : lib.entries()) {
    auto& used = taken[r.tag_path];
    std::vector<const std::string*> options;
    for (const auto& c : domain) {
      if (c != r.conclusion && !used.count(c)) options.push_back(&c);
    }
    if (options.empty()) throw DomainError("no alternative conclusion available for: " + r.text);
    const std::string& pick = *options[rng.below(options.size())];
    used.insert(pick);
    out.add(grammar::with_conclusion(lib.task_id(), r, pick), t);
  }
  return out;
}

namespace detail {

inline std::size_t line_of(std::string_view s, std::size_t byte) {
  return 1 + static_cast<std::size_t>(std::count(s.begin(), s.begin() + std::min(byte, s.size()), '\n'));
}

inline nlohmann::ordered_json rule_json(const Rule& r, const RuleTally& t) {
  nlohmann::ordered_json j;
  j["tags"] = r.tag_path;
  j["text"] = r.text;
  j["conclusion"] = r.conclusion;
  j["occurrence"] = t.occurrence;
  j["correct"] = t.correct;
  return j;
}

}  // namespace detail

/// One rule per line, sorted, newline-terminated.
inline std::string serialize(const RuleLibrary& lib) {
  nlohmann::ordered_json head;
  head["format"] = kLibraryFormat;
  head["task"] = lib.task_id();
  if (!lib.meta.empty()) head["meta"] = lib.meta;
  std::string s = head.dump();
  s.pop_back();
  s += ",\"rules\":[";
  bool first = true;
  for (const auto& [r, t] : lib.entries()) {
    s += first ? "\n" : ",\n";
    first = false;
    s += detail::rule_json(r, t).dump();
  }
  s += "\n]}\n";
  return s;
}

inline RuleLibrary deserialize(std::string_view content, std::string_view source = "<library>") {
  const std::string src(source);
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(content);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(src + ":" + std::to_string(detail::line_of(content, e.byte == 0 ? 0 : e.byte - 1)),
                     "syntax error");
  }
  auto where = [&](const std::string& field) { return src + ": " + field; };
  if (!doc.is_object()) throw ParseError(where("<root>"), "expected an object");
  if (!doc.contains("format") || doc["format"] != kLibraryFormat) {
    throw ParseError(where("format"), "expected \"" + std::string(kLibraryFormat) + "\"");
  }
  if (!doc.contains("task") || !doc["task"].is_string() || !grammar::is_known_task(doc["task"].get<std::string>())) {
    throw ParseError(where("task"), "missing or unknown task id");
  }
  RuleLibrary lib(doc["task"].get<std::string>());
  if (doc.contains("meta")) {
    if (!doc["meta"].is_object()) throw ParseError(where("meta"), "expected an object");
    lib.meta = doc["meta"];
  }
  if (!doc.contains("rules") || !doc["rules"].is_array()) throw ParseError(where("rules"), "expected an array");
  const auto& rules = doc["rules"];
  for (std::size_t i = 0; i < rules.size(); ++i) {
    const auto& j = rules[i];
    const std::string at = "rules[" + std::to_string(i) + "]";
    auto fail = [&](const std::string& field, const std::string& msg) {
      return ParseError(where(at + (field.empty() ? "" : "." + field)), msg);
    };
    if (!j.is_object()) throw fail("", "expected an object");
    for (const char* f : {"tags", "text", "conclusion", "occurrence", "correct"}) {
      if (!j.contains(f)) throw fail(f, "missing field");
    }
    if (!j["tags"].is_array()) throw fail("tags", "expected an array");
    Rule r;
    for (std::size_t t = 0; t < j["tags"].size(); ++t) {
      if (!j["tags"][t].is_string()) throw fail("tags[" + std::to_string(t) + "]", "expected a string");
      r.tag_path.push_back(j["tags"][t].get<std::string>());
      try {
        grammar::validate_tag(r.tag_path.back());
      } catch (const GrammarError& e) {
        throw fail("tags[" + std::to_string(t) + "]", e.what());
      }
    }
    if (!j["text"].is_string()) throw fail("text", "expected a string");
    if (!j["conclusion"].is_string()) throw fail("conclusion", "expected a string");
    if (!j["occurrence"].is_number_integer()) throw fail("occurrence", "expected an integer");
    if (!j["correct"].is_number_integer()) throw fail("correct", "expected an integer");
    r.text = j["text"].get<std::string>();
    r.conclusion = j["conclusion"].get<std::string>();
    RuleTally t{j["occurrence"].get<std::int64_t>(), j["correct"].get<std::int64_t>()};
    if (t.occurrence < 0) throw fail("occurrence", "must be >= 0");
    if (t.correct < 0 || t.correct > t.occurrence) throw fail("correct", "must lie in [0, occurrence]");
    if (!grammar::conforms(lib.task_id(), r)) throw fail("text", "not canonical for task " + lib.task_id());
    if (lib.contains(r)) throw fail("", "duplicate rule");
    lib.add(r, t);
  }
  return lib;
}

inline void save(const RuleLibrary& lib, const std::string& path) { text::write_file(path, serialize(lib)); }

inline RuleLibrary load(const std::string& path) { return deserialize(text::read_file(path), path); }

}  // namespace htt
