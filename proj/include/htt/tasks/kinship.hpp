#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <memory>
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

namespace htt::kinship {

inline const std::vector<std::string>& vocabulary() {
  static const std::vector<std::string> v = {
      "mother",        "father",          "son",           "daughter",       "brother",
      "sister",        "grandmother",     "grandfather",   "grandson",       "granddaughter",
      "uncle",         "aunt",            "nephew",        "niece",          "husband",
      "wife",          "mother-in-law",   "father-in-law", "son-in-law",     "daughter-in-law",
      "brother-in-law", "sister-in-law",  "step-daughter"};
  return v;
}

inline bool in_vocabulary(std::string_view label) {
  const auto& v = vocabulary();
  return std::find(v.begin(), v.end(), label) != v.end();
}

enum class Gender { male, female };

struct Person {
  int id = 0;
  Gender gender = Gender::male;
  std::string name;
};

struct FamilyGraph {
  std::vector<Person> persons;
  std::vector<std::pair<int, int>> unions;        // (a, b) with a < b
  std::vector<std::pair<int, int>> parent_edges;  // (parent, child)

  std::size_t size() const { return persons.size(); }

  std::vector<int> parents(int x) const {
    std::vector<int> out;
    for (auto [p, c] : parent_edges) {
      if (c == x) out.push_back(p);
    }
    return out;
  }
  std::vector<int> children(int x) const {
    std::vector<int> out;
    for (auto [p, c] : parent_edges) {
      if (p == x) out.push_back(c);
    }
    return out;
  }
  std::optional<int> spouse(int x) const {
    for (auto [a, b] : unions) {
      if (a == x) return b;
      if (b == x) return a;
    }
    return std::nullopt;
  }
  bool female(int x) const { return persons.at(static_cast<std::size_t>(x)).gender == Gender::female; }
};

struct GraphOptions {
  int min_children = 1;
  int max_children = 3;
  double spouse_probability = 0.8;
};

namespace detail {

inline const std::array<std::string_view, 60>& male_names() {
  static const std::array<std::string_view, 60> n = {
      "Alan",    "Anthony", "Carlos",  "Craig",   "Lee",     "James",   "Michael", "Robert",  "David",   "William",
      "Richard", "Joseph",  "Thomas",  "Charles", "Daniel",  "Matthew", "Mark",    "Donald",  "Steven",  "Paul",
      "Andrew",  "Joshua",  "Kenneth", "Kevin",   "Brian",   "George",  "Edward",  "Ronald",  "Timothy", "Jason",
      "Jeffrey", "Ryan",    "Jacob",   "Gary",    "Nicholas", "Eric",   "Jonathan", "Stephen", "Larry",  "Justin",
      "Scott",   "Brandon", "Benjamin", "Samuel", "Gregory", "Frank",   "Alexander", "Raymond", "Patrick", "Jack",
      "Dennis",  "Jerry",   "Tyler",   "Aaron",   "Jose",    "Adam",    "Henry",   "Nathan",  "Douglas", "Zachary"};
  return n;
}

inline const std::array<std::string_view, 60>& female_names() {
  static const std::array<std::string_view, 60> n = {
      "Annie",   "Beverly", "Michelle", "Jeanna",  "Molly",    "Mary",     "Patricia", "Jennifer", "Linda",  "Elizabeth",
      "Barbara", "Susan",   "Jessica",  "Sarah",   "Karen",    "Nancy",    "Lisa",     "Betty",    "Margaret", "Sandra",
      "Ashley",  "Kimberly", "Emily",   "Donna",   "Carol",    "Amanda",   "Melissa",  "Deborah",  "Stephanie", "Rebecca",
      "Sharon",  "Laura",   "Cynthia",  "Kathleen", "Amy",     "Angela",   "Shirley",  "Anna",     "Brenda",  "Pamela",
      "Emma",    "Nicole",  "Helen",    "Samantha", "Katherine", "Christine", "Debra",   "Rachel",   "Carolyn", "Janet",
      "Catherine", "Maria", "Heather",  "Diane",   "Ruth",     "Julie",    "Olivia",   "Joyce",    "Virginia", "Victoria"};
  return n;
}

}  // namespace detail

/// Seeded family tree: a founding couple, then for each generation every
/// union has min..max children, and each child marries in an outside spouse
/// with the configured probability. Only unions above the last generation
/// have children.
inline FamilyGraph build_family_graph(int generations, std::uint64_t seed, const GraphOptions& opt = {}) {
  if (generations < 2 || generations > 4) throw DomainError("generations must lie in 2..4");
  if (opt.min_children < 1 || opt.max_children < opt.min_children) throw DomainError("bad children range");
  Rng rng(seed);
  FamilyGraph g;
  auto add = [&](Gender gender) {
    g.persons.push_back(Person{static_cast<int>(g.persons.size()), gender, ""});
    return g.persons.back().id;
  };
  auto marry = [&](int a, int b) { g.unions.emplace_back(std::min(a, b), std::max(a, b)); };

  const int root_m = add(Gender::male);
  const int root_f = add(Gender::female);
  marry(root_m, root_f);
  std::vector<std::pair<int, int>> layer = {{root_m, root_f}};
  for (int gen = 1; gen < generations; ++gen) {
    std::vector<std::pair<int, int>> next;
    for (auto [a, b] : layer) {
      const auto kids = rng.between(opt.min_children, opt.max_children);
      for (std::int64_t k = 0; k < kids; ++k) {
        const int child = add(rng.bernoulli(0.5) ? Gender::female : Gender::male);
        g.parent_edges.emplace_back(a, child);
        g.parent_edges.emplace_back(b, child);
        if (rng.bernoulli(opt.spouse_probability)) {
          const int sp = add(g.female(child) ? Gender::male : Gender::female);
          marry(child, sp);
          next.emplace_back(child, sp);
        }
      }
    }
    layer = std::move(next);
  }

  std::vector<std::string_view> men(detail::male_names().begin(), detail::male_names().end());
  std::vector<std::string_view> women(detail::female_names().begin(), detail::female_names().end());
  rng.shuffle(std::span<std::string_view>(men));
  rng.shuffle(std::span<std::string_view>(women));
  std::size_t mi = 0, wi = 0;
  for (auto& p : g.persons) {
    auto& pool = p.gender == Gender::female ? women : men;
    auto& i = p.gender == Gender::female ? wi : mi;
    p.name = std::string(pool[i % pool.size()]);
    if (i >= pool.size()) p.name += " " + std::to_string(i / pool.size() + 1);
    ++i;
  }
  return g;
}

/// Label of b relative to a ("b is a's <label>"), or nullopt.
///
/// Checked in order: spouse, parent, child, sibling (a shared parent),
/// grandparent, grandchild, uncle/aunt (a parent's sibling), nephew/niece
/// (a sibling's child), parent-in-law, child-in-law, sibling-in-law (a
/// spouse's sibling or a sibling's spouse), step-daughter (a spouse's
/// daughter who is not a's own child).
inline std::optional<std::string> graph_relation(const FamilyGraph& g, int a, int b) {
  if (a == b) return std::nullopt;
  const bool f = g.female(b);
  auto has = [](const std::vector<int>& v, int x) { return std::find(v.begin(), v.end(), x) != v.end(); };
  const auto pa = g.parents(a);
  const auto ca = g.children(a);
  const auto sp = g.spouse(a);

  auto siblings = [&](int x) {
    std::set<int> out;
    for (int p : g.parents(x)) {
      for (int c : g.children(p)) {
        if (c != x) out.insert(c);
      }
    }
    return out;
  };

  if (sp && *sp == b) return f ? "wife" : "husband";
  if (has(pa, b)) return f ? "mother" : "father";
  if (has(ca, b)) return f ? "daughter" : "son";
  const auto sa = siblings(a);
  if (sa.count(b)) return f ? "sister" : "brother";
  for (int p : pa) {
    if (has(g.parents(p), b)) return f ? "grandmother" : "grandfather";
  }
  for (int c : ca) {
    if (has(g.children(c), b)) return f ? "granddaughter" : "grandson";
  }
  for (int p : pa) {
    if (siblings(p).count(b)) return f ? "aunt" : "uncle";
  }
  for (int s : sa) {
    if (has(g.children(s), b)) return f ? "niece" : "nephew";
  }
  if (sp && has(g.parents(*sp), b)) return f ? "mother-in-law" : "father-in-law";
  for (int c : ca) {
    if (g.spouse(c) == b) return f ? "daughter-in-law" : "son-in-law";
  }
  if (sp && siblings(*sp).count(b)) return f ? "sister-in-law" : "brother-in-law";
  for (int s : sa) {
    if (g.spouse(s) == b) return f ? "sister-in-law" : "brother-in-law";
  }
  if (sp && f && has(g.children(*sp), b) && !has(ca, b)) return "step-daughter";
  return std::nullopt;
}

// All pairwise labels, computed once per graph.
class RelationTable {
 public:
  explicit RelationTable(const FamilyGraph& g) : n_(g.size()), labels_(n_ * n_) {
    for (std::size_t a = 0; a < n_; ++a) {
      for (std::size_t b = 0; b < n_; ++b) {
        labels_[a * n_ + b] = graph_relation(g, static_cast<int>(a), static_cast<int>(b));
      }
    }
  }
  const std::optional<std::string>& at(int a, int b) const {
    return labels_[static_cast<std::size_t>(a) * n_ + static_cast<std::size_t>(b)];
  }

 private:
  std::size_t n_;
  std::vector<std::optional<std::string>> labels_;
};

struct KinshipInstance {
  std::uint64_t seed_id = 0;
  std::string head;
  std::string tail;
  std::vector<std::string> chain;
  std::vector<int> waypoints;           // person ids in the generating graph
  std::vector<std::string> reductions;  // label of head -> waypoint[i + 2]
  std::string gold;

  int hops() const { return static_cast<int>(chain.size()); }
};

/// Graph-anchored validity: every chain label, every reduction and gold hold in `g`.
inline void validate(const KinshipInstance& inst, const FamilyGraph& g) {
  const auto h = inst.chain.size();
  if (h < 2 || h > 10) throw DomainError("hops must lie in 2..10");
  if (inst.waypoints.size() != h + 1) throw DomainError("waypoints must number hops + 1");
  if (std::set<int>(inst.waypoints.begin(), inst.waypoints.end()).size() != h + 1) {
    throw DomainError("waypoints must be distinct");
  }
  for (std::size_t i = 0; i < h; ++i) {
    if (graph_relation(g, inst.waypoints[i], inst.waypoints[i + 1]) != inst.chain[i]) {
      throw DomainError("chain label " + std::to_string(i) + " disagrees with the graph");
    }
  }
  if (graph_relation(g, inst.waypoints.front(), inst.waypoints.back()) != inst.gold) {
    throw DomainError("gold disagrees with the graph");
  }
  if (g.persons.at(static_cast<std::size_t>(inst.waypoints.front())).name != inst.head ||
      g.persons.at(static_cast<std::size_t>(inst.waypoints.back())).name != inst.tail) {
    throw DomainError("head/tail names disagree with the graph");
  }
}

/// Samples a chain of `hops` distinct people. Every consecutive pair and every
/// (head, waypoint) pair carries a vocabulary label, so the graph-anchored
/// oracle never hits a gap.
inline KinshipInstance sample_instance(const FamilyGraph& g, int hops, std::uint64_t seed,
                                       std::size_t max_expansions = 20000) {
  if (hops < 2 || hops > 10) throw DomainError("hops must lie in 2..10");
  Rng rng(seed);
  const RelationTable rel(g);
  const int n = static_cast<int>(g.size());
  std::vector<int> heads(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) heads[static_cast<std::size_t>(i)] = i;
  rng.shuffle(std::span<int>(heads));

  std::size_t budget = max_expansions;
  std::vector<int> path;
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  // Randomized depth-first search over labeled steps.
  auto dfs = [&](auto&& self) -> bool {
    if (static_cast<int>(path.size()) == hops + 1) return true;
    if (budget == 0) return false;
    --budget;
    const int cur = path.back();
    std::vector<int> next;
    for (int p = 0; p < n; ++p) {
      if (!used[static_cast<std::size_t>(p)] && rel.at(cur, p) && rel.at(path.front(), p)) next.push_back(p);
    }
    rng.shuffle(std::span<int>(next));
    for (int p : next) {
      path.push_back(p);
      used[static_cast<std::size_t>(p)] = 1;
      if (self(self)) return true;
      used[static_cast<std::size_t>(p)] = 0;
      path.pop_back();
    }
    return false;
  };

  for (int head : heads) {
    path.assign(1, head);
    std::fill(used.begin(), used.end(), 0);
    used[static_cast<std::size_t>(head)] = 1;
    if (!dfs(dfs)) {
      if (budget == 0) break;
      continue;
    }
    KinshipInstance inst;
    inst.waypoints = path;
    inst.head = g.persons[static_cast<std::size_t>(path.front())].name;
    inst.tail = g.persons[static_cast<std::size_t>(path.back())].name;
    for (int i = 0; i < hops; ++i) inst.chain.push_back(*rel.at(path[static_cast<std::size_t>(i)], path[static_cast<std::size_t>(i) + 1]));
    for (int i = 2; i <= hops; ++i) inst.reductions.push_back(*rel.at(path.front(), path[static_cast<std::size_t>(i)]));
    inst.gold = inst.reductions.back();
    return inst;
  }
  throw ResampleExhaustedError("no labeled chain of " + std::to_string(hops) + " hops found");
}

struct GenOptions {
  int generations = 4;
  GraphOptions graph;
  int max_graph_attempts = 20;
};

/// Instance `id` lives in its own graph; both are derived from (seed, id).
inline std::pair<KinshipInstance, FamilyGraph> generate_one(std::uint64_t seed, std::uint64_t id, int hops,
                                                             const GenOptions& opt = {}) {
  for (int attempt = 0; attempt < opt.max_graph_attempts; ++attempt) {
    const auto s = derive_seed(derive_seed(seed, id), static_cast<std::uint64_t>(attempt));
    FamilyGraph g = build_family_graph(opt.generations, s, opt.graph);
    try {
      auto inst = sample_instance(g, hops, derive_seed(s, 1));
      inst.seed_id = id;
      return {std::move(inst), std::move(g)};
    } catch (const ResampleExhaustedError&) {
    }
  }
  throw ResampleExhaustedError("no graph admitted a " + std::to_string(hops) + "-hop chain");
}

/// `n` instances with hop counts cycling through [min_hops, max_hops]; ids start at `first_id`.
inline std::vector<KinshipInstance> generate(std::size_t n, int min_hops, int max_hops, std::uint64_t seed,
                                             std::uint64_t first_id = 0, const GenOptions& opt = {}) {
  if (min_hops < 2 || max_hops > 10 || min_hops > max_hops) throw DomainError("hop range must lie in 2..10");
  std::vector<KinshipInstance> out;
  out.reserve(n);
  const auto span = static_cast<std::size_t>(max_hops - min_hops + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const int hops = min_hops + static_cast<int>(i % span);
    out.push_back(generate_one(seed, first_id + i, hops, opt).first);
  }
  return out;
}

/// Left-to-right reduction with graph-anchored conclusions.
inline Trace oracle_trace(const KinshipInstance& inst) {
  const auto h = inst.chain.size();
  if (h < 2 || inst.reductions.size() != h - 1 || inst.reductions.back() != inst.gold) {
    throw OracleGapError("instance lacks a complete reduction sequence");
  }
  Trace t;
  std::string cur = inst.chain[0];
  for (std::size_t i = 1; i < h; ++i) {
    t.steps.push_back({grammar::kinship_rule(cur, inst.chain[i], inst.reductions[i - 1]), Provenance::generated, std::nullopt});
    cur = inst.reductions[i - 1];
  }
  t.answer = inst.gold;
  return t;
}

inline Trace oracle_trace(const KinshipInstance& inst, const FamilyGraph& g) {
  KinshipInstance anchored = inst;
  anchored.reductions.clear();
  for (std::size_t i = 2; i < inst.waypoints.size(); ++i) {
    auto r = graph_relation(g, inst.waypoints.front(), inst.waypoints[i]);
    if (!r) throw OracleGapError("no label between head and waypoint " + std::to_string(i));
    anchored.reductions.push_back(*r);
  }
  if (anchored.reductions.empty() || anchored.reductions.back() != inst.gold) {
    throw OracleGapError("graph reduction does not end at gold");
  }
  return oracle_trace(anchored);
}

/// Every (r1, r2) -> r3 rule the oracle uses on `instances`.
inline std::set<Rule> oracle_rules(const std::vector<KinshipInstance>& instances) {
  std::set<Rule> out;
  for (const auto& inst : instances) {
    for (const auto& s : oracle_trace(inst).steps) out.insert(s.rule);
  }
  return out;
}

/// Chain reduction driven by emitted labels.
class Problem final : public StepProblem {
 public:
  explicit Problem(const KinshipInstance& inst) : inst_(inst), current_(inst.chain.at(0)) {}

  bool done() const override { return index_ >= inst_.chain.size(); }
  std::vector<std::string> key() const override { return {current_, inst_.chain[index_]}; }
  std::optional<std::string> truth() const override {
    if (!on_path_) return std::nullopt;
    return inst_.reductions.at(index_ - 1);
  }
  Rule make_rule(const std::string& conclusion) const override {
    return grammar::kinship_rule(current_, inst_.chain[index_], conclusion);
  }
  bool advance(const Rule& applied) override {
    if (applied.tag_path.size() != 2 || applied.tag_path[0] != current_ || applied.tag_path[1] != inst_.chain[index_]) {
      return false;
    }
    if (on_path_ && applied.conclusion != inst_.reductions.at(index_ - 1)) on_path_ = false;
    current_ = applied.conclusion;
    ++index_;
    return true;
  }
  std::optional<std::string> answer() const override {
    if (!done()) return std::nullopt;
    return current_;
  }
  const std::vector<std::string>& domain() const override { return vocabulary(); }

 private:
  const KinshipInstance& inst_;
  std::string current_;
  std::size_t index_ = 1;
  bool on_path_ = true;
};

// ---- text ----------------------------------------------------------------

/// Trace in the few-shot exemplar idiom; `retrieve` switches to the tagged form.
inline std::string render_trace(const KinshipInstance& inst, const Trace& t, bool retrieve = false) {
  std::vector<std::string> lines;
  std::vector<std::string> rest(inst.chain.begin(), inst.chain.end());
  for (const auto& s : t.steps) {
    const auto& r1 = s.rule.tag_path.at(0);
    const auto& r2 = s.rule.tag_path.at(1);
    rest.erase(rest.begin(), rest.begin() + std::min<std::size_t>(2, rest.size()));
    rest.insert(rest.begin(), s.rule.conclusion);
    std::string line = "For " + r1 + "'s " + r2 + ", we ";
    line += retrieve ? "retrieve " + xml_tags(s.rule, 2) : "have ";
    line += s.rule.text + " So the relations are reduced to " + text::join(rest, ", ") + ".";
    lines.push_back(std::move(line));
  }
  lines.push_back("Therefore, the answer is " + t.answer.value_or("unknown") + ".");
  return text::join(lines, "\n");
}

/// Extracts every "X's Y is Z" clause over vocabulary words, plus the answer.
inline Trace parse_trace(std::string_view raw) {
  static const std::regex clause(R"(([a-z]+(?:-[a-z]+)*)'s ([a-z]+(?:-[a-z]+)*) is ([a-z]+(?:-[a-z]+)*))");
  Trace t;
  t.raw_text = std::string(raw);
  std::string s = text::lower(raw);
  s = grammar::detail::replace_all(std::move(s), "\xE2\x80\x99", "'");
  for (auto it = std::sregex_iterator(s.begin(), s.end(), clause); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    const auto pos = static_cast<std::size_t>(m.position(0));
    if (pos > 0 && (std::isalnum(static_cast<unsigned char>(s[pos - 1])) || s[pos - 1] == '-')) continue;
    if (!in_vocabulary(m[1].str()) || !in_vocabulary(m[2].str()) || !in_vocabulary(m[3].str())) continue;
    t.steps.push_back({grammar::kinship_rule(m[1].str(), m[2].str(), m[3].str()), Provenance::generated, std::nullopt});
  }
  t.answer = extract_answer(raw, vocabulary());
  return t;
}

struct PromptOptions {
  const RuleLibrary* library = nullptr;
  RenderOptions render;
};

namespace detail {

inline void add_library(TemplateContext& ctx, const PromptOptions& opt) {
  std::vector<std::string> texts;
  std::vector<std::string> tagged = rule_lines(*opt.library, opt.render);
  RenderOptions plain = opt.render;
  plain.tag_depth = 0;
  texts = rule_lines(*opt.library, plain);
  ctx.set_list("rules", texts);
  ctx.filters["add_xml_tags"] = [tagged](const std::string&, std::size_t i) { return tagged.at(i); };
}

}  // namespace detail

/// Main prompt. LtM shares the CoT prompt; its per-rule sub-prompt is ltm_rule_prompt.
inline std::string build_prompt(const KinshipInstance& inst, Mode mode, const PromptOptions& opt = {}) {
  TemplateContext ctx;
  ctx.set("head", inst.head).set("tail", inst.tail).set_list("relations", inst.chain);
  std::string file;
  if (mode == Mode::zero_shot_cot) {
    if (opt.library) throw DomainError("zero-shot prompting takes no library");
    file = "prompts/kinship/zero_shot_cot.txt";
  } else {
    file = opt.library ? "prompts/kinship/few_shot_cot_htt.txt" : "prompts/kinship/few_shot_cot.txt";
  }
  if (opt.library) detail::add_library(ctx, opt);
  return Template(read_prompt_asset(file)).render(ctx);
}

inline std::string ltm_rule_prompt(const std::string& r1, const std::string& r2, const PromptOptions& opt = {}) {
  TemplateContext ctx;
  ctx.set_list("relations", {r1, r2});
  if (opt.library) detail::add_library(ctx, opt);
  return Template(read_prompt_asset(opt.library ? "prompts/kinship/ltm_htt_rule.txt" : "prompts/kinship/ltm_rule.txt"))
      .render(ctx);
}

// ---- serialization ---------------------------------------------------------

inline nlohmann::ordered_json to_json(const KinshipInstance& i) {
  nlohmann::ordered_json j;
  j["task"] = "kinship";
  j["head"] = i.head;
  j["tail"] = i.tail;
  j["chain"] = i.chain;
  j["gold"] = i.gold;
  j["hops"] = i.hops();
  j["seed_id"] = i.seed_id;
  j["reductions"] = i.reductions;
  return j;
}

inline KinshipInstance from_json(const nlohmann::ordered_json& j) {
  if (j.value("task", "") != "kinship") throw TaskMismatchError("not a kinship instance");
  KinshipInstance i;
  i.head = j.at("head").get<std::string>();
  i.tail = j.at("tail").get<std::string>();
  i.chain = j.at("chain").get<std::vector<std::string>>();
  i.gold = j.at("gold").get<std::string>();
  i.seed_id = j.at("seed_id").get<std::uint64_t>();
  if (j.contains("reductions")) i.reductions = j.at("reductions").get<std::vector<std::string>>();
  if (j.at("hops").get<int>() != i.hops()) throw DomainError("hops disagrees with chain length");
  for (const auto& l : i.chain) {
    if (!in_vocabulary(l)) throw DomainError("unknown relation: " + l);
  }
  if (!in_vocabulary(i.gold)) throw DomainError("unknown relation: " + i.gold);
  if (!i.reductions.empty() && (i.reductions.size() + 1 != i.chain.size() || i.reductions.back() != i.gold)) {
    throw DomainError("reductions inconsistent with chain and gold");
  }
  return i;
}

}  // namespace htt::kinship
