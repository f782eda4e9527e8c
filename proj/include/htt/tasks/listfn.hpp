#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "htt/common/assets.hpp"
#include "htt/common/error.hpp"
#include "htt/common/rng.hpp"
#include "htt/common/text.hpp"
#include "htt/grammar.hpp"
#include "htt/rulelib.hpp"
#include "htt/task.hpp"
#include "htt/template.hpp"

// List functions: a closed DSL over integer lists written as s-expressions,
// e.g. (take-nth 3), (concat-around (11 21) (7 89)), (gather 3 2 1 #4 5 7).
// Indices are 1-based. In gather, a bare number selects an element and #n is
// the literal n.
namespace htt::listfn {

using List = std::vector<std::int64_t>;

struct IOPair {
  List input;
  List output;

  friend bool operator==(const IOPair&, const IOPair&) = default;
};

enum class Subset { P1, P2, P3 };

inline std::string_view to_string(Subset s) {
  switch (s) {
    case Subset::P1: return "P1";
    case Subset::P2: return "P2";
    case Subset::P3: return "P3";
  }
  return "?";
}

inline Subset parse_subset(std::string_view s) {
  if (s == "P1") return Subset::P1;
  if (s == "P2") return Subset::P2;
  if (s == "P3") return Subset::P3;
  throw DomainError("unknown list-functions subset: " + std::string(s));
}

inline std::int64_t max_element(Subset s) { return s == Subset::P1 ? 9 : 99; }

enum class Op {
  take_nth,
  remove_nth,
  replace_nth,
  swap,
  replace_first_with_last,
  prepend_append,
  repeat_first,
  concat_around,
  const_list,
  reverse,
  sum_even,
  filter_tens_even,
  repeat_by_tens,
  add_length_minus_index,
  index_by_first,
  append_contained,
  cond_swap,
  gather,
  multiples_of_min,
  sum_middle,
};

struct GatherItem {
  bool literal = false;
  std::int64_t value = 0;

  friend bool operator==(const GatherItem&, const GatherItem&) = default;
};

struct Program {
  Op op = Op::reverse;
  std::vector<std::int64_t> args;
  std::vector<List> lists;
  std::vector<GatherItem> items;

  friend bool operator==(const Program&, const Program&) = default;
};

namespace detail {

// Argument signature per operator: 'i' integer, 'L' list, '*' gather items.
struct OpInfo {
  Op op;
  std::string_view name;
  std::string_view sig;
};

inline constexpr OpInfo kOps[] = {
    {Op::take_nth, "take-nth", "i"},
    {Op::remove_nth, "remove-nth", "i"},
    {Op::replace_nth, "replace-nth", "ii"},
    {Op::swap, "swap", "ii"},
    {Op::replace_first_with_last, "replace-first-with-last", ""},
    {Op::prepend_append, "prepend-append", "ii"},
    {Op::repeat_first, "repeat-first", "i"},
    {Op::concat_around, "concat-around", "LL"},
    {Op::const_list, "const", "L"},
    {Op::reverse, "reverse", ""},
    {Op::sum_even, "sum-even", ""},
    {Op::filter_tens_even, "filter-tens-even", ""},
    {Op::repeat_by_tens, "repeat-by-tens", ""},
    {Op::add_length_minus_index, "add-length-minus-index", ""},
    {Op::index_by_first, "index-by-first", ""},
    {Op::append_contained, "append-contained", "ii"},
    {Op::cond_swap, "cond-swap", "iiii"},
    {Op::gather, "gather", "*"},
    {Op::multiples_of_min, "multiples-of-min", ""},
    {Op::sum_middle, "sum-middle", ""},
};

inline const OpInfo& info(Op op) {
  for (const auto& i : kOps) {
    if (i.op == op) return i;
  }
  throw DomainError("unknown list operator");
}

inline std::string list_sexpr(const List& l) {
  std::vector<std::string> parts;
  for (auto v : l) parts.push_back(std::to_string(v));
  return "(" + text::join(parts, " ") + ")";
}

class SexprReader {
 public:
  explicit SexprReader(std::string_view s) : s_(s) {}

  void expect(char c) {
    skip();
    if (pos_ >= s_.size() || s_[pos_] != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }
  bool peek(char c) {
    skip();
    return pos_ < s_.size() && s_[pos_] == c;
  }
  std::string atom() {
    skip();
    const auto start = pos_;
    while (pos_ < s_.size() && !text::is_space(s_[pos_]) && s_[pos_] != '(' && s_[pos_] != ')') ++pos_;
    if (start == pos_) fail("expected an atom");
    return std::string(s_.substr(start, pos_ - start));
  }
  std::int64_t integer() {
    const std::string a = atom();
    if (!std::all_of(a.begin(), a.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }) ||
        a.size() > 9) {
      fail("expected a nonnegative integer, got '" + a + "'");
    }
    return std::stoll(a);
  }
  List list() {
    expect('(');
    List out;
    while (!peek(')')) out.push_back(integer());
    expect(')');
    return out;
  }
  void finish() {
    skip();
    if (pos_ != s_.size()) fail("trailing input");
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError("program", msg + " at offset " + std::to_string(pos_) + " in '" + std::string(s_) + "'");
  }

 private:
  void skip() {
    while (pos_ < s_.size() && text::is_space(s_[pos_])) ++pos_;
  }
  std::string_view s_;
  std::size_t pos_ = 0;
};

inline std::string format_list(const List& l) {
  std::vector<std::string> parts;
  for (auto v : l) parts.push_back(std::to_string(v));
  return "[" + text::join(parts, ", ") + "]";
}

inline std::string count_word(std::int64_t n) {
  static const char* words[] = {"zero", "one", "two", "three", "four", "five",
                                "six",  "seven", "eight", "nine", "ten"};
  return n >= 0 && n <= 10 ? words[n] : std::to_string(n);
}

inline bool has(const List& x, std::int64_t i) { return i >= 1 && static_cast<std::size_t>(i) <= x.size(); }
inline std::int64_t& at(List& x, std::int64_t i) { return x[static_cast<std::size_t>(i - 1)]; }
inline std::int64_t at(const List& x, std::int64_t i) { return x[static_cast<std::size_t>(i - 1)]; }

}  // namespace detail

using detail::format_list;

inline std::string to_sexpr(const Program& p) {
  const auto& inf = detail::info(p.op);
  std::string out = "(" + std::string(inf.name);
  if (p.op == Op::gather) {
    for (const auto& it : p.items) out += " " + std::string(it.literal ? "#" : "") + std::to_string(it.value);
  } else {
    for (auto a : p.args) out += " " + std::to_string(a);
    for (const auto& l : p.lists) out += " " + detail::list_sexpr(l);
  }
  return out + ")";
}

inline Program parse_program(std::string_view s) {
  detail::SexprReader rd(s);
  rd.expect('(');
  const std::string name = rd.atom();
  const detail::OpInfo* inf = nullptr;
  for (const auto& i : detail::kOps) {
    if (i.name == name) inf = &i;
  }
  if (!inf) rd.fail("unknown operator '" + name + "'");
  Program p;
  p.op = inf->op;
  for (char c : inf->sig) {
    if (c == 'i') {
      p.args.push_back(rd.integer());
    } else if (c == 'L') {
      p.lists.push_back(rd.list());
    } else {
      while (!rd.peek(')')) {
        std::string a = rd.atom();
        GatherItem it;
        if (!a.empty() && a[0] == '#') {
          it.literal = true;
          a.erase(0, 1);
        }
        if (a.empty() || !std::all_of(a.begin(), a.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
          rd.fail("bad gather item '" + a + "'");
        }
        it.value = std::stoll(a);
        p.items.push_back(it);
      }
      if (p.items.empty()) rd.fail("gather needs at least one item");
    }
  }
  rd.expect(')');
  rd.finish();
  for (auto a : p.args) {
    if ((p.op == Op::take_nth || p.op == Op::remove_nth || p.op == Op::swap || p.op == Op::cond_swap) && a < 1) {
      rd.fail("indices are 1-based");
    }
  }
  if (p.op == Op::replace_nth && p.args[0] < 1) rd.fail("indices are 1-based");
  return p;
}

/// Total interpretation; index primitives leave the list unchanged where the index is absent.
inline List interpret(const Program& p, const List& x) {
  using detail::at;
  using detail::has;
  const auto& a = p.args;
  List y = x;
  switch (p.op) {
    case Op::take_nth:
      return has(x, a[0]) ? List{at(x, a[0])} : List{};
    case Op::remove_nth:
      if (has(x, a[0])) y.erase(y.begin() + (a[0] - 1));
      return y;
    case Op::replace_nth:
      if (has(x, a[0])) at(y, a[0]) = a[1];
      return y;
    case Op::swap:
      if (has(x, a[0]) && has(x, a[1])) std::swap(at(y, a[0]), at(y, a[1]));
      return y;
    case Op::replace_first_with_last:
      if (!y.empty()) y.front() = y.back();
      return y;
    case Op::prepend_append:
      y.insert(y.begin(), a[0]);
      y.push_back(a[1]);
      return y;
    case Op::repeat_first:
      return x.empty() ? List{} : List(static_cast<std::size_t>(a[0]), x.front());
    case Op::concat_around: {
      List out = p.lists[0];
      out.insert(out.end(), x.begin(), x.end());
      out.insert(out.end(), p.lists[1].begin(), p.lists[1].end());
      return out;
    }
    case Op::const_list:
      return p.lists[0];
    case Op::reverse:
      std::reverse(y.begin(), y.end());
      return y;
    case Op::sum_even: {
      std::int64_t s = 0;
      for (auto v : x) {
        if (v % 2 == 0) s += v;
      }
      return {s};
    }
    case Op::filter_tens_even: {
      List out;
      for (auto v : x) {
        if ((v / 10) % 2 == 0) out.push_back(v);
      }
      return out;
    }
    case Op::repeat_by_tens: {
      List out;
      for (auto v : x) out.insert(out.end(), static_cast<std::size_t>(v / 10), v);
      return out;
    }
    case Op::add_length_minus_index: {
      const auto n = static_cast<std::int64_t>(x.size());
      for (std::int64_t i = 1; i <= n; ++i) at(y, i) += n - i;
      return y;
    }
    case Op::index_by_first:
      return !x.empty() && has(x, x.front() + 1) ? List{at(x, x.front() + 1)} : List{};
    case Op::append_contained: {
      const auto contains = [&](std::int64_t v) { return std::find(x.begin(), x.end(), v) != x.end(); };
      if (contains(a[0])) {
        y.push_back(a[0]);
      } else if (contains(a[1])) {
        y.push_back(a[1]);
      }
      return y;
    }
    case Op::cond_swap:
      if (has(x, a[0]) && has(x, a[1]) && at(x, a[0]) > at(x, a[1])) {
        std::swap(at(y, a[0]), at(y, a[1]));
      } else if (has(x, a[2]) && has(x, a[3])) {
        std::swap(at(y, a[2]), at(y, a[3]));
      }
      return y;
    case Op::gather: {
      List out;
      for (const auto& it : p.items) {
        if (it.literal) {
          out.push_back(it.value);
        } else if (has(x, it.value)) {
          out.push_back(at(x, it.value));
        }
      }
      return out;
    }
    case Op::multiples_of_min: {
      if (x.empty()) return {};
      const auto m = *std::min_element(x.begin(), x.end());
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = m * static_cast<std::int64_t>(i + 1);
      return y;
    }
    case Op::sum_middle:
      if (x.size() < 2) return y;
      return {x.front(), std::accumulate(x.begin() + 1, x.end() - 1, std::int64_t{0}), x.back()};
  }
  return y;
}

inline std::string ordinal_list(const std::vector<std::string>& parts) {
  if (parts.size() <= 1) return parts.empty() ? "" : parts[0];
  std::vector<std::string> head(parts.begin(), parts.end() - 1);
  return text::join(head, ", ") + (parts.size() > 2 ? "," : "") + " and " + parts.back();
}

/// One-sentence description in the style of the task ground truths.
inline std::string describe(const Program& p) {
  const auto& a = p.args;
  const auto n = [](std::int64_t v) { return std::to_string(v); };
  switch (p.op) {
    case Op::take_nth: return "remove all but element " + n(a[0]) + ".";
    case Op::remove_nth: return "remove element " + n(a[0]) + ".";
    case Op::replace_nth:
      return "replace element " + n(a[0]) + " with " + (a[1] == 8 || a[1] == 11 || a[1] == 18 ? "an " : "a ") + n(a[1]) +
             " if there is an element " + n(a[0]) + ".";
    case Op::swap: return "swap elements " + n(a[0]) + " and " + n(a[1]) + ".";
    case Op::replace_first_with_last: return "replace the first element with the last element.";
    case Op::prepend_append: return "prepend " + n(a[0]) + " and append " + n(a[1]) + ".";
    case Op::repeat_first: return "repeat element 1 " + detail::count_word(a[0]) + " times.";
    case Op::concat_around:
      return "concatenate " + format_list(p.lists[0]) + ", input, and " + format_list(p.lists[1]) + ".";
    case Op::const_list: return "the list " + format_list(p.lists[0]) + ".";
    case Op::reverse: return "reverse the elements.";
    case Op::sum_even: return "sum of even elements.";
    case Op::filter_tens_even: return "keep only elements whose tens digit is even.";
    case Op::repeat_by_tens: return "repeat each element N times, where N is its tens digit, in order of appearance.";
    case Op::add_length_minus_index:
      return "replace each element, M, with M + the input length - M\xE2\x80\x99s index.";
    case Op::index_by_first: return "remove all but element N + 1, N = element 1.";
    case Op::append_contained:
      return "append " + n(a[0]) + " if the list contains a " + n(a[0]) + ", else append " + n(a[1]) +
             " if the list contains a " + n(a[1]) + ".";
    case Op::cond_swap:
      return "swap elements " + n(a[0]) + " and " + n(a[1]) + " if element " + n(a[0]) + " > element " + n(a[1]) +
             ", else swap elements " + n(a[2]) + " and " + n(a[3]) + ".";
    case Op::gather: {
      std::vector<std::string> parts;
      for (const auto& it : p.items) parts.push_back(it.literal ? "the number " + n(it.value) : "element " + n(it.value));
      return "output " + ordinal_list(parts) + ".";
    }
    case Op::multiples_of_min: return "replace element i with i times the smallest element.";
    case Op::sum_middle: return "keep the first element, the sum of the middle elements, and the last element.";
  }
  return "";
}

// ---- tasks -----------------------------------------------------------------

struct ListFnTask {
  std::string name;
  Subset subset = Subset::P1;
  Program program;
  std::vector<IOPair> train;
  std::vector<IOPair> validation;
  std::vector<IOPair> test;
};

inline constexpr std::size_t kTrainSize = 8;
inline constexpr std::size_t kValidationSize = 8;
inline constexpr std::size_t kTestSize = 16;

/// 32 distinct random inputs of length 0..10, split 8/8/16.
inline ListFnTask gen_task(const Program& program, Subset subset, std::uint64_t seed, std::string name = {}) {
  Rng rng(seed);
  const auto hi = static_cast<std::uint64_t>(max_element(subset));
  std::set<List> seen;
  std::vector<List> inputs;
  const std::size_t total = kTrainSize + kValidationSize + kTestSize;
  while (inputs.size() < total) {
    List x(rng.below(11));
    for (auto& v : x) v = static_cast<std::int64_t>(rng.below(hi + 1));
    if (seen.insert(x).second) inputs.push_back(std::move(x));
  }
  ListFnTask t;
  t.name = name.empty() ? to_sexpr(program) : std::move(name);
  t.subset = subset;
  t.program = program;
  for (std::size_t i = 0; i < total; ++i) {
    IOPair pr{inputs[i], interpret(program, inputs[i])};
    auto& dst = i < kTrainSize ? t.train : i < kTrainSize + kValidationSize ? t.validation : t.test;
    dst.push_back(std::move(pr));
  }
  return t;
}

/// Programs the generator draws tasks from, per subset.
inline std::vector<Program> catalog(Subset subset) {
  std::vector<std::string> src;
  auto add = [&](std::string s) { src.push_back(std::move(s)); };
  const auto i = [](int v) { return std::to_string(v); };
  if (subset == Subset::P1) {
    for (int k = 1; k <= 5; ++k) add("(take-nth " + i(k) + ")");
    for (int k = 1; k <= 5; ++k) add("(remove-nth " + i(k) + ")");
    for (int k = 1; k <= 4; ++k) {
      for (int v : {0, 3, 8}) add("(replace-nth " + i(k) + " " + i(v) + ")");
    }
    for (int a = 1; a <= 5; ++a) {
      for (int b = a + 1; b <= 5; ++b) add("(swap " + i(a) + " " + i(b) + ")");
    }
    for (auto [a, b] : {std::pair{9, 7}, {1, 2}, {0, 5}, {4, 4}, {3, 8}}) add("(prepend-append " + i(a) + " " + i(b) + ")");
    for (auto [a, b] : {std::pair{3, 9}, {1, 5}, {2, 7}, {0, 8}}) add("(append-contained " + i(a) + " " + i(b) + ")");
    for (int n : {2, 5, 10}) add("(repeat-first " + i(n) + ")");
    add("(gather 3 2 1 #4 5 7)");
    add("(gather 1 #0 2)");
    add("(gather 2 2 #5)");
    add("(reverse)");
    add("(replace-first-with-last)");
  } else if (subset == Subset::P2) {
    for (int k = 1; k <= 3; ++k) add("(take-nth " + i(k) + ")");
    add("(remove-nth 2)");
    add("(replace-nth 2 18)");
    add("(replace-nth 3 41)");
    add("(swap 1 3)");
    add("(swap 2 4)");
    add("(prepend-append 65 12)");
    add("(prepend-append 3 97)");
    add("(index-by-first)");
    add("(cond-swap 2 3 1 4)");
    add("(cond-swap 1 2 3 4)");
    add("(repeat-first 10)");
    add("(repeat-first 4)");
    add("(concat-around (11 21 43 19) (7 89 0 57))");
    add("(concat-around (5) (60 2))");
    add("(append-contained 30 55)");
    add("(reverse)");
    add("(replace-first-with-last)");
  } else {
    add("(const (11 19 24 33 42 5 82 0 64 9))");
    add("(const (7 7 31))");
    add("(filter-tens-even)");
    add("(add-length-minus-index)");
    add("(repeat-by-tens)");
    add("(sum-even)");
    add("(multiples-of-min)");
    add("(sum-middle)");
    add("(gather 1 #50 3 2)");
    add("(index-by-first)");
    add("(cond-swap 2 3 1 4)");
  }
  std::vector<Program> out;
  for (const auto& s : src) out.push_back(parse_program(s));
  return out;
}

/// `n` tasks cycling through the subset's catalog, one seed each.
inline std::vector<ListFnTask> generate(Subset subset, std::size_t n, std::uint64_t seed) {
  const auto progs = catalog(subset);
  std::vector<ListFnTask> out;
  for (std::size_t k = 0; k < n; ++k) {
    out.push_back(gen_task(progs[k % progs.size()], subset, derive_seed(seed, k)));
  }
  return out;
}

// ---- scoring ---------------------------------------------------------------

using Applier = std::function<std::optional<List>(const List& input)>;

/// Fraction of pairs the applier predicts exactly; a throwing applier counts as a miss.
inline double score_candidate(const Applier& apply, const std::vector<IOPair>& pairs) {
  if (pairs.empty()) throw DomainError("cannot score a candidate on no pairs");
  std::size_t hits = 0;
  for (const auto& pr : pairs) {
    try {
      const auto y = apply(pr.input);
      if (y && *y == pr.output) ++hits;
    } catch (const std::exception&) {
    }
  }
  return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

inline double score_candidate(const Program& p, const std::vector<IOPair>& pairs) {
  return score_candidate([&](const List& x) -> std::optional<List> { return interpret(p, x); }, pairs);
}

struct TaskScore {
  std::size_t raw_hits = 0;
  bool solved = false;
};

/// Missing predictions count as wrong.
inline TaskScore score_task(const std::vector<std::optional<List>>& predictions, const ListFnTask& task) {
  TaskScore s;
  for (std::size_t i = 0; i < task.test.size(); ++i) {
    if (i < predictions.size() && predictions[i] && *predictions[i] == task.test[i].output) ++s.raw_hits;
  }
  s.solved = s.raw_hits == task.test.size();
  return s;
}

struct Aggregate {
  double raw_accuracy = 0;
  double task_accuracy = 0;
};

inline Aggregate aggregate(const std::vector<TaskScore>& scores, std::size_t test_size = kTestSize) {
  if (scores.empty()) throw EvalError("no list-function tasks to aggregate");
  Aggregate a;
  for (const auto& s : scores) {
    a.raw_accuracy += static_cast<double>(s.raw_hits) / static_cast<double>(test_size);
    a.task_accuracy += s.solved ? 1.0 : 0.0;
  }
  a.raw_accuracy /= static_cast<double>(scores.size());
  a.task_accuracy /= static_cast<double>(scores.size());
  return a;
}

// ---- text ------------------------------------------------------------------

/// Candidate rules stated as "the function is to X" in a response.
inline std::vector<Rule> parse_rule_listfn(std::string_view raw) {
  static const std::regex marker(R"(the function is to\s+([^\n]*))", std::regex::icase);
  std::vector<Rule> out;
  const std::string s(raw);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), marker); it != std::sregex_iterator(); ++it) {
    try {
      out.push_back(grammar::listfn_rule((*it)[1].str()));
    } catch (const GrammarError&) {
    }
  }
  return out;
}

inline std::optional<List> parse_list(std::string_view s) {
  s = text::trim(s);
  if (s.size() < 2 || s.front() != '[' || s.back() != ']') return std::nullopt;
  List out;
  const auto body = text::trim(s.substr(1, s.size() - 2));
  if (body.empty()) return out;
  for (const auto& part : text::split(body, ',')) {
    const auto t = text::trim(part);
    if (t.empty() || t.size() > 12 ||
        !std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      return std::nullopt;
    }
    out.push_back(std::stoll(std::string(t)));
  }
  return out;
}

/// Predictions for `queries` read from "[..] -> [..]" lines; the last line per query wins.
inline std::vector<std::optional<List>> parse_answers(std::string_view raw, const std::vector<List>& queries) {
  std::map<List, List> seen;
  for (const auto& line : text::lines(raw)) {
    const auto arrow = line.find("->");
    if (arrow == std::string::npos) continue;
    const auto in = parse_list(std::string_view(line).substr(0, arrow));
    const auto out = parse_list(std::string_view(line).substr(arrow + 2));
    if (in && out) seen[*in] = *out;
  }
  std::vector<std::optional<List>> preds;
  for (const auto& q : queries) {
    auto it = seen.find(q);
    preds.push_back(it == seen.end() ? std::nullopt : std::optional<List>(it->second));
  }
  return preds;
}

struct Candidate {
  std::string text;
  double confidence = 0;
};

/// Confidence-descending, then text-ascending.
inline std::vector<Candidate> sorted_candidates(std::vector<Candidate> c) {
  std::sort(c.begin(), c.end(), [](const Candidate& a, const Candidate& b) {
    const auto ra = text::fixed(a.confidence, 2), rb = text::fixed(b.confidence, 2);
    return ra != rb ? ra > rb : a.text < b.text;
  });
  return c;
}

inline std::vector<Candidate> candidates_of(const RuleLibrary& lib) {
  std::vector<Candidate> out;
  for (const auto& [rule, tally] : lib.entries()) {
    out.push_back({rule.text, tally.occurrence > 0 ? confidence(tally) : 0.0});
  }
  return sorted_candidates(std::move(out));
}

inline std::vector<std::string> confidence_lines(const std::vector<Candidate>& c) {
  std::vector<std::string> out;
  for (const auto& x : sorted_candidates(c)) out.push_back(x.text + ": " + text::fixed(x.confidence, 2));
  return out;
}

/// Inverse of confidence_lines.
inline std::vector<Candidate> parse_confidence_lines(std::string_view block) {
  std::vector<Candidate> out;
  for (const auto& line : text::lines(block)) {
    const auto colon = line.rfind(": ");
    if (colon == std::string::npos) continue;
    try {
      out.push_back({line.substr(0, colon), std::stod(line.substr(colon + 2))});
    } catch (const std::exception&) {
    }
  }
  return out;
}

/// Training examples shown in the prompt: train then validation pairs.
inline std::vector<IOPair> shown_examples(const ListFnTask& t) {
  auto ex = t.train;
  ex.insert(ex.end(), t.validation.begin(), t.validation.end());
  return ex;
}

inline std::vector<List> test_queries(const ListFnTask& t) {
  std::vector<List> q;
  for (const auto& pr : t.test) q.push_back(pr.input);
  return q;
}

/// Zero-shot or few-shot prompt; candidates switch to the HtT template.
inline std::string build_prompt(const std::vector<IOPair>& examples, const std::vector<List>& queries, Mode mode,
                                const std::vector<Candidate>* candidates = nullptr) {
  TemplateContext ctx;
  std::vector<std::string> tq, ta, qs;
  for (const auto& pr : examples) {
    tq.push_back(format_list(pr.input));
    ta.push_back(format_list(pr.output));
  }
  for (const auto& q : queries) qs.push_back(format_list(q));
  ctx.set_list("train_queries", tq).set_list("train_answers", ta).set_list("test_queries", qs);
  std::string file = "prompts/listfn/";
  if (mode == Mode::zero_shot_cot) {
    if (candidates) throw DomainError("zero-shot prompting takes no candidate functions");
    file += "zero_shot.txt";
  } else if (mode == Mode::few_shot_ltm) {
    throw DomainError("list functions have no least-to-most prompt");
  } else {
    file += candidates ? "few_shot_cot_htt.txt" : "few_shot_cot.txt";
  }
  if (candidates) {
    std::vector<std::string> texts, confs;
    for (const auto& c : sorted_candidates(*candidates)) {
      texts.push_back(c.text);
      confs.push_back(text::fixed(c.confidence, 2));
    }
    ctx.set_list("rules", texts).set_list("confidence", confs);
  }
  return Template(read_prompt_asset(file)).render(ctx);
}

/// Deduction prompt: all training pairs as examples.
inline std::string build_prompt(const ListFnTask& task, const std::vector<List>& queries, Mode mode,
                                const std::vector<Candidate>* candidates = nullptr) {
  return build_prompt(shown_examples(task), queries, mode, candidates);
}

// ---- fixtures and serialization ---------------------------------------------

inline constexpr std::string_view kFixtureFormat = "httlab-listfn-rules/1";

struct FixtureTask {
  std::string ground_truth;
  Program program;
  std::vector<Candidate> rules;
};

struct Fixture {
  Subset subset = Subset::P1;
  std::string model;
  std::vector<FixtureTask> tasks;

  std::size_t rule_count() const {
    std::size_t n = 0;
    for (const auto& t : tasks) n += t.rules.size();
    return n;
  }
};

inline Fixture load_fixture(const std::string& path) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path, e.what());
  }
  if (j.value("format", "") != kFixtureFormat) throw ParseError(path, "format is not " + std::string(kFixtureFormat));
  Fixture f;
  f.subset = parse_subset(j.at("subset").get<std::string>());
  f.model = j.value("model", "");
  for (const auto& t : j.at("tasks")) {
    FixtureTask ft;
    ft.ground_truth = t.at("ground_truth").get<std::string>();
    ft.program = parse_program(t.at("program").get<std::string>());
    for (const auto& r : t.at("rules")) ft.rules.push_back({r.at("text").get<std::string>(), r.at("confidence").get<double>()});
    f.tasks.push_back(std::move(ft));
  }
  return f;
}

inline nlohmann::ordered_json to_json(const List& l) { return nlohmann::ordered_json(l); }

inline nlohmann::ordered_json to_json(const ListFnTask& t) {
  auto pairs = [](const std::vector<IOPair>& ps) {
    nlohmann::ordered_json a = nlohmann::ordered_json::array();
    for (const auto& p : ps) a.push_back({{"input", p.input}, {"output", p.output}});
    return a;
  };
  nlohmann::ordered_json j;
  j["task"] = "listfn";
  j["name"] = t.name;
  j["subset"] = std::string(to_string(t.subset));
  j["program"] = to_sexpr(t.program);
  j["train"] = pairs(t.train);
  j["validation"] = pairs(t.validation);
  j["test"] = pairs(t.test);
  return j;
}

/// Parses and re-verifies every output against the program.
inline ListFnTask from_json(const nlohmann::ordered_json& j) {
  if (j.value("task", "") != "listfn") throw TaskMismatchError("not a list-functions task");
  ListFnTask t;
  t.subset = parse_subset(j.at("subset").get<std::string>());
  t.program = parse_program(j.at("program").get<std::string>());
  t.name = j.value("name", to_sexpr(t.program));
  auto pairs = [&](const char* key, std::vector<IOPair>& dst) {
    for (const auto& p : j.at(key)) {
      IOPair pr{p.at("input").get<List>(), p.at("output").get<List>()};
      for (auto v : pr.input) {
        if (v < 0 || v > max_element(t.subset)) throw DomainError(std::string(key) + " input element out of range");
      }
      if (interpret(t.program, pr.input) != pr.output) throw DomainError(std::string(key) + " output disagrees with program");
      dst.push_back(std::move(pr));
    }
  };
  pairs("train", t.train);
  pairs("validation", t.validation);
  pairs("test", t.test);
  return t;
}

}  // namespace htt::listfn
