#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "htt/backends/reasoner.hpp"
#include "htt/common/error.hpp"
#include "htt/common/rng.hpp"
#include "htt/common/text.hpp"
#include "htt/instance.hpp"
#include "htt/rulelib.hpp"
#include "htt/tasks/listfn.hpp"
#include "htt/trace.hpp"

namespace htt::pipeline {

struct RunOptions {
  std::size_t workers = 1;
};

/// Runs body(i) for i in [0, n) on up to `workers` threads.
///
/// The first exception thrown by any call is rethrown after all threads join.
inline void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& body) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

inline void check_failures(std::size_t failures, std::size_t total, const char* stage) {
  if (total > 0 && failures * 2 > total) {
    throw AbortedRunError(std::string(stage) + " aborted: " + std::to_string(failures) + " of " +
                          std::to_string(total) + " backend calls failed");
  }
}

struct InductionRecord {
  std::uint64_t instance_id = 0;
  int group = 0;
  Trace trace;
  bool answer_correct = false;
  // Backend failure message; such records carry no trace.
  std::optional<std::string> failure;
  // Whether trace steps carry oracle conclusions (needed by classify_errors).
  bool annotated = false;
};

/// `n` draws from `train`: every example once, then uniform draws with
/// replacement. Copies get fresh ids above the largest original id so each
/// draw is an independent trial.
inline std::vector<StepInstance> resample(const std::vector<StepInstance>& train, std::size_t n, std::uint64_t seed) {
  if (train.empty()) throw DomainError("cannot resample an empty training set");
  if (n <= train.size()) return {train.begin(), train.begin() + static_cast<std::ptrdiff_t>(n)};
  std::vector<StepInstance> out = train;
  std::uint64_t next_id = 0;
  for (const auto& t : train) next_id = std::max(next_id, seed_id(t) + 1);
  Rng rng(derive_seed(seed, 0x5E5A));
  while (out.size() < n) {
    StepInstance copy = train[rng.below(train.size())];
    std::visit([&](auto& i) { i.seed_id = next_id++; }, copy);
    out.push_back(std::move(copy));
  }
  return out;
}

namespace detail {

inline InductionRecord solve_one(Reasoner& r, const StepInstance& inst, const RuleLibrary* lib) {
  InductionRecord rec;
  rec.instance_id = seed_id(inst);
  rec.group = group_of(inst);
  try {
    rec.trace = r.solve(inst, lib, rec.instance_id);
    rec.answer_correct = rec.trace.answer && *rec.trace.answer == gold(inst);
    rec.annotated = std::any_of(rec.trace.steps.begin(), rec.trace.steps.end(),
                                [](const Step& s) { return s.oracle.has_value(); }) ||
                    rec.trace.steps.empty();
  } catch (const BackendError& e) {
    rec.failure = e.what();
  }
  return rec;
}

}  // namespace detail

struct InductionResult {
  RuleLibrary tally;     // unfiltered
  RuleLibrary library;   // filtered
  std::vector<InductionRecord> records;
  std::size_t failures = 0;
};

/// Generates rules on every training instance and keeps those passing `filter`.
inline InductionResult run_induction(Reasoner& reasoner, const std::vector<StepInstance>& train,
                                     const FilterParams& filter, const RunOptions& opt = {}) {
  filter.validate();
  if (train.empty()) throw DomainError("empty training set");
  const std::string task = task_id(train.front());
  for (const auto& inst : train) {
    if (task_id(inst) != task) throw TaskMismatchError("mixed tasks in one training set");
  }
  std::vector<InductionRecord> records(train.size());
  parallel_for(train.size(), opt.workers, [&](std::size_t i) { records[i] = detail::solve_one(reasoner, train[i], nullptr); });
  InductionResult res{RuleLibrary(task), RuleLibrary(task), {}, 0};
  for (const auto& rec : records) {
    if (rec.failure) {
      ++res.failures;
      continue;
    }
    res.tally.record(rec.trace.rules(), rec.answer_correct);
  }
  check_failures(res.failures, records.size(), "induction");
  res.library = res.tally.filter(filter);
  res.records = std::move(records);
  return res;
}

enum class ErrorCategory { correct, incorrect_rules_only, incorrect_rules_and_other, retrieval, non_retrieval };

inline std::string_view to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::correct: return "correct";
    case ErrorCategory::incorrect_rules_only: return "incorrect_rules_only";
    case ErrorCategory::incorrect_rules_and_other: return "incorrect_rules_and_other";
    case ErrorCategory::retrieval: return "retrieval";
    case ErrorCategory::non_retrieval: return "non_retrieval";
  }
  return "?";
}

inline ErrorCategory classify(const InductionRecord& rec) {
  if (!rec.annotated) throw EvalError("record " + std::to_string(rec.instance_id) + " has no oracle annotations");
  if (rec.answer_correct) return ErrorCategory::correct;
  bool bad_generated = false, bad_retrieved = false;
  for (const auto& s : rec.trace.steps) {
    if (!s.oracle || s.rule.conclusion == *s.oracle) continue;
    (s.provenance == Provenance::retrieved ? bad_retrieved : bad_generated) = true;
  }
  const bool other = bad_retrieved || !rec.trace.answer;
  if (bad_generated) return other ? ErrorCategory::incorrect_rules_and_other : ErrorCategory::incorrect_rules_only;
  if (bad_retrieved) return ErrorCategory::retrieval;
  return ErrorCategory::non_retrieval;
}

inline std::map<ErrorCategory, std::size_t> classify_errors(const std::vector<InductionRecord>& records) {
  std::map<ErrorCategory, std::size_t> out;
  for (const auto& rec : records) {
    if (!rec.failure) ++out[classify(rec)];
  }
  return out;
}

struct PrecisionRecall {
  std::optional<double> precision;  // undefined for an empty library
  double recall = 0;
  std::size_t learned = 0;
  std::size_t oracle = 0;
  std::size_t hits = 0;
};

inline PrecisionRecall rule_precision_recall(const RuleLibrary& learned, const std::set<Rule>& oracle) {
  if (oracle.empty()) throw DomainError("oracle rule set is empty");
  PrecisionRecall pr;
  pr.learned = learned.size();
  pr.oracle = oracle.size();
  for (const auto& r : learned.rules()) pr.hits += oracle.count(r);
  if (pr.learned) pr.precision = static_cast<double>(pr.hits) / static_cast<double>(pr.learned);
  pr.recall = static_cast<double>(pr.hits) / static_cast<double>(pr.oracle);
  return pr;
}

struct GroupStat {
  std::string group;
  std::size_t n = 0;
  std::size_t correct = 0;
  double accuracy = 0;
};

struct EvalReport {
  std::string task;
  std::vector<GroupStat> groups;
  double average = 0;  // unweighted mean of group accuracies
  std::size_t n = 0;
  std::size_t failures = 0;
  std::map<ErrorCategory, std::size_t> errors;
  std::optional<std::size_t> library_size;
  std::optional<PrecisionRecall> library_quality;
  std::vector<InductionRecord> records;
};

inline double unweighted_average(const std::vector<GroupStat>& groups) {
  if (groups.empty()) throw EvalError("report has no groups");
  double s = 0;
  for (const auto& g : groups) s += g.accuracy;
  return s / static_cast<double>(groups.size());
}

/// Answers every test instance, retrieving from `library` when given.
inline EvalReport run_deduction(Reasoner& reasoner, const RuleLibrary* library, const std::vector<StepInstance>& test,
                                const RunOptions& opt = {}) {
  if (test.empty()) throw EvalError("empty test set");
  EvalReport rep;
  rep.task = task_id(test.front());
  if (library && library->task_id() != rep.task) {
    throw TaskMismatchError("library for " + library->task_id() + " used on " + rep.task);
  }
  std::vector<InductionRecord> records(test.size());
  parallel_for(test.size(), opt.workers, [&](std::size_t i) { records[i] = detail::solve_one(reasoner, test[i], library); });
  std::map<int, GroupStat> groups;
  for (const auto& rec : records) {
    if (rec.failure) {
      ++rep.failures;
      continue;
    }
    auto& g = groups[rec.group];
    g.group = std::to_string(rec.group);
    ++g.n;
    g.correct += rec.answer_correct;
  }
  check_failures(rep.failures, records.size(), "deduction");
  for (auto& [k, g] : groups) {
    g.accuracy = static_cast<double>(g.correct) / static_cast<double>(g.n);
    rep.groups.push_back(g);
    rep.n += g.n;
  }
  rep.average = unweighted_average(rep.groups);
  if (std::all_of(records.begin(), records.end(), [](const InductionRecord& r) { return r.failure || r.annotated; })) {
    rep.errors = classify_errors(records);
  }
  if (library) rep.library_size = library->size();
  rep.records = std::move(records);
  return rep;
}

// ---- list functions ----------------------------------------------------------

struct ListInduction {
  std::map<std::string, RuleLibrary> tally;     // per task, unfiltered
  std::map<std::string, RuleLibrary> library;   // per task, filtered
  std::size_t failures = 0;
  std::size_t calls = 0;
};

/// Proposes candidates per task and scores each on the validation split.
///
/// A candidate's tally is (validation pairs, pairs predicted exactly), so its
/// confidence is its validation accuracy.
inline ListInduction run_listfn_induction(Reasoner& reasoner, const std::vector<listfn::ListFnTask>& tasks,
                                          std::size_t calls_per_task, const FilterParams& filter,
                                          const RunOptions& opt = {}) {
  filter.validate();
  if (tasks.empty()) throw DomainError("no list-function tasks");
  if (calls_per_task == 0) throw DomainError("calls per task must be positive");
  std::vector<RuleLibrary> tallies(tasks.size(), RuleLibrary("listfn"));
  std::vector<std::size_t> failures(tasks.size(), 0);
  parallel_for(tasks.size(), opt.workers, [&](std::size_t t) {
    const auto& task = tasks[t];
    std::set<Rule> seen;
    for (std::size_t c = 0; c < calls_per_task; ++c) {
      const std::uint64_t stream = t * calls_per_task + c;
      try {
        for (const auto& cand : reasoner.propose(task, stream)) {
          if (!seen.insert(cand).second) continue;
          const double conf = listfn::score_candidate(reasoner.applier(task, cand, stream), task.validation);
          const auto n = static_cast<std::int64_t>(task.validation.size());
          tallies[t].add(cand, {n, static_cast<std::int64_t>(std::llround(conf * static_cast<double>(n)))});
        }
      } catch (const BackendError&) {
        ++failures[t];
      }
    }
  });
  ListInduction res;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    res.failures += failures[t];
    res.tally.emplace(tasks[t].name, tallies[t]);
    res.library.emplace(tasks[t].name, tallies[t].filter(filter));
  }
  res.calls = tasks.size() * calls_per_task;
  check_failures(res.failures, res.calls, "induction");
  return res;
}

struct ListTaskResult {
  std::string name;
  listfn::Subset subset = listfn::Subset::P1;
  listfn::TaskScore score;
};

/// Groups are "raw" (pair accuracy) and "task" (fully solved tasks).
inline EvalReport run_listfn_deduction(Reasoner& reasoner, const std::map<std::string, RuleLibrary>* libraries,
                                       const std::vector<listfn::ListFnTask>& tasks, const RunOptions& opt = {},
                                       std::vector<ListTaskResult>* per_task = nullptr) {
  if (tasks.empty()) throw EvalError("empty test set");
  std::vector<std::optional<listfn::TaskScore>> scores(tasks.size());
  parallel_for(tasks.size(), opt.workers, [&](std::size_t t) {
    const RuleLibrary* lib = nullptr;
    if (libraries) {
      auto it = libraries->find(tasks[t].name);
      if (it != libraries->end()) lib = &it->second;
    }
    try {
      scores[t] = listfn::score_task(reasoner.answer(tasks[t], lib, t), tasks[t]);
    } catch (const BackendError&) {
    }
  });
  EvalReport rep;
  rep.task = "listfn";
  std::vector<listfn::TaskScore> ok;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    if (!scores[t]) {
      ++rep.failures;
      continue;
    }
    ok.push_back(*scores[t]);
    if (per_task) per_task->push_back({tasks[t].name, tasks[t].subset, *scores[t]});
  }
  check_failures(rep.failures, tasks.size(), "deduction");
  const auto agg = listfn::aggregate(ok, listfn::kTestSize);
  std::size_t hits = 0, solved = 0;
  for (const auto& s : ok) {
    hits += s.raw_hits;
    solved += s.solved;
  }
  rep.groups = {{"raw", ok.size() * listfn::kTestSize, hits, agg.raw_accuracy},
                {"task", ok.size(), solved, agg.task_accuracy}};
  rep.n = ok.size();
  rep.average = agg.raw_accuracy;  // the summary figure for list functions is raw accuracy
  if (libraries) {
    std::size_t n = 0;
    for (const auto& [name, lib] : *libraries) n += lib.size();
    rep.library_size = n;
  }
  return rep;
}

// ---- search and sweeps ---------------------------------------------------------

inline const std::vector<std::int64_t>& default_k_grid() {
  static const std::vector<std::int64_t> g = {1, 2, 3};
  return g;
}

inline const std::vector<double>& default_p_grid() {
  static const std::vector<double> g = {0.1, 0.3, 0.5, 0.7, 0.9};
  return g;
}

struct GridCell {
  FilterParams params;
  std::size_t library_size = 0;
  double accuracy = 0;
};

struct GridResult {
  FilterParams best;
  std::vector<GridCell> cells;
  std::size_t induction_examples = 0;
};

/// One induction pass, then each (k, p) cell filters the tally and is scored
/// on validation. Ties go to the smaller library, then to grid order.
inline GridResult grid_search(Reasoner& reasoner, const std::vector<StepInstance>& train,
                              const std::vector<StepInstance>& validation, const std::vector<std::int64_t>& k_grid,
                              const std::vector<double>& p_grid, const RunOptions& opt = {}) {
  if (k_grid.empty() || p_grid.empty()) throw DomainError("grids must be nonempty");
  const auto induced = run_induction(reasoner, train, FilterParams{1, 0.0}, opt);
  GridResult res;
  res.induction_examples = train.size();
  const GridCell* best = nullptr;
  res.cells.reserve(k_grid.size() * p_grid.size());
  for (auto k : k_grid) {
    for (auto p : p_grid) {
      const FilterParams fp{k, p};
      const auto lib = induced.tally.filter(fp);
      const auto rep = run_deduction(reasoner, &lib, validation, opt);
      res.cells.push_back({fp, lib.size(), rep.average});
    }
  }
  for (const auto& c : res.cells) {
    if (!best || c.accuracy > best->accuracy + 1e-12 ||
        (std::abs(c.accuracy - best->accuracy) <= 1e-12 && c.library_size < best->library_size)) {
      best = &c;
    }
  }
  res.best = best->params;
  return res;
}

struct SweepRow {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::string group;
  double accuracy = 0;
  double recall = 0;
};

inline constexpr std::string_view kSweepHeader = "N,seed,group,accuracy,recall";

using ReasonerFactory = std::function<std::unique_ptr<Reasoner>(std::uint64_t seed)>;

/// For each seed and N: induce on the first N training examples, deduce on
/// `test`. Emits one row per report group plus an "average" row.
inline std::vector<SweepRow> scaling_sweep(const ReasonerFactory& make, const std::vector<StepInstance>& train,
                                           const std::vector<StepInstance>& test, const std::vector<std::size_t>& ns,
                                           const std::vector<std::uint64_t>& seeds, const FilterParams& filter,
                                           const RunOptions& opt = {}) {
  if (!std::is_sorted(ns.begin(), ns.end())) throw DomainError("sweep sizes must be ascending");
  std::vector<SweepRow> rows;
  for (auto seed : seeds) {
    auto reasoner = make(seed);
    for (auto n : ns) {
      const std::vector<StepInstance> head(train.begin(), train.begin() + static_cast<std::ptrdiff_t>(std::min(n, train.size())));
      const auto induced = run_induction(*reasoner, head, filter, opt);
      const auto pr = rule_precision_recall(induced.library, oracle_rules(head));
      const auto rep = run_deduction(*reasoner, &induced.library, test, opt);
      for (const auto& g : rep.groups) rows.push_back({n, seed, g.group, g.accuracy, pr.recall});
      rows.push_back({n, seed, "average", rep.average, pr.recall});
    }
  }
  return rows;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out(kSweepHeader);
  out += "\n";
  for (const auto& r : rows) {
    out += std::to_string(r.n) + "," + std::to_string(r.seed) + "," + r.group + "," + text::fixed(r.accuracy, 4) + "," +
           text::fixed(r.recall, 4) + "\n";
  }
  return out;
}

// ---- reports -------------------------------------------------------------------

inline std::string report_csv(const EvalReport& rep) {
  std::string out = "group,n,correct,accuracy\n";
  for (const auto& g : rep.groups) {
    out += g.group + "," + std::to_string(g.n) + "," + std::to_string(g.correct) + "," + text::fixed(g.accuracy, 4) + "\n";
  }
  out += "average," + std::to_string(rep.n) + ",," + text::fixed(rep.average, 4) + "\n";
  return out;
}

inline nlohmann::ordered_json report_json(const EvalReport& rep) {
  nlohmann::ordered_json j;
  j["task"] = rep.task;
  j["n"] = rep.n;
  j["failures"] = rep.failures;
  auto& groups = j["groups"] = nlohmann::ordered_json::array();
  for (const auto& g : rep.groups) {
    groups.push_back({{"group", g.group}, {"n", g.n}, {"correct", g.correct}, {"accuracy", g.accuracy}});
  }
  j["average"] = rep.average;
  if (!rep.errors.empty()) {
    auto& e = j["errors"] = nlohmann::ordered_json::object();
    for (const auto& [c, n] : rep.errors) e[std::string(to_string(c))] = n;
  }
  if (rep.library_size) j["library_size"] = *rep.library_size;
  return j;
}

}  // namespace htt::pipeline
