#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "htt/backends/reasoner.hpp"
#include "htt/common/error.hpp"
#include "htt/common/rng.hpp"
#include "htt/rulelib.hpp"
#include "htt/task.hpp"
#include "htt/tasks/listfn.hpp"
#include "htt/trace.hpp"

namespace htt::sim {

/// epsilon: per-step chance a generated rule gets a wrong conclusion.
/// rho: chance a retrieval returns a sibling under the same first tag.
struct SimParams {
  double epsilon = 0.2;
  double rho = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw DomainError("epsilon must lie in [0, 1]");
    if (!(rho >= 0.0 && rho <= 1.0)) throw DomainError("rho must lie in [0, 1]");
  }
};

namespace detail {

// Generates the rule for p.key(): the truth with probability 1 - epsilon,
// otherwise a different conclusion. Off the grounded path no conclusion is
// known to be right, so one is drawn uniformly.
inline Step generate_step(const StepProblem& p, Rng& rng, double epsilon) {
  const auto& domain = p.domain();
  if (domain.empty()) throw DomainError("empty conclusion domain");
  const auto truth = p.truth();
  if (truth && !rng.bernoulli(epsilon)) return {p.make_rule(*truth), Provenance::generated, truth};
  std::vector<const std::string*> options;
  for (const auto& c : domain) {
    if (!truth || c != *truth) options.push_back(&c);
  }
  if (options.empty()) throw DomainError("no conclusion other than the truth to corrupt into");
  const std::string& pick = *options[rng.below(options.size())];
  if (truth && pick == *truth) throw DomainError("corrupted conclusion equals the truth");
  return {p.make_rule(pick), truth ? Provenance::corrupted : Provenance::generated, truth};
}

inline Trace finish(StepProblem& p, Trace t) {
  t.answer = p.done() ? p.answer() : std::nullopt;
  return t;
}

}  // namespace detail

/// Induction-time trace: every rule is generated.
inline Trace simulate_induction(StepProblem& p, const SimParams& sim, std::uint64_t instance_id) {
  sim.validate();
  Rng rng(derive_seed(sim.seed, instance_id));
  Trace t;
  while (!p.done()) {
    Step s = detail::generate_step(p, rng, sim.epsilon);
    if (!p.advance(s.rule)) break;
    t.steps.push_back(std::move(s));
  }
  return detail::finish(p, std::move(t));
}

/// Deduction-time trace: retrieve when the library has the key, else generate.
inline Trace simulate_deduction(StepProblem& p, const RuleLibrary& library, const SimParams& sim,
                                std::uint64_t instance_id) {
  sim.validate();
  Rng rng(derive_seed(sim.seed, instance_id));
  Trace t;
  while (!p.done()) {
    const auto key = p.key();
    Step s;
    if (const Rule* best = library.best(key)) {
      s = {*best, Provenance::retrieved, p.truth()};
      if (sim.rho > 0 && !key.empty() && rng.bernoulli(sim.rho)) {
        std::vector<Rule> siblings;
        for (auto& [r, tally] : library.under({key.front()})) {
          if (r.tag_path != key) siblings.push_back(r);
        }
        if (!siblings.empty()) s.rule = p.make_rule(siblings[rng.below(siblings.size())].conclusion);
      }
    } else {
      s = detail::generate_step(p, rng, sim.epsilon);
    }
    if (!p.advance(s.rule)) break;
    t.steps.push_back(std::move(s));
  }
  return detail::finish(p, std::move(t));
}

/// Seeded reasoner over structured traces.
///
/// List-function candidates are sentences from describe(); a candidate is
/// executable when its text names a program of the task's subset catalog.
class SimulatedReasoner final : public Reasoner {
 public:
  explicit SimulatedReasoner(SimParams sim) : sim_(sim) { sim_.validate(); }

  const SimParams& params() const { return sim_; }

  Trace solve(const StepInstance& inst, const RuleLibrary* library, std::uint64_t stream) override {
    auto p = make_problem(inst);
    return library ? simulate_deduction(*p, *library, sim_, stream) : simulate_induction(*p, sim_, stream);
  }

  std::vector<Rule> propose(const listfn::ListFnTask& task, std::uint64_t stream) override {
    Rng rng(derive_seed(sim_.seed, stream));
    return {grammar::listfn_rule(listfn::describe(guess(task, rng)))};
  }

  listfn::Applier applier(const listfn::ListFnTask& task, const Rule& candidate, std::uint64_t) override {
    auto prog = resolve(task, candidate.text);
    return [prog](const listfn::List& x) -> std::optional<listfn::List> {
      if (!prog) return std::nullopt;
      return listfn::interpret(*prog, x);
    };
  }

  std::vector<std::optional<listfn::List>> answer(const listfn::ListFnTask& task, const RuleLibrary* library,
                                                  std::uint64_t stream) override {
    Rng rng(derive_seed(sim_.seed, stream));
    std::optional<listfn::Program> prog;
    if (library && !library->empty()) {
      const auto cands = listfn::candidates_of(*library);
      std::size_t pick = 0;
      if (cands.size() > 1 && sim_.rho > 0 && rng.bernoulli(sim_.rho)) pick = 1 + rng.below(cands.size() - 1);
      prog = resolve(task, cands[pick].text);
    } else {
      prog = guess(task, rng);
    }
    std::vector<std::optional<listfn::List>> out;
    for (const auto& pr : task.test) {
      out.push_back(prog ? std::optional<listfn::List>(listfn::interpret(*prog, pr.input)) : std::nullopt);
    }
    return out;
  }

 private:
  listfn::Program guess(const listfn::ListFnTask& task, Rng& rng) const {
    if (!rng.bernoulli(sim_.epsilon)) return task.program;
    std::vector<listfn::Program> others;
    for (auto& p : listfn::catalog(task.subset)) {
      if (!(p == task.program)) others.push_back(std::move(p));
    }
    if (others.empty()) throw DomainError("catalog has no alternative program");
    return others[rng.below(others.size())];
  }

  static std::optional<listfn::Program> resolve(const listfn::ListFnTask& task, const std::string& text) {
    if (grammar::listfn_rule(listfn::describe(task.program)).text == text) return task.program;
    for (auto& p : listfn::catalog(task.subset)) {
      if (grammar::listfn_rule(listfn::describe(p)).text == text) return p;
    }
    return std::nullopt;
  }

  SimParams sim_;
};

}  // namespace htt::sim
