#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "htt/instance.hpp"
#include "htt/rulelib.hpp"
#include "htt/tasks/listfn.hpp"
#include "htt/trace.hpp"

namespace htt {

/// Something that answers task instances with an explicit rule trace.
///
/// `stream` identifies the call (normally the instance id) so seeded
/// implementations stay independent of scheduling. Implementations must be
/// safe to call from several threads at once.
class Reasoner {
 public:
  virtual ~Reasoner() = default;

  // Multi-step tasks. Without a library this is plain chain-of-thought (the
  // induction prompt); with one the reasoner retrieves from it.
  virtual Trace solve(const StepInstance& inst, const RuleLibrary* library, std::uint64_t stream) = 0;

  // List functions: one induction call proposing candidate rules.
  virtual std::vector<Rule> propose(const listfn::ListFnTask& task, std::uint64_t stream) = 0;
  // How a candidate rule maps inputs to outputs, for validation scoring.
  virtual listfn::Applier applier(const listfn::ListFnTask& task, const Rule& candidate, std::uint64_t stream) = 0;
  // Predictions for the task's test inputs, optionally guided by candidates.
  virtual std::vector<std::optional<listfn::List>> answer(const listfn::ListFnTask& task, const RuleLibrary* library,
                                                          std::uint64_t stream) = 0;
};

}  // namespace htt
