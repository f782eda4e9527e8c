#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "htt/common/error.hpp"
#include "htt/rule.hpp"

namespace htt {

enum class Mode { zero_shot_cot, few_shot_cot, few_shot_ltm };

inline std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::zero_shot_cot: return "zero_shot_cot";
    case Mode::few_shot_cot: return "few_shot_cot";
    case Mode::few_shot_ltm: return "few_shot_ltm";
  }
  return "?";
}

inline Mode parse_mode(std::string_view s) {
  if (s == "zero_shot_cot") return Mode::zero_shot_cot;
  if (s == "few_shot_cot") return Mode::few_shot_cot;
  if (s == "few_shot_ltm") return Mode::few_shot_ltm;
  throw DomainError("unknown mode: " + std::string(s));
}

/// Step-wise view of one instance, driven by whatever conclusions a reasoner emits.
///
/// The next key depends on earlier emitted conclusions (the kinship chain is
/// reduced with the emitted label, the arithmetic carry comes from the emitted
/// column result), so a wrong step changes the rest of the trace.
class StepProblem {
 public:
  virtual ~StepProblem() = default;

  virtual bool done() const = 0;
  // Tag path of the rule needed next.
  virtual std::vector<std::string> key() const = 0;
  // Correct conclusion for key(), or nullopt once the state has left the
  // instance's grounded path and no conclusion is correct by construction.
  virtual std::optional<std::string> truth() const = 0;
  virtual Rule make_rule(const std::string& conclusion) const = 0;
  // Applies a rule for key(). Returns false if the conclusion cannot be
  // executed (the reasoner abstains from here on).
  virtual bool advance(const Rule& applied) = 0;
  virtual std::optional<std::string> answer() const = 0;
  // Every conclusion a rule of this task may carry.
  virtual const std::vector<std::string>& domain() const = 0;
};

}  // namespace htt
