#pragma once

#include <memory>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "htt/grammar.hpp"
#include "htt/task.hpp"
#include "htt/tasks/arithmetic.hpp"
#include "htt/tasks/kinship.hpp"
#include "htt/trace.hpp"

// Uniform access to the multi-step tasks (kinship and arithmetic).
namespace htt {

using StepInstance = std::variant<kinship::KinshipInstance, arith::ArithInstance>;

inline std::string task_id(const StepInstance& inst) {
  if (const auto* a = std::get_if<arith::ArithInstance>(&inst)) return grammar::arith_task_id(a->base);
  return "kinship";
}

inline const std::string& gold(const StepInstance& inst) {
  return std::visit([](const auto& i) -> const std::string& { return i.gold; }, inst);
}

inline std::uint64_t seed_id(const StepInstance& inst) {
  return std::visit([](const auto& i) { return i.seed_id; }, inst);
}

/// Report column: hop count for kinship, digit count for arithmetic.
inline int group_of(const StepInstance& inst) {
  if (const auto* a = std::get_if<arith::ArithInstance>(&inst)) return a->digits();
  return static_cast<int>(std::get<kinship::KinshipInstance>(inst).chain.size());
}

inline std::unique_ptr<StepProblem> make_problem(const StepInstance& inst) {
  if (const auto* a = std::get_if<arith::ArithInstance>(&inst)) return std::make_unique<arith::Problem>(*a);
  return std::make_unique<kinship::Problem>(std::get<kinship::KinshipInstance>(inst));
}

inline Trace oracle_trace(const StepInstance& inst) {
  if (const auto* a = std::get_if<arith::ArithInstance>(&inst)) return arith::oracle_trace(*a);
  return kinship::oracle_trace(std::get<kinship::KinshipInstance>(inst));
}

inline std::set<Rule> oracle_rules(const std::vector<StepInstance>& instances) {
  std::set<Rule> out;
  for (const auto& inst : instances) {
    for (auto& r : oracle_trace(inst).rules()) out.insert(std::move(r));
  }
  return out;
}

inline std::string render_trace(const StepInstance& inst, const Trace& t, bool retrieve = false) {
  if (const auto* a = std::get_if<arith::ArithInstance>(&inst)) return arith::render_trace(*a, t, retrieve);
  return kinship::render_trace(std::get<kinship::KinshipInstance>(inst), t, retrieve);
}

inline Trace parse_trace(const StepInstance& inst, std::string_view raw) {
  if (const auto* a = std::get_if<arith::ArithInstance>(&inst)) return arith::parse_trace(a->base, raw);
  return kinship::parse_trace(raw);
}

inline std::string build_prompt(const StepInstance& inst, Mode mode, const RuleLibrary* library,
                                const RenderOptions& render = {}) {
  if (const auto* a = std::get_if<arith::ArithInstance>(&inst)) return arith::build_prompt(*a, mode, {library, render});
  return kinship::build_prompt(std::get<kinship::KinshipInstance>(inst), mode, {library, render});
}

/// Sub-prompt asking for the single rule at `key`.
inline std::string ltm_rule_prompt(const StepInstance& inst, const std::vector<std::string>& key,
                                   const RuleLibrary* library, const RenderOptions& render = {}) {
  if (const auto* a = std::get_if<arith::ArithInstance>(&inst)) {
    return arith::ltm_rule_prompt(a->base, key, {library, render});
  }
  return kinship::ltm_rule_prompt(key.at(0), key.at(1), {library, render});
}

/// Parses the reply to an ltm_rule_prompt into a conclusion for `key`.
inline std::optional<std::string> parse_ltm_reply(const StepInstance& inst, const std::vector<std::string>& key,
                                                  std::string_view reply) {
  for (const auto& s : parse_trace(inst, reply).steps) {
    if (s.rule.tag_path == key) return s.rule.conclusion;
  }
  return std::nullopt;
}

inline nlohmann::ordered_json to_json(const StepInstance& inst) {
  if (const auto* a = std::get_if<arith::ArithInstance>(&inst)) return arith::to_json(*a);
  return kinship::to_json(std::get<kinship::KinshipInstance>(inst));
}

inline StepInstance step_instance_from_json(const nlohmann::ordered_json& j) {
  const auto task = j.value("task", "");
  if (task == "kinship") return kinship::from_json(j);
  if (task == "arith") return arith::from_json(j);
  throw TaskMismatchError("not a kinship or arithmetic instance: '" + task + "'");
}

}  // namespace htt
