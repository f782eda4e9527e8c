#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "htt/common/error.hpp"
#include "htt/grammar.hpp"
#include "htt/rule.hpp"

namespace htt::config {

inline constexpr std::string_view kTasks[] = {"kinship", "arith-9", "arith-11", "arith-16", "listfn"};

inline void check_task(std::string_view task) {
  for (auto t : kTasks) {
    if (t == task) return;
  }
  throw ConfigurationError("unknown task '" + std::string(task) + "' (kinship, arith-9, arith-11, arith-16, listfn)");
}

/// Tuned (k, p) per task.
inline FilterParams default_filter(std::string_view task) {
  check_task(task);
  if (task == "kinship") return {2, 0.7};
  if (task == "arith-16") return {2, 0.5};
  if (task == "arith-11" || task == "arith-9") return {2, 0.3};
  return {1, 0.1};
}

/// Training draws per induction run; smaller training sets are resampled up to it.
inline constexpr std::size_t kInductionDraws = 2000;

struct SplitSizes {
  std::size_t train = 0;
  std::size_t validation = 0;  // arithmetic: per digit count
  std::size_t test = 0;        // arithmetic: per digit count
};

inline SplitSizes default_splits(std::string_view task) {
  check_task(task);
  if (task == "kinship") return {2000, 200, 200};
  if (task == "listfn") return {8, 8, 16};
  return {900, 100, 100};
}

inline constexpr int kKinshipTrainHops[2] = {2, 3};
inline constexpr int kKinshipTestHops[2] = {2, 10};
inline constexpr int kArithTrainDigits = 2;
inline constexpr int kArithTestDigits[2] = {2, 4};

/// Induction calls per list-function task.
inline constexpr std::size_t kListCallsPerTask = 8;

}  // namespace htt::config
