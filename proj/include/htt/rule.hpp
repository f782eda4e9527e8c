#pragma once

#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "htt/common/error.hpp"

namespace htt {

/// A textual rule addressed by a tag path.
///
/// Identity is (tag_path, text); the conclusion is derived from the text by
/// the owning task's grammar and is carried along so ablations can rewrite it.
struct Rule {
  std::vector<std::string> tag_path;
  std::string text;
  std::string conclusion;

  friend bool operator==(const Rule& a, const Rule& b) {
    return a.tag_path == b.tag_path && a.text == b.text;
  }
  friend bool operator<(const Rule& a, const Rule& b) {
    return std::tie(a.tag_path, a.text) < std::tie(b.tag_path, b.text);
  }
};

struct RuleTally {
  std::int64_t occurrence = 0;
  std::int64_t correct = 0;

  friend bool operator==(const RuleTally&, const RuleTally&) = default;
};

inline double confidence(const RuleTally& t) {
  if (t.occurrence <= 0) throw ConfidenceError("confidence undefined for a rule with zero occurrence");
  return static_cast<double>(t.correct) / static_cast<double>(t.occurrence);
}

/// Minimal coverage k and minimal confidence p. Both thresholds are inclusive.
struct FilterParams {
  std::int64_t k = 1;
  double p = 0.0;

  void validate() const {
    if (k < 1) throw DomainError("minimal coverage k must be >= 1");
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("minimal confidence p must lie in [0, 1]");
  }
  friend bool operator==(const FilterParams&, const FilterParams&) = default;
};

}  // namespace htt
