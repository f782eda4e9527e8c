#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "htt/rule.hpp"

namespace htt {

enum class Provenance { generated, retrieved, corrupted };

inline std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::generated: return "generated";
    case Provenance::retrieved: return "retrieved";
    case Provenance::corrupted: return "corrupted";
  }
  return "?";
}

struct Step {
  Rule rule;
  Provenance provenance = Provenance::generated;
  // Correct conclusion for this step's key, when known.
  std::optional<std::string> oracle;
};

/// Rule applications in order plus the final answer.
struct Trace {
  std::vector<Step> steps;
  std::optional<std::string> answer;
  std::string raw_text;

  std::vector<Rule> rules() const {
    std::vector<Rule> out;
    out.reserve(steps.size());
    for (const auto& s : steps) out.push_back(s.rule);
    return out;
  }

  std::size_t count(Provenance p) const {
    std::size_t n = 0;
    for (const auto& s : steps) n += s.provenance == p;
    return n;
  }
};

/// Best-effort labels for parsed traces: step i gets the conclusion of oracle
/// step i when both address the same key.
inline void annotate(Trace& t, const Trace& oracle) {
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    if (i < oracle.steps.size() && oracle.steps[i].rule.tag_path == t.steps[i].rule.tag_path) {
      t.steps[i].oracle = oracle.steps[i].rule.conclusion;
    }
  }
}

}  // namespace htt
