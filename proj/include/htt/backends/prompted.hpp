#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "htt/backends/completion.hpp"
#include "htt/backends/reasoner.hpp"
#include "htt/instance.hpp"
#include "htt/rulelib.hpp"
#include "htt/task.hpp"
#include "htt/tasks/listfn.hpp"

namespace htt::backend {

/// Builds the task prompt, sends it through a completion function and parses
/// the reply with the task's trace grammar.
///
/// Least-to-most mode walks the instance step by step and asks one rule
/// sub-prompt per step; chain-of-thought modes send a single prompt.
class PromptedReasoner final : public Reasoner {
 public:
  using Complete = std::function<std::string(const std::string& prompt, std::uint64_t sample)>;

  PromptedReasoner(Complete complete, Mode mode, RenderOptions render = {})
      : complete_(std::move(complete)), mode_(mode), render_(std::move(render)) {}

  static std::unique_ptr<PromptedReasoner> over(std::shared_ptr<CompletionClient> client, Mode mode,
                                                RenderOptions render = {}) {
    return std::make_unique<PromptedReasoner>(
        [client](const std::string& prompt, std::uint64_t sample) { return client->complete(prompt, sample); }, mode,
        std::move(render));
  }

  Trace solve(const StepInstance& inst, const RuleLibrary* library, std::uint64_t stream) override {
    Trace t = mode_ == Mode::few_shot_ltm ? least_to_most(inst, library, stream) : chain_of_thought(inst, library, stream);
    if (library) {
      for (auto& s : t.steps) {
        if (library->contains(s.rule)) s.provenance = Provenance::retrieved;
      }
    }
    try {
      annotate(t, oracle_trace(inst));
    } catch (const OracleGapError&) {
    }
    return t;
  }

  std::vector<Rule> propose(const listfn::ListFnTask& task, std::uint64_t stream) override {
    std::vector<listfn::List> queries;
    for (const auto& pr : task.validation) queries.push_back(pr.input);
    const Mode m = mode_ == Mode::few_shot_ltm ? Mode::few_shot_cot : mode_;
    return listfn::parse_rule_listfn(complete_(listfn::build_prompt(task.train, queries, m), stream));
  }

  // Asks once for every validation input with the candidate as the only
  // potential function, then answers from that reply.
  listfn::Applier applier(const listfn::ListFnTask& task, const Rule& candidate, std::uint64_t stream) override {
    auto memo = std::make_shared<std::optional<std::vector<std::optional<listfn::List>>>>();
    std::vector<listfn::List> queries;
    for (const auto& pr : task.validation) queries.push_back(pr.input);
    return [this, &task, candidate, stream, memo, queries](const listfn::List& x) -> std::optional<listfn::List> {
      if (!*memo) {
        const std::vector<listfn::Candidate> one = {{candidate.text, 1.0}};
        *memo = listfn::parse_answers(complete_(listfn::build_prompt(task.train, queries, Mode::few_shot_cot, &one), stream),
                                      queries);
      }
      for (std::size_t i = 0; i < queries.size(); ++i) {
        if (queries[i] == x) return (**memo)[i];
      }
      return std::nullopt;
    };
  }

  std::vector<std::optional<listfn::List>> answer(const listfn::ListFnTask& task, const RuleLibrary* library,
                                                  std::uint64_t stream) override {
    const auto queries = listfn::test_queries(task);
    const Mode m = mode_ == Mode::few_shot_ltm ? Mode::few_shot_cot : mode_;
    std::optional<std::vector<listfn::Candidate>> cands;
    if (library) cands = listfn::candidates_of(*library);
    return listfn::parse_answers(complete_(listfn::build_prompt(task, queries, m, cands ? &*cands : nullptr), stream),
                                 queries);
  }

 private:
  Trace chain_of_thought(const StepInstance& inst, const RuleLibrary* library, std::uint64_t stream) {
    const std::string reply = complete_(build_prompt(inst, mode_, library, render_), stream);
    return parse_trace(inst, reply);
  }

  Trace least_to_most(const StepInstance& inst, const RuleLibrary* library, std::uint64_t stream) {
    auto p = make_problem(inst);
    Trace t;
    std::uint64_t sub = 0;
    while (!p->done()) {
      const auto key = p->key();
      const std::string reply = complete_(ltm_rule_prompt(inst, key, library, render_), derive_seed(stream, sub++));
      t.raw_text += reply + "\n";
      const auto conclusion = parse_ltm_reply(inst, key, reply);
      if (!conclusion) break;
      Rule r;
      try {
        r = p->make_rule(*conclusion);
      } catch (const GrammarError&) {
        break;
      }
      if (!p->advance(r)) break;
      t.steps.push_back({r, Provenance::generated, std::nullopt});
    }
    if (p->done()) t.answer = p->answer();
    return t;
  }

  Complete complete_;
  Mode mode_;
  RenderOptions render_;
};

}  // namespace htt::backend
