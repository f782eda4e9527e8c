#include <gtest/gtest.h>

#include <filesystem>

#include "htt/htt.hpp"

using namespace htt;
using namespace htt::pipeline;

namespace {

std::vector<StepInstance> steps(const std::vector<arith::ArithInstance>& xs) { return {xs.begin(), xs.end()}; }

std::vector<StepInstance> steps(const std::vector<kinship::KinshipInstance>& xs) { return {xs.begin(), xs.end()}; }

// Fails every call whose stream is divisible by `every`.
class FlakyReasoner final : public Reasoner {
 public:
  FlakyReasoner(std::uint64_t every, sim::SimParams p) : every_(every), inner_(p) {}

  Trace solve(const StepInstance& inst, const RuleLibrary* library, std::uint64_t stream) override {
    if (stream % every_ == 0) throw TransportError("down");
    return inner_.solve(inst, library, stream);
  }
  std::vector<Rule> propose(const listfn::ListFnTask& task, std::uint64_t stream) override {
    if (stream % every_ == 0) throw TransportError("down");
    return inner_.propose(task, stream);
  }
  listfn::Applier applier(const listfn::ListFnTask& task, const Rule& c, std::uint64_t stream) override {
    return inner_.applier(task, c, stream);
  }
  std::vector<std::optional<listfn::List>> answer(const listfn::ListFnTask& task, const RuleLibrary* library,
                                                  std::uint64_t stream) override {
    return inner_.answer(task, library, stream);
  }

 private:
  std::uint64_t every_;
  sim::SimulatedReasoner inner_;
};

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("htt-pipeline-" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST(Pipeline, InductionIsIndependentOfWorkerCount) {
  const auto train = steps(kinship::generate(200, 2, 3, 5));
  sim::SimulatedReasoner r({0.3, 0.0, 9});
  const auto one = run_induction(r, train, {2, 0.7}, {1});
  const auto four = run_induction(r, train, {2, 0.7}, {4});
  EXPECT_EQ(one.tally, four.tally);
  EXPECT_EQ(one.library, four.library);
  EXPECT_EQ(serialize(one.library), serialize(four.library));
}

TEST(Pipeline, InductionTalliesOncePerExample) {
  const auto train = steps(arith::generate(16, 2, 300, 2));
  sim::SimulatedReasoner r({0.0, 0.0, 1});
  const auto res = run_induction(r, train, {1, 0.0});
  std::int64_t total = 0;
  for (const auto& [rule, t] : res.tally.entries()) {
    EXPECT_EQ(t.correct, t.occurrence);
    total += t.occurrence;
  }
  std::int64_t expected = 0;
  for (const auto& inst : train) {
    const auto rules = oracle_trace(inst).rules();
    expected += static_cast<std::int64_t>(std::set<Rule>(rules.begin(), rules.end()).size());
  }
  EXPECT_EQ(total, expected);
  EXPECT_THROW(run_induction(r, {}, {1, 0.0}), DomainError);
  auto mixed = train;
  mixed.push_back(kinship::generate(1, 2, 2, 1).front());
  EXPECT_THROW(run_induction(r, mixed, {1, 0.0}), TaskMismatchError);
}

TEST(Pipeline, ResampleKeepsOriginalsFirstWithFreshIds) {
  const auto train = steps(arith::generate(9, 2, 30, 3, 10));
  const auto out = resample(train, 100, 4);
  ASSERT_EQ(out.size(), 100u);
  std::set<std::uint64_t> ids;
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_TRUE(ids.insert(seed_id(out[i])).second);
    if (i < train.size()) {
      EXPECT_EQ(to_json(out[i]), to_json(train[i]));
    } else {
      EXPECT_GE(seed_id(out[i]), 40u);
    }
  }
  EXPECT_EQ(resample(train, 10, 4).size(), 10u);
  EXPECT_THROW(resample({}, 5, 1), DomainError);
}

TEST(Pipeline, AbortsWhenMostCallsFail) {
  EXPECT_NO_THROW(check_failures(5, 10, "x"));
  EXPECT_THROW(check_failures(6, 10, "x"), AbortedRunError);
  const auto train = steps(arith::generate(16, 2, 40, 2));
  FlakyReasoner half(2, {0.0, 0.0, 1});
  const auto res = run_induction(half, train, {1, 0.0});
  EXPECT_EQ(res.failures, 20u);
  FlakyReasoner all(1, {0.0, 0.0, 1});
  EXPECT_THROW(run_induction(all, train, {1, 0.0}), AbortedRunError);
}

TEST(Pipeline, PrecisionAndRecall) {
  RuleLibrary lib("arith-9");
  lib.add(grammar::arith_rule(9, false, '1', '2', "3"), {1, 1});
  lib.add(grammar::arith_rule(9, false, '1', '3', "5"), {1, 1});
  const std::set<Rule> oracle = {grammar::arith_rule(9, false, '1', '2', "3"), grammar::arith_rule(9, false, '1', '3', "4"),
                                 grammar::arith_rule(9, false, '1', '4', "5"), grammar::arith_rule(9, false, '1', '5', "6")};
  const auto pr = rule_precision_recall(lib, oracle);
  EXPECT_DOUBLE_EQ(*pr.precision, 0.5);
  EXPECT_DOUBLE_EQ(pr.recall, 0.25);
  EXPECT_FALSE(rule_precision_recall(RuleLibrary("arith-9"), oracle).precision);
  EXPECT_THROW(rule_precision_recall(lib, {}), DomainError);
}

TEST(Pipeline, ErrorClassification) {
  const auto rule = grammar::kinship_rule("father", "mother", "grandmother");
  const auto wrong = grammar::kinship_rule("father", "mother", "aunt");
  InductionRecord rec;
  rec.annotated = true;
  rec.answer_correct = true;
  EXPECT_EQ(classify(rec), ErrorCategory::correct);
  rec.answer_correct = false;
  rec.trace.answer = "aunt";
  rec.trace.steps = {{wrong, Provenance::generated, "grandmother"}};
  EXPECT_EQ(classify(rec), ErrorCategory::incorrect_rules_only);
  rec.trace.steps.push_back({wrong, Provenance::retrieved, "grandmother"});
  EXPECT_EQ(classify(rec), ErrorCategory::incorrect_rules_and_other);
  rec.trace.steps = {{wrong, Provenance::retrieved, "grandmother"}};
  EXPECT_EQ(classify(rec), ErrorCategory::retrieval);
  rec.trace.steps = {{rule, Provenance::retrieved, "grandmother"}};
  EXPECT_EQ(classify(rec), ErrorCategory::non_retrieval);
  rec.annotated = false;
  EXPECT_THROW(classify(rec), EvalError);
  InductionRecord failed;
  failed.failure = "x";
  EXPECT_TRUE(classify_errors({failed}).empty());
}

TEST(Pipeline, DeductionReportsGroupsAndAverages) {
  const auto test = steps(kinship::generate(90, 2, 10, 3));
  sim::SimulatedReasoner perfect({0.0, 0.0, 1});
  const auto rep = run_deduction(perfect, nullptr, test);
  EXPECT_EQ(rep.groups.size(), 9u);
  EXPECT_EQ(rep.n, 90u);
  EXPECT_DOUBLE_EQ(rep.average, 1.0);
  EXPECT_EQ(rep.errors.at(ErrorCategory::correct), 90u);
  const auto csv = report_csv(rep);
  EXPECT_TRUE(text::starts_with(csv, "group,n,correct,accuracy\n2,10,10,1.0000\n"));
  EXPECT_TRUE(text::ends_with(csv, "average,90,,1.0000\n"));
  EXPECT_EQ(report_json(rep)["groups"].size(), 9u);
  RuleLibrary other("arith-16");
  EXPECT_THROW(run_deduction(perfect, &other, test), TaskMismatchError);
  EXPECT_THROW(run_deduction(perfect, nullptr, {}), EvalError);
}

TEST(Pipeline, GridPrefersSmallerLibraryOnTies) {
  const auto train = steps(arith::generate(16, 2, 300, 7));
  const auto val = steps(arith::generate(16, 2, 50, 8));
  sim::SimulatedReasoner r({0.0, 0.0, 1});
  // With a perfect reasoner every cell scores 1.0; the largest k and p
  // filter hardest.
  const auto g = grid_search(r, train, val, {1, 2, 3}, {0.1, 0.9});
  EXPECT_EQ(g.cells.size(), 6u);
  for (const auto& c : g.cells) EXPECT_DOUBLE_EQ(c.accuracy, 1.0);
  std::size_t smallest = g.cells.front().library_size;
  for (const auto& c : g.cells) smallest = std::min(smallest, c.library_size);
  EXPECT_EQ(g.best.k, 3);
  for (const auto& c : g.cells) {
    if (c.params.k == g.best.k && c.params.p == g.best.p) {
      EXPECT_EQ(c.library_size, smallest);
    }
  }
  EXPECT_THROW(grid_search(r, train, val, {}, {0.5}), DomainError);
}

TEST(Pipeline, ScalingSweepRows) {
  const auto train = steps(arith::generate(16, 2, 200, 7));
  const auto test = steps(arith::generate(16, 3, 20, 8));
  const ReasonerFactory make = [](std::uint64_t seed) { return std::make_unique<sim::SimulatedReasoner>(sim::SimParams{0.2, 0.0, seed}); };
  const auto rows = scaling_sweep(make, train, test, {50, 200}, {1, 2}, {1, 0.5});
  ASSERT_EQ(rows.size(), 8u);  // 2 seeds x 2 sizes x (1 group + average)
  EXPECT_EQ(rows[1].group, "average");
  EXPECT_LE(rows[0].recall, rows[2].recall);
  const auto csv = sweep_csv(rows);
  EXPECT_TRUE(text::starts_with(csv, "N,seed,group,accuracy,recall\n50,1,3,"));
  EXPECT_THROW(scaling_sweep(make, train, test, {200, 50}, {1}, {1, 0.5}), DomainError);
}

TEST(Pipeline, ListFunctionInductionAndDeduction) {
  std::vector<listfn::ListFnTask> tasks;
  for (const auto* prog : {"(reverse)", "(sum-even)", "(take-nth 2)"}) {
    tasks.push_back(listfn::gen_task(listfn::parse_program(prog), listfn::Subset::P1, tasks.size() + 1, prog));
  }
  sim::SimulatedReasoner r({0.0, 0.0, 2});
  const auto ind = run_listfn_induction(r, tasks, 4, {1, 0.1});
  EXPECT_EQ(ind.calls, 12u);
  for (const auto& t : tasks) {
    const auto& lib = ind.library.at(t.name);
    ASSERT_EQ(lib.size(), 1u);
    EXPECT_EQ(lib.tally(lib.rules().front()), (RuleTally{static_cast<std::int64_t>(listfn::kValidationSize),
                                                          static_cast<std::int64_t>(listfn::kValidationSize)}));
  }
  std::vector<ListTaskResult> per_task;
  const auto rep = run_listfn_deduction(r, &ind.library, tasks, {}, &per_task);
  EXPECT_EQ(per_task.size(), 3u);
  ASSERT_EQ(rep.groups.size(), 2u);
  EXPECT_EQ(rep.groups[0].group, "raw");
  EXPECT_DOUBLE_EQ(rep.average, rep.groups[0].accuracy);
  EXPECT_DOUBLE_EQ(rep.average, 1.0);
  EXPECT_EQ(rep.library_size, 3u);
  EXPECT_THROW(run_listfn_induction(r, tasks, 0, {1, 0.1}), DomainError);
}

TEST(Io, InstancesTasksAndLibrariesRoundTrip) {
  const auto dir = scratch("io");
  const auto xs = steps(kinship::generate(5, 2, 4, 1));
  io::save_instances((dir / "a.jsonl").string(), xs);
  const auto back = io::load_instances((dir / "a.jsonl").string());
  ASSERT_EQ(back.size(), xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) EXPECT_EQ(to_json(back[i]), to_json(xs[i]));

  const std::vector<listfn::ListFnTask> ts = {listfn::gen_task(listfn::parse_program("(reverse)"), listfn::Subset::P1, 1, "r")};
  io::save_tasks((dir / "t.jsonl").string(), ts);
  EXPECT_EQ(listfn::to_json(io::load_tasks((dir / "t.jsonl").string()).front()), listfn::to_json(ts.front()));

  std::map<std::string, RuleLibrary> libs;
  libs.emplace("r", RuleLibrary("listfn"));
  libs.at("r").add(grammar::listfn_rule("reverse the elements."), {8, 7});
  const auto lpath = (dir / "l.jsonl").string();
  io::save_list_libraries(lpath, libs);
  EXPECT_TRUE(io::is_list_libraries(lpath));
  EXPECT_FALSE(io::is_list_libraries((dir / "t.jsonl").string()));
  EXPECT_EQ(io::load_list_libraries(lpath), libs);
  EXPECT_THROW(io::load_list_libraries((dir / "t.jsonl").string()), ParseError);
  std::filesystem::remove_all(dir);
}

TEST(Io, ParseErrorsNameTheLine) {
  const auto dir = scratch("bad");
  const auto path = (dir / "bad.jsonl").string();
  text::write_file(path, "{\"a\": 1}\n\n{oops\n");
  try {
    io::read_jsonl(path);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.jsonl:3"), std::string::npos) << e.what();
  }
  text::write_file(path, "{\"task\": \"chess\"}\n");
  EXPECT_THROW(io::load_instances(path), ParseError);
  std::filesystem::remove_all(dir);
}

TEST(Config, DefaultsPerTask) {
  EXPECT_EQ(config::default_filter("kinship").k, 2);
  EXPECT_DOUBLE_EQ(config::default_filter("kinship").p, 0.7);
  EXPECT_DOUBLE_EQ(config::default_filter("arith-16").p, 0.5);
  EXPECT_DOUBLE_EQ(config::default_filter("arith-11").p, 0.3);
  EXPECT_DOUBLE_EQ(config::default_filter("arith-9").p, 0.3);
  EXPECT_EQ(config::default_filter("listfn").k, 1);
  EXPECT_DOUBLE_EQ(config::default_filter("listfn").p, 0.1);
  EXPECT_ANY_THROW(config::check_task("chess"));
}
