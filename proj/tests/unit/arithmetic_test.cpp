#include <gtest/gtest.h>

#include <set>

#include "htt/htt.hpp"

using namespace htt;

TEST(Arithmetic, BaseConversion) {
  EXPECT_EQ(arith::to_base(16, 457), "1C9");
  EXPECT_EQ(arith::from_base(16, "1C9"), 457u);
  EXPECT_EQ(arith::to_base(9, 0), "0");
  EXPECT_EQ(arith::to_base(11, 120), "AA");
  EXPECT_THROW(arith::check_base(10), DomainError);
}

TEST(Arithmetic, OracleColumnsOfWorkedSum) {
  const auto a = arith::oracle_add(16, "EC", "DD");
  EXPECT_EQ(a.sum, "1C9");
  ASSERT_EQ(a.steps.size(), 2u);
  EXPECT_EQ(arith::column_rule(16, a.steps[0]).text, "C + D = 19.");
  EXPECT_EQ(arith::column_rule(16, a.steps[1]).text, "E + D + 1 = 1C.");
  EXPECT_THROW(arith::oracle_add(16, "1", "22"), DomainError);
}

TEST(Arithmetic, GeneratorIsSeededAndWellFormed) {
  const auto a = arith::generate(11, 3, 50, 9, 100);
  EXPECT_EQ(a.size(), 50u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].seed_id, 100 + i);
    EXPECT_EQ(a[i].x.size(), 3u);
    EXPECT_NE(a[i].x[0], '0');
    EXPECT_NE(a[i].y[0], '0');
    EXPECT_EQ(arith::from_base(11, a[i].gold), arith::from_base(11, a[i].x) + arith::from_base(11, a[i].y));
  }
  // Instance i depends only on (seed, id).
  const auto b = arith::generate(11, 3, 10, 9, 140);
  EXPECT_EQ(b[0].x, a[40].x);
  EXPECT_EQ(b[0].y, a[40].y);
}

TEST(Arithmetic, TwoDigitOracleSetSize) {
  // Units columns cover every digit pair; tens columns after a carry never see
  // a zero leading digit, so 2b - 1 carry keys are unreachable.
  for (int b : {9, 11, 16}) {
    EXPECT_EQ(arith::two_digit_oracle_rules(b).size(), static_cast<std::size_t>(b * b + (b - 1) * (b - 1)));
    EXPECT_EQ(arith::full_oracle_library(b).size(), static_cast<std::size_t>(2 * b * b));
  }
}

TEST(Arithmetic, ProblemWalksColumns) {
  const arith::ArithInstance inst{0, 16, "EC", "DD", "1C9"};
  arith::Problem p(inst);
  EXPECT_EQ(p.key(), (std::vector<std::string>{"no_carry", "C", "D"}));
  EXPECT_EQ(p.truth(), "19");
  EXPECT_FALSE(p.advance(grammar::arith_rule(16, true, 'C', 'D', "1A")));
  ASSERT_TRUE(p.advance(p.make_rule("19")));
  EXPECT_EQ(p.key(), (std::vector<std::string>{"carry", "E", "D"}));
  ASSERT_TRUE(p.advance(p.make_rule("1C")));
  EXPECT_TRUE(p.done());
  EXPECT_EQ(p.answer(), "1C9");
}

TEST(Arithmetic, ExecuteWithLibraryPolicies) {
  const arith::ArithInstance inst{0, 16, "EC", "DD", "1C9"};
  RuleLibrary lib("arith-16");
  lib.add(grammar::arith_rule(16, false, 'C', 'D', "19"), {1, 1});
  const auto abstain = arith::execute_with_library(inst, lib);
  EXPECT_FALSE(abstain.answer);
  ASSERT_EQ(abstain.missing_keys.size(), 1u);

  arith::ExecPolicy fallback{arith::MissingPolicy::fallback, [](const std::vector<std::string>&) { return "1C"; }};
  const auto filled = arith::execute_with_library(inst, lib, fallback);
  EXPECT_EQ(filled.answer, "1C9");
  EXPECT_EQ(filled.trace.count(Provenance::generated), 1u);

  EXPECT_THROW(arith::execute_with_library(inst, RuleLibrary("arith-9")), TaskMismatchError);
}

TEST(Arithmetic, TraceRenderParseRoundTrip) {
  for (const auto& inst : arith::generate(16, 4, 30, 2)) {
    const auto t = arith::oracle_trace(inst);
    for (bool retrieve : {false, true}) {
      const auto parsed = arith::parse_trace(16, arith::render_trace(inst, t, retrieve));
      EXPECT_EQ(parsed.rules(), t.rules());
      EXPECT_EQ(parsed.answer, inst.gold);
    }
  }
}

TEST(Arithmetic, RenderedTraceOfWorkedExample) {
  const arith::ArithInstance inst{0, 16, "EC", "DD", "1C9"};
  EXPECT_EQ(arith::render_trace(inst, arith::oracle_trace(inst)),
            "EC is E, C. DD is D, D. So the steps are C + D, E + D.\n"
            "There is no carry. C + D = 19. 19 is 1, 9. So we set the carry to 1. Prepend 9 to the answer. "
            "So far the answer has 1 digit: 9.\n"
            "The carry is 1. E + D + 1 = 1C. 1C is 1, C. So we set the carry to 1. Prepend C to the answer. "
            "So far the answer has 2 digits: C, 9.\n"
            "The carry is 1. Prepend 1 to the answer. So far the answer has 3 digits: 1, C, 9.\n"
            "Therefore, the answer is 1C9.");
}

TEST(Arithmetic, PromptAssetsMatchExemplarRenderer) {
  for (int base : {9, 11}) {
    for (const auto& [file, content] : arith::exemplar_prompts(base)) {
      EXPECT_EQ(read_prompt_asset(arith::prompt_dir(base) + file), content) << base << " " << file;
    }
  }
  // Base 16 is transcribed; only the tagged few-shot file wraps a line differently.
  for (const auto& [file, content] : arith::exemplar_prompts(16)) {
    if (file == "few_shot_cot_htt.txt") continue;
    EXPECT_EQ(read_prompt_asset(arith::prompt_dir(16) + file), content) << file;
  }
}

TEST(Arithmetic, PromptsCarryTheLibrary) {
  const arith::ArithInstance inst{0, 11, "A9", "87", "176"};
  RuleLibrary lib("arith-11");
  lib.add(grammar::arith_rule(11, false, '9', '7', "15"), {3, 3});
  arith::PromptOptions opt;
  opt.library = &lib;
  const auto p = arith::build_prompt(inst, Mode::few_shot_cot, opt);
  EXPECT_NE(p.find("<no_carry><9><7>9 + 7 = 15."), std::string::npos);
  EXPECT_TRUE(text::ends_with(p, "Question: In base-11, what is A9 + 87?\nAnswer:"));
  EXPECT_THROW(arith::build_prompt(inst, Mode::zero_shot_cot, opt), DomainError);
  const auto sub = arith::ltm_rule_prompt(11, {"carry", "A", "8"});
  EXPECT_TRUE(text::ends_with(sub, "what is A + 8 + 1?\nAnswer:"));
}

TEST(Arithmetic, JsonRoundTripAndValidation) {
  const auto inst = arith::generate(9, 2, 1, 4).front();
  const auto back = arith::from_json(arith::to_json(inst));
  EXPECT_EQ(back.x, inst.x);
  EXPECT_EQ(back.gold, inst.gold);
  auto bad = arith::to_json(inst);
  bad["gold"] = "0";
  EXPECT_ANY_THROW(arith::from_json(bad));
}
