#include <gtest/gtest.h>

#include <set>

#include "htt/htt.hpp"

using namespace htt;

namespace {

// 0 Tom + 1 Ann; children 2 Eve and 3 Bob; 4 Sue is Bob's wife; 5 Max their son.
kinship::FamilyGraph small_family() {
  using kinship::Gender;
  kinship::FamilyGraph g;
  g.persons = {{0, Gender::male, "Tom"},   {1, Gender::female, "Ann"}, {2, Gender::female, "Eve"},
               {3, Gender::male, "Bob"},   {4, Gender::female, "Sue"}, {5, Gender::male, "Max"}};
  g.unions = {{0, 1}, {3, 4}};
  g.parent_edges = {{0, 2}, {1, 2}, {0, 3}, {1, 3}, {3, 5}, {4, 5}};
  return g;
}

// The chain of the worked error-analysis example.
kinship::KinshipInstance worked_instance() {
  kinship::KinshipInstance inst;
  inst.head = "Christine";
  inst.tail = "Nicole";
  inst.chain = {"mother", "son", "sister", "grandmother"};
  inst.reductions = {"brother", "sister", "grandmother"};
  inst.gold = "grandmother";
  return inst;
}

}  // namespace

TEST(Kinship, GraphRelations) {
  const auto g = small_family();
  EXPECT_EQ(kinship::graph_relation(g, 2, 0), "father");
  EXPECT_EQ(kinship::graph_relation(g, 2, 1), "mother");
  EXPECT_EQ(kinship::graph_relation(g, 2, 3), "brother");
  EXPECT_EQ(kinship::graph_relation(g, 0, 2), "daughter");
  EXPECT_EQ(kinship::graph_relation(g, 0, 1), "wife");
  EXPECT_EQ(kinship::graph_relation(g, 5, 0), "grandfather");
  EXPECT_EQ(kinship::graph_relation(g, 5, 2), "aunt");
  EXPECT_EQ(kinship::graph_relation(g, 2, 5), "nephew");
  EXPECT_EQ(kinship::graph_relation(g, 4, 1), "mother-in-law");
  EXPECT_EQ(kinship::graph_relation(g, 1, 4), "daughter-in-law");
  EXPECT_EQ(kinship::graph_relation(g, 2, 4), "sister-in-law");
  EXPECT_EQ(kinship::graph_relation(g, 0, 0), std::nullopt);
}

TEST(Kinship, GeneratorCyclesHopsAndIsSeeded) {
  const auto a = kinship::generate(12, 2, 5, 3, 40);
  ASSERT_EQ(a.size(), 12u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].hops(), 2 + static_cast<int>(i % 4));
    EXPECT_EQ(a[i].seed_id, 40 + i);
    EXPECT_EQ(a[i].reductions.back(), a[i].gold);
  }
  const auto b = kinship::generate(12, 2, 5, 3, 40);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(kinship::to_json(a[i]), kinship::to_json(b[i]));
  EXPECT_THROW(kinship::generate(1, 1, 3, 0), DomainError);
}

TEST(Kinship, ValidateCatchesTampering) {
  auto [inst, g] = kinship::generate_one(5, 1, 4);
  EXPECT_NO_THROW(kinship::validate(inst, g));
  auto wrong = inst;
  wrong.gold = wrong.gold == "aunt" ? "uncle" : "aunt";
  EXPECT_THROW(kinship::validate(wrong, g), DomainError);
  auto swapped = inst;
  std::swap(swapped.waypoints[1], swapped.waypoints[2]);
  EXPECT_THROW(kinship::validate(swapped, g), DomainError);
}

TEST(Kinship, OracleTrace) {
  const auto t = kinship::oracle_trace(worked_instance());
  ASSERT_EQ(t.steps.size(), 3u);
  EXPECT_EQ(t.steps[0].rule.text, "mother's son is brother.");
  EXPECT_EQ(t.steps[2].rule.text, "sister's grandmother is grandmother.");
  EXPECT_EQ(t.answer, "grandmother");
  auto gap = worked_instance();
  gap.reductions.clear();
  EXPECT_THROW(kinship::oracle_trace(gap), OracleGapError);
}

TEST(Kinship, RenderedTraceOfWorkedExample) {
  const auto inst = worked_instance();
  const auto t = kinship::oracle_trace(inst);
  EXPECT_EQ(kinship::render_trace(inst, t, true),
            "For mother's son, we retrieve <mother><son>mother's son is brother. So the relations are reduced to brother, "
            "sister, grandmother.\n"
            "For brother's sister, we retrieve <brother><sister>brother's sister is sister. So the relations are reduced "
            "to sister, grandmother.\n"
            "For sister's grandmother, we retrieve <sister><grandmother>sister's grandmother is grandmother. So the "
            "relations are reduced to grandmother.\n"
            "Therefore, the answer is grandmother.");
}

TEST(Kinship, ParseTraceReadsFreeText) {
  const auto t = kinship::parse_trace(
      "For mother's son, we have Mother\xE2\x80\x99s son is brother. So the relations are reduced to brother.\n"
      "Also grandmother's cat is nice.\nTherefore, the answer is brother.");
  ASSERT_EQ(t.steps.size(), 1u);
  EXPECT_EQ(t.steps[0].rule.text, "mother's son is brother.");
  EXPECT_EQ(t.answer, "brother");
}

TEST(Kinship, ProblemLeavesTheGroundedPath) {
  const auto inst = worked_instance();
  kinship::Problem p(inst);
  EXPECT_EQ(p.key(), (std::vector<std::string>{"mother", "son"}));
  EXPECT_EQ(p.truth(), "brother");
  ASSERT_TRUE(p.advance(p.make_rule("uncle")));
  EXPECT_EQ(p.key(), (std::vector<std::string>{"uncle", "sister"}));
  EXPECT_EQ(p.truth(), std::nullopt);
  EXPECT_FALSE(p.advance(grammar::kinship_rule("aunt", "sister", "aunt")));
}

TEST(Kinship, PromptsCarryTheLibrary) {
  const auto inst = worked_instance();
  const auto lib = load(asset_path("fixtures/kinship_gpt4.json").string());
  kinship::PromptOptions opt;
  opt.library = &lib;
  const auto p = kinship::build_prompt(inst, Mode::few_shot_cot, opt);
  EXPECT_NE(p.find("<father><mother>father's mother is grandmother."), std::string::npos);
  EXPECT_NE(p.find("mother, son, sister, grandmother"), std::string::npos);
  EXPECT_EQ(kinship::build_prompt(inst, Mode::few_shot_cot).find("Knowledge:"), std::string::npos);
  EXPECT_THROW(kinship::build_prompt(inst, Mode::zero_shot_cot, opt), DomainError);
  EXPECT_NE(kinship::ltm_rule_prompt("father", "mother").find("father"), std::string::npos);
}

TEST(Kinship, JsonRoundTripAndValidation) {
  const auto inst = kinship::generate(1, 3, 3, 8).front();
  const auto j = kinship::to_json(inst);
  EXPECT_EQ(kinship::to_json(kinship::from_json(j)), j);
  auto bad = j;
  bad["hops"] = 7;
  EXPECT_THROW(kinship::from_json(bad), DomainError);
  bad = j;
  bad["gold"] = "cousin";
  EXPECT_THROW(kinship::from_json(bad), DomainError);
  bad = j;
  bad["task"] = "arith-16";
  EXPECT_THROW(kinship::from_json(bad), TaskMismatchError);
}
