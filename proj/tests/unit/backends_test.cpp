#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <set>

#include "htt/htt.hpp"

using namespace htt;
using namespace htt::backend;
using namespace htt::sim;

namespace {

kinship::KinshipInstance worked_instance() {
  kinship::KinshipInstance inst;
  inst.head = "Christine";
  inst.tail = "Nicole";
  inst.chain = {"mother", "son", "sister", "grandmother"};
  inst.reductions = {"brother", "sister", "grandmother"};
  inst.gold = "grandmother";
  return inst;
}

std::string ok_body(const std::string& content) {
  nlohmann::json j;
  j["choices"] = nlohmann::json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}});
  return j.dump();
}

struct FakeServer {
  std::vector<HttpReply> replies;
  std::vector<std::string> bodies;
  std::vector<std::string> tokens;

  Transport transport() {
    return [this](const std::string&, const std::string& body, const std::string& token) {
      bodies.push_back(body);
      tokens.push_back(token);
      if (replies.empty()) return HttpReply{200, ok_body("default"), {}};
      auto r = replies.front();
      replies.erase(replies.begin());
      return r;
    };
  }
};

class CompletionClientTest : public ::testing::Test {
 protected:
  void SetUp() override {
    cache = std::filesystem::temp_directory_path() /
            ("htt-cache-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::remove_all(cache);
    setenv("HTT_TEST_KEY", "secret", 1);
  }
  void TearDown() override {
    std::filesystem::remove_all(cache);
    unsetenv("HTT_TEST_KEY");
  }

  ClientOptions options(bool with_cache = true) const {
    ClientOptions o;
    o.credential_variable = "HTT_TEST_KEY";
    if (with_cache) o.cache_dir = cache.string();
    o.max_attempts = 3;
    o.requests_per_minute = 1e9;
    return o;
  }

  std::filesystem::path cache;
  FakeServer server;
  std::vector<std::chrono::milliseconds> sleeps;
  Sleeper sleeper() {
    return [this](std::chrono::milliseconds d) { sleeps.push_back(d); };
  }
};

}  // namespace

TEST(Simulated, ZeroEpsilonReproducesTheOracle) {
  SimulatedReasoner r({0.0, 0.0, 1});
  for (const auto& inst : arith::generate(16, 3, 20, 5)) {
    const StepInstance si = inst;
    const auto t = r.solve(si, nullptr, inst.seed_id);
    EXPECT_EQ(t.rules(), oracle_trace(si).rules());
    EXPECT_EQ(t.answer, inst.gold);
    EXPECT_EQ(t.count(Provenance::generated), t.steps.size());
  }
}

TEST(Simulated, FullEpsilonCorruptsEveryGroundedStep) {
  SimulatedReasoner r({1.0, 0.0, 2});
  for (const auto& inst : kinship::generate(20, 2, 4, 9)) {
    const StepInstance si = inst;
    const auto t = r.solve(si, nullptr, inst.seed_id);
    ASSERT_FALSE(t.steps.empty());
    EXPECT_EQ(t.steps[0].provenance, Provenance::corrupted);
    EXPECT_NE(t.steps[0].rule.conclusion, *t.steps[0].oracle);
    if (inst.hops() == 2) {
      EXPECT_NE(t.answer, inst.gold);
    }
  }
}

TEST(Simulated, SeededPerStream) {
  SimulatedReasoner a({0.5, 0.0, 7}), b({0.5, 0.0, 7});
  const StepInstance si = arith::generate(11, 4, 1, 3).front();
  EXPECT_EQ(a.solve(si, nullptr, 12).rules(), b.solve(si, nullptr, 12).rules());
  std::set<std::vector<Rule>> distinct;
  for (std::uint64_t s = 0; s < 20; ++s) distinct.insert(a.solve(si, nullptr, s).rules());
  EXPECT_GT(distinct.size(), 1u);
}

TEST(Simulated, CorruptionRateTracksEpsilon) {
  // Two-digit sums keep every step on the grounded path, so each step is one
  // Bernoulli(epsilon) draw.
  const double eps = 0.3;
  SimulatedReasoner r({eps, 0.0, 11});
  std::size_t steps = 0, corrupted = 0;
  for (const auto& inst : arith::generate(16, 2, 3000, 4)) {
    const auto t = r.solve(StepInstance(inst), nullptr, inst.seed_id);
    ASSERT_FALSE(t.steps.empty());
    steps += 1;
    corrupted += t.steps[0].provenance == Provenance::corrupted;
  }
  EXPECT_NEAR(static_cast<double>(corrupted) / static_cast<double>(steps), eps, 0.03);
}

TEST(Simulated, RetrievesFromLibrary) {
  const auto lib = arith::full_oracle_library(9);
  SimulatedReasoner r({1.0, 0.0, 3});
  for (const auto& inst : arith::generate(9, 4, 20, 6)) {
    const auto t = r.solve(StepInstance(inst), &lib, inst.seed_id);
    EXPECT_EQ(t.answer, inst.gold);
    EXPECT_EQ(t.count(Provenance::retrieved), t.steps.size());
  }
}

TEST(Simulated, WrongSiblingRetrieval) {
  const auto lib = arith::full_oracle_library(9);
  SimulatedReasoner r({0.0, 1.0, 3});
  std::size_t wrong = 0, total = 0;
  for (const auto& inst : arith::generate(9, 2, 50, 6)) {
    const auto t = r.solve(StepInstance(inst), &lib, inst.seed_id);
    ASSERT_FALSE(t.steps.empty());
    EXPECT_EQ(t.steps[0].provenance, Provenance::retrieved);
    ++total;
    wrong += t.steps[0].rule.conclusion != *t.steps[0].oracle;
  }
  // Siblings under one first tag can share a sum, so not every pick is wrong.
  EXPECT_GT(wrong, total * 3 / 4);
}

TEST(Simulated, RejectsBadParameters) {
  EXPECT_THROW(SimulatedReasoner({1.5, 0.0, 0}), DomainError);
  EXPECT_THROW(SimulatedReasoner({0.1, -0.1, 0}), DomainError);
}

TEST(Simulated, ListFunctions) {
  const auto t = listfn::gen_task(listfn::parse_program("(reverse)"), listfn::Subset::P1, 3);
  SimulatedReasoner r({0.0, 0.0, 1});
  const auto rules = r.propose(t, 0);
  ASSERT_EQ(rules.size(), 1u);
  EXPECT_EQ(rules[0].text, grammar::listfn_rule(listfn::describe(t.program)).text);
  EXPECT_DOUBLE_EQ(listfn::score_candidate(r.applier(t, rules[0], 0), t.validation), 1.0);
  EXPECT_DOUBLE_EQ(listfn::score_candidate(r.applier(t, grammar::listfn_rule("nothing at all."), 0), t.validation), 0.0);
  RuleLibrary lib("listfn");
  lib.add(rules[0], {8, 8});
  const auto preds = r.answer(t, &lib, 0);
  ASSERT_EQ(preds.size(), t.test.size());
  for (std::size_t i = 0; i < preds.size(); ++i) EXPECT_EQ(preds[i], t.test[i].output);
}

TEST_F(CompletionClientTest, CachesAndReplaysWithoutCredential) {
  server.replies = {{200, ok_body("hello"), {}}};
  CompletionClient c({}, options(), server.transport(), sleeper());
  EXPECT_EQ(c.complete("p"), "hello");
  EXPECT_EQ(c.complete("p"), "hello");
  EXPECT_EQ(c.network_requests(), 1u);
  EXPECT_EQ(server.tokens.front(), "secret");

  unsetenv("HTT_TEST_KEY");
  CompletionClient replay({}, options(), [](const std::string&, const std::string&, const std::string&) -> HttpReply {
    throw std::logic_error("network used on a cache hit");
  });
  EXPECT_EQ(replay.complete("p"), "hello");
  EXPECT_EQ(replay.network_requests(), 0u);

  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(cache)) {
    ++files;
    const auto j = nlohmann::json::parse(text::read_file(e.path().string()));
    EXPECT_EQ(j.at("endpoint"), GenerationParams{}.endpoint);
    EXPECT_EQ(j.at("request").at("messages").at(0).at("content"), "p");
    EXPECT_EQ(j.at("response"), "hello");
  }
  EXPECT_EQ(files, 1u);
}

TEST_F(CompletionClientTest, SampleIndexIsPartOfTheKey) {
  CompletionClient c({}, options(), server.transport(), sleeper());
  c.complete("p", 0);
  c.complete("p", 1);
  c.complete("q", 0);
  EXPECT_EQ(c.network_requests(), 3u);
  EXPECT_EQ(server.bodies[0], server.bodies[1]);
}

TEST_F(CompletionClientTest, MissingCredentialNamesTheVariable) {
  unsetenv("HTT_TEST_KEY");
  CompletionClient c({}, options(), server.transport(), sleeper());
  try {
    c.complete("p");
    FAIL() << "expected ConfigurationError";
  } catch (const ConfigurationError& e) {
    EXPECT_NE(std::string(e.what()).find("HTT_TEST_KEY"), std::string::npos);
  }
  EXPECT_TRUE(server.bodies.empty());
}

TEST_F(CompletionClientTest, RetriesTransientFailuresWithBackoff) {
  server.replies = {{500, "oops", {}}, {429, "slow", {}}, {200, ok_body("fine"), {}}};
  CompletionClient c({}, options(false), server.transport(), sleeper());
  EXPECT_EQ(c.complete("p"), "fine");
  EXPECT_EQ(c.network_requests(), 3u);
  EXPECT_EQ(sleeps, (std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(500), std::chrono::milliseconds(1000)}));
}

TEST_F(CompletionClientTest, PersistentFailuresSurfaceAsTypedErrors) {
  server.replies = {{429, "", {}}, {429, "", {}}, {429, "", {}}};
  CompletionClient limited({}, options(false), server.transport(), sleeper());
  EXPECT_THROW(limited.complete("p"), RateLimitError);

  server.replies = {{0, "", "connection refused"}, {503, "", {}}, {502, "", {}}};
  CompletionClient down({}, options(false), server.transport(), sleeper());
  EXPECT_THROW(down.complete("p"), TransportError);

  server.replies = {{400, "bad request", {}}};
  CompletionClient bad({}, options(false), server.transport(), sleeper());
  EXPECT_THROW(bad.complete("p"), TransportError);
  EXPECT_EQ(bad.network_requests(), 1u);
}

TEST_F(CompletionClientTest, AuthAndMalformedResponses) {
  server.replies = {{401, "", {}}};
  CompletionClient c({}, options(false), server.transport(), sleeper());
  EXPECT_THROW(c.complete("p"), AuthError);
  EXPECT_EQ(c.network_requests(), 1u);

  server.replies = {{200, "{\"choices\": []}", {}}};
  EXPECT_THROW(c.complete("p"), MalformedResponseError);
  server.replies = {{200, "not json", {}}};
  EXPECT_THROW(c.complete("p"), MalformedResponseError);
}

TEST_F(CompletionClientTest, RequestBodyAndValidation) {
  GenerationParams g;
  g.model = "m";
  g.temperature = 0.0;
  g.max_tokens = 7;
  CompletionClient c(g, options(false), server.transport(), sleeper());
  const auto j = nlohmann::json::parse(c.request_body("x"));
  EXPECT_EQ(j.at("model"), "m");
  EXPECT_EQ(j.at("temperature"), 0.0);
  EXPECT_EQ(j.at("max_tokens"), 7);
  g.endpoint = "ftp://x";
  EXPECT_ANY_THROW(CompletionClient(g, options(false), server.transport(), sleeper()));
}

TEST(Prompted, ChainOfThoughtParsesAndAnnotates) {
  const StepInstance inst = worked_instance();
  std::vector<std::string> prompts;
  PromptedReasoner r(
      [&](const std::string& prompt, std::uint64_t) {
        prompts.push_back(prompt);
        return render_trace(inst, oracle_trace(inst));
      },
      Mode::few_shot_cot);
  auto t = r.solve(inst, nullptr, 0);
  EXPECT_EQ(t.rules(), oracle_trace(inst).rules());
  EXPECT_EQ(t.answer, "grandmother");
  ASSERT_EQ(t.steps.size(), 3u);
  EXPECT_EQ(t.steps[1].oracle, "sister");

  RuleLibrary lib("kinship");
  lib.add(grammar::kinship_rule("mother", "son", "brother"), {3, 3});
  t = r.solve(inst, &lib, 0);
  EXPECT_EQ(t.steps[0].provenance, Provenance::retrieved);
  EXPECT_EQ(t.steps[1].provenance, Provenance::generated);
  EXPECT_NE(prompts.back().find("mother's son is brother."), std::string::npos);
}

TEST(Prompted, LeastToMostAsksOneSubQuestionPerStep) {
  const arith::ArithInstance a{0, 16, "EC", "DD", "1C9"};
  const StepInstance inst = a;
  const auto oracle = oracle_trace(inst);
  std::vector<std::uint64_t> samples;
  PromptedReasoner r(
      [&](const std::string&, std::uint64_t sample) {
        const auto i = samples.size();
        samples.push_back(sample);
        return "So " + oracle.steps.at(i).rule.text;
      },
      Mode::few_shot_ltm);
  const auto t = r.solve(inst, nullptr, 5);
  EXPECT_EQ(t.rules(), oracle.rules());
  EXPECT_EQ(t.answer, "1C9");
  ASSERT_EQ(samples.size(), 2u);
  EXPECT_NE(samples[0], samples[1]);
}

TEST(Prompted, ListFunctionCalls) {
  const auto task = listfn::gen_task(listfn::parse_program("(reverse)"), listfn::Subset::P1, 6);
  const auto answer_lines = [&](const std::vector<listfn::IOPair>& pairs) {
    std::string out;
    for (const auto& pr : pairs) out += listfn::format_list(pr.input) + " -> " + listfn::format_list(pr.output) + "\n";
    return out;
  };
  std::size_t calls = 0;
  PromptedReasoner r(
      [&](const std::string& prompt, std::uint64_t) -> std::string {
        // Calls arrive as propose, then the applier's validation batch, then the test batch.
        switch (calls++) {
          case 0: return "The function is to reverse the elements.";
          case 1: return answer_lines(task.validation);
          default:
            EXPECT_NE(prompt.find(listfn::format_list(task.test.back().input)), std::string::npos);
            return answer_lines(task.test);
        }
      },
      Mode::few_shot_cot);
  const auto rules = r.propose(task, 0);
  ASSERT_EQ(rules.size(), 1u);
  EXPECT_EQ(rules[0].text, "reverse the elements.");
  const auto apply = r.applier(task, rules[0], 0);
  EXPECT_DOUBLE_EQ(listfn::score_candidate(apply, task.validation), 1.0);
  EXPECT_EQ(calls, 2u);  // the applier's one call is memoised across inputs
  RuleLibrary lib("listfn");
  lib.add(rules[0], {8, 8});
  const auto preds = r.answer(task, &lib, 0);
  for (std::size_t i = 0; i < preds.size(); ++i) EXPECT_EQ(preds[i], task.test[i].output);
}
