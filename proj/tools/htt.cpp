#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "htt/htt.hpp"

namespace fs = std::filesystem;
using htt::io::Json;

namespace {

struct Options {
  std::string task;
  std::string backend = "simulated";
  std::string mode = "few_shot_cot";
  double epsilon = 0.2;
  double rho = 0.0;
  std::uint64_t seed = 0;
  std::optional<std::int64_t> k;
  std::optional<double> p;
  std::size_t tag_depth = 3;
  bool sorted = true;
  bool no_library = false;
  bool randomize = false;
  std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  bool force = false;
  std::string out = "out";
  std::string data = "data";
  std::string library;
  std::optional<std::size_t> n_train;
  std::size_t draws = htt::config::kInductionDraws;
  std::string split = "test";
  std::vector<std::size_t> ns = {100, 300, 900, 2000};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string inspect_path;
  htt::backend::GenerationParams gen;
  htt::backend::ClientOptions client;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

htt::FilterParams filter_of(const Options& o) {
  auto f = htt::config::default_filter(o.task);
  if (o.k) f.k = *o.k;
  if (o.p) f.p = *o.p;
  f.validate();
  return f;
}

htt::RenderOptions render_of(const Options& o) {
  htt::RenderOptions r;
  r.tag_depth = o.tag_depth;
  r.sorted = o.sorted;
  r.shuffle_seed = o.seed;
  return r;
}

std::unique_ptr<htt::Reasoner> make_reasoner(const Options& o, std::uint64_t seed) {
  if (o.backend == "simulated") return std::make_unique<htt::sim::SimulatedReasoner>(htt::sim::SimParams{o.epsilon, o.rho, seed});
  if (o.backend == "http") {
    auto client = std::make_shared<htt::backend::CompletionClient>(o.gen, o.client);
    return htt::backend::PromptedReasoner::over(client, htt::parse_mode(o.mode), render_of(o));
  }
  throw UsageError("unknown backend '" + o.backend + "' (simulated, http)");
}

std::string quoted(const std::string& s) { return Json(s).dump(); }

template <class T>
std::string toml_list(const std::vector<T>& xs) {
  std::string out = "[";
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + std::to_string(xs[i]);
  return out + "]";
}

// Effective values after defaults, readable back through --config.
void write_resolved_config(const Options& o) {
  fs::create_directories(o.out);
  std::string t;
  auto line = [&](const char* k, const std::string& v) { t += std::string(k) + "=" + v + "\n"; };
  line("task", quoted(o.task));
  line("backend", quoted(o.backend));
  line("mode", quoted(o.mode));
  line("epsilon", htt::text::fixed(o.epsilon, 6));
  line("rho", htt::text::fixed(o.rho, 6));
  line("seed", std::to_string(o.seed));
  if (htt::grammar::is_known_task(o.task)) {
    const auto f = filter_of(o);
    line("k", std::to_string(f.k));
    line("p", htt::text::fixed(f.p, 6));
  }
  line("tag-depth", std::to_string(o.tag_depth));
  line(o.sorted ? "sorted" : "unsorted", "true");
  line("no-library", o.no_library ? "true" : "false");
  line("randomize-conclusions", o.randomize ? "true" : "false");
  line("out", quoted(o.out));
  line("data", quoted(o.data));
  if (!o.library.empty()) line("library", quoted(o.library));
  line("draws", std::to_string(o.draws));
  line("split", quoted(o.split));
  line("ns", toml_list(o.ns));
  line("seeds", toml_list(o.seeds));
  if (o.backend == "http") {
    line("model", quoted(o.gen.model));
    line("endpoint", quoted(o.gen.endpoint));
    line("temperature", htt::text::fixed(o.gen.temperature, 6));
    line("max-tokens", std::to_string(o.gen.max_tokens));
    line("credential-env", quoted(o.client.credential_variable));
    line("cache-dir", quoted(o.client.cache_dir));
    line("rpm", htt::text::fixed(o.client.requests_per_minute, 6));
  }
  htt::text::write_file((fs::path(o.out) / "resolved_config.toml").string(), t);
}

std::string data_file(const Options& o, const std::string& split) {
  const auto path = (fs::path(o.data) / (split + ".jsonl")).string();
  if (!fs::exists(path)) throw UsageError("data file not found: " + path + " (run gen-data first)");
  return path;
}

std::vector<htt::StepInstance> load_split(const Options& o, const std::string& split) {
  auto xs = htt::io::load_instances(data_file(o, split));
  if (xs.empty()) throw UsageError("no instances in " + split + " split");
  if (htt::task_id(xs.front()) != o.task) {
    throw UsageError("data in " + o.data + " is for " + htt::task_id(xs.front()) + ", not " + o.task);
  }
  return xs;
}

std::string pct(double v) { return htt::text::fixed(100.0 * v, 1); }

void print_report(const htt::pipeline::EvalReport& rep) {
  std::printf("%-10s %6s %8s\n", "group", "n", "accuracy");
  for (const auto& g : rep.groups) std::printf("%-10s %6zu %8s\n", g.group.c_str(), g.n, pct(g.accuracy).c_str());
  std::printf("%-10s %6zu %8s\n", "average", rep.n, pct(rep.average).c_str());
  if (rep.failures) std::printf("backend failures: %zu\n", rep.failures);
}

// ---- commands ------------------------------------------------------------------

int cmd_gen_data(const Options& o) {
  htt::config::check_task(o.task);
  const auto sizes = htt::config::default_splits(o.task);
  const bool list = o.task == "listfn";
  const std::vector<std::string> files = list ? std::vector<std::string>{"tasks"}
                                              : std::vector<std::string>{"train", "validation", "test"};
  for (const auto& f : files) {
    const auto path = fs::path(o.data) / (f + ".jsonl");
    if (fs::exists(path) && !o.force) throw UsageError("refusing to overwrite " + path.string() + " (use --force)");
  }
  fs::create_directories(o.data);
  auto path = [&](const std::string& f) { return (fs::path(o.data) / (f + ".jsonl")).string(); };
  if (list) {
    std::vector<htt::listfn::ListFnTask> tasks;
    for (auto s : {htt::listfn::Subset::P1, htt::listfn::Subset::P2, htt::listfn::Subset::P3}) {
      const auto n = o.n_train.value_or(htt::listfn::catalog(s).size());
      for (auto& t : htt::listfn::generate(s, n, htt::derive_seed(o.seed, static_cast<std::uint64_t>(s)))) {
        t.name = std::string(htt::listfn::to_string(s)) + "/" + std::to_string(tasks.size()) + " " + t.name;
        tasks.push_back(std::move(t));
      }
    }
    htt::io::save_tasks(path("tasks"), tasks);
    std::printf("wrote %zu list-function tasks (%zu/%zu/%zu pairs each) to %s\n", tasks.size(),
                htt::listfn::kTrainSize, htt::listfn::kValidationSize, htt::listfn::kTestSize, path("tasks").c_str());
    return 0;
  }
  const std::size_t n_train = o.n_train.value_or(sizes.train);
  std::vector<htt::StepInstance> train, val, test;
  if (o.task == "kinship") {
    using htt::config::kKinshipTestHops;
    using htt::config::kKinshipTrainHops;
    for (auto& x : htt::kinship::generate(n_train, kKinshipTrainHops[0], kKinshipTrainHops[1], o.seed, 0)) train.push_back(x);
    for (auto& x : htt::kinship::generate(sizes.validation, kKinshipTestHops[0], kKinshipTestHops[1], o.seed, 1'000'000)) val.push_back(x);
    for (auto& x : htt::kinship::generate(sizes.test, kKinshipTestHops[0], kKinshipTestHops[1], o.seed, 2'000'000)) test.push_back(x);
  } else {
    const int base = htt::grammar::arith_base(o.task);
    for (auto& x : htt::arith::generate(base, htt::config::kArithTrainDigits, n_train, o.seed, 0)) train.push_back(x);
    for (int d = htt::config::kArithTestDigits[0]; d <= htt::config::kArithTestDigits[1]; ++d) {
      const auto offset = static_cast<std::uint64_t>(d) * 100'000;
      for (auto& x : htt::arith::generate(base, d, sizes.validation, o.seed, 1'000'000 + offset)) val.push_back(x);
      for (auto& x : htt::arith::generate(base, d, sizes.test, o.seed, 2'000'000 + offset)) test.push_back(x);
    }
  }
  htt::io::save_instances(path("train"), train);
  htt::io::save_instances(path("validation"), val);
  htt::io::save_instances(path("test"), test);
  std::printf("wrote %zu train, %zu validation, %zu test instances to %s\n", train.size(), val.size(), test.size(),
              o.data.c_str());
  return 0;
}

int cmd_induce(const Options& o) {
  htt::config::check_task(o.task);
  const auto filter = filter_of(o);
  const htt::pipeline::RunOptions run{o.workers};
  auto reasoner = make_reasoner(o, o.seed);
  write_resolved_config(o);
  if (o.task == "listfn") {
    const auto tasks = htt::io::load_tasks(data_file(o, "tasks"));
    const auto res = htt::pipeline::run_listfn_induction(*reasoner, tasks, htt::config::kListCallsPerTask, filter, run);
    htt::io::save_list_libraries((fs::path(o.out) / "library.jsonl").string(), res.library);
    std::size_t kept = 0, total = 0;
    for (const auto& [n, lib] : res.library) kept += lib.size();
    for (const auto& [n, lib] : res.tally) total += lib.size();
    std::printf("tasks: %zu  candidates kept %zu/%zu (k=%lld, p=%s)\n", tasks.size(), kept, total,
                static_cast<long long>(filter.k), htt::text::fixed(filter.p, 2).c_str());
    return 0;
  }
  const auto train = load_split(o, "train");
  const auto draws = train.size() < o.draws ? htt::pipeline::resample(train, o.draws, o.seed) : train;
  const auto res = htt::pipeline::run_induction(*reasoner, draws, filter, run);
  auto lib = res.library;
  lib.meta = Json{{"backend", o.backend},  {"mode", o.mode},  {"epsilon", o.epsilon}, {"rho", o.rho},
                  {"seed", o.seed},        {"k", filter.k},   {"p", filter.p},       {"examples", draws.size()}};
  htt::save(lib, (fs::path(o.out) / "library.json").string());
  std::vector<Json> rows;
  for (const auto& r : res.records) rows.push_back(htt::io::record_json(r));
  htt::io::write_jsonl((fs::path(o.out) / "records.jsonl").string(), rows);
  std::size_t correct = 0;
  for (const auto& r : res.records) correct += r.answer_correct;
  const auto pr = htt::pipeline::rule_precision_recall(lib, htt::oracle_rules(train));
  std::printf("examples: %zu (%zu answered correctly)\n", draws.size(), correct);
  std::printf("rules kept: %zu/%zu (k=%lld, p=%s)\n", lib.size(), res.tally.size(), static_cast<long long>(filter.k),
              htt::text::fixed(filter.p, 2).c_str());
  std::printf("precision: %s  recall: %s  (oracle rules: %zu)\n",
              pr.precision ? htt::text::fixed(*pr.precision, 3).c_str() : "undefined", htt::text::fixed(pr.recall, 3).c_str(),
              pr.oracle);
  if (res.failures) std::printf("backend failures: %zu\n", res.failures);
  return 0;
}

htt::RuleLibrary maybe_randomize(const Options& o, htt::RuleLibrary lib) {
  if (!o.randomize) return lib;
  if (htt::grammar::is_arith_task(lib.task_id())) {
    return htt::randomize_conclusions(lib, o.seed, htt::arith::conclusion_domain(htt::grammar::arith_base(lib.task_id())));
  }
  if (lib.task_id() == "kinship") return htt::randomize_conclusions(lib, o.seed, htt::kinship::vocabulary());
  throw UsageError("--randomize-conclusions applies to kinship and arithmetic libraries");
}

std::string library_path(const Options& o) {
  const auto path = o.library.empty() ? (fs::path(o.out) / (o.task == "listfn" ? "library.jsonl" : "library.json")).string()
                                      : o.library;
  if (!fs::exists(path)) throw UsageError("library not found: " + path);
  return path;
}

int cmd_deduce(const Options& o) {
  htt::config::check_task(o.task);
  if (o.split != "test" && o.split != "validation") throw UsageError("--split must be test or validation");
  const htt::pipeline::RunOptions run{o.workers};
  auto reasoner = make_reasoner(o, o.seed);
  htt::pipeline::EvalReport rep;
  if (o.task == "listfn") {
    const auto tasks = htt::io::load_tasks(data_file(o, "tasks"));
    std::optional<std::map<std::string, htt::RuleLibrary>> libs;
    if (!o.no_library) libs = htt::io::load_list_libraries(library_path(o));
    write_resolved_config(o);
    rep = htt::pipeline::run_listfn_deduction(*reasoner, libs ? &*libs : nullptr, tasks, run);
  } else {
    std::optional<htt::RuleLibrary> lib;
    if (!o.no_library) lib = maybe_randomize(o, htt::load(library_path(o)));
    const auto test = load_split(o, o.split);
    write_resolved_config(o);
    rep = htt::pipeline::run_deduction(*reasoner, lib ? &*lib : nullptr, test, run);
    std::vector<Json> rows;
    for (const auto& r : rep.records) rows.push_back(htt::io::record_json(r));
    htt::io::write_jsonl((fs::path(o.out) / "deduction_records.jsonl").string(), rows);
  }
  htt::text::write_file((fs::path(o.out) / "report.csv").string(), htt::pipeline::report_csv(rep));
  htt::text::write_file((fs::path(o.out) / "summary.json").string(), htt::pipeline::report_json(rep).dump(2) + "\n");
  print_report(rep);
  return 0;
}

int cmd_grid(const Options& o) {
  htt::config::check_task(o.task);
  if (o.task == "listfn") throw UsageError("grid search runs on kinship and arithmetic tasks");
  auto reasoner = make_reasoner(o, o.seed);
  const auto train = load_split(o, "train");
  const auto val = load_split(o, "validation");
  write_resolved_config(o);
  const auto draws = train.size() < o.draws ? htt::pipeline::resample(train, o.draws, o.seed) : train;
  const auto res = htt::pipeline::grid_search(*reasoner, draws, val, htt::pipeline::default_k_grid(),
                                              htt::pipeline::default_p_grid(), {o.workers});
  std::string csv = "k,p,library_size,accuracy\n";
  for (const auto& c : res.cells) {
    csv += std::to_string(c.params.k) + "," + htt::text::fixed(c.params.p, 1) + "," + std::to_string(c.library_size) + "," +
           htt::text::fixed(c.accuracy, 4) + "\n";
  }
  htt::text::write_file((fs::path(o.out) / "grid.csv").string(), csv);
  std::printf("%s", csv.c_str());
  std::printf("best: k=%lld p=%s\n", static_cast<long long>(res.best.k), htt::text::fixed(res.best.p, 1).c_str());
  return 0;
}

int cmd_sweep(const Options& o) {
  htt::config::check_task(o.task);
  if (o.task == "listfn") throw UsageError("scaling sweeps run on kinship and arithmetic tasks");
  const auto train = load_split(o, "train");
  const auto test = load_split(o, "test");
  std::vector<std::size_t> ns;
  for (auto n : o.ns) ns.push_back(std::min(n, train.size()));
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
  write_resolved_config(o);
  const auto rows = htt::pipeline::scaling_sweep([&](std::uint64_t seed) { return make_reasoner(o, seed); }, train, test, ns,
                                                 o.seeds, filter_of(o), {o.workers});
  const auto csv = htt::pipeline::sweep_csv(rows);
  htt::text::write_file((fs::path(o.out) / "sweep.csv").string(), csv);
  std::printf("%s", csv.c_str());
  return 0;
}

int cmd_inspect(const Options& o) {
  const auto& path = o.inspect_path;
  if (!fs::exists(path)) throw UsageError("library not found: " + path);
  if (htt::io::is_list_libraries(path)) {
    for (const auto& [name, lib] : htt::io::load_list_libraries(path)) {
      std::printf("%s: %zu rules\n", name.c_str(), lib.size());
      for (const auto& line : htt::listfn::confidence_lines(htt::listfn::candidates_of(lib))) std::printf("  %s\n", line.c_str());
    }
    return 0;
  }
  Json j;
  try {
    j = Json::parse(htt::text::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw htt::ParseError(path, e.what());
  }
  if (j.value("format", "") == htt::listfn::kFixtureFormat) {
    const auto f = htt::listfn::load_fixture(path);
    std::printf("listfn %s: %zu rules\n", std::string(htt::listfn::to_string(f.subset)).c_str(), f.rule_count());
    for (const auto& t : f.tasks) {
      std::printf("%s (%zu rules)\n", t.ground_truth.c_str(), t.rules.size());
      for (const auto& line : htt::listfn::confidence_lines(t.rules)) std::printf("  %s\n", line.c_str());
    }
    return 0;
  }
  const auto lib = htt::load(path);
  std::printf("%s: %zu rules\n", lib.task_id().c_str(), lib.size());
  struct Row {
    std::string line;
    std::optional<double> conf;
    htt::RuleTally tally;
  };
  std::vector<Row> rows;
  for (const auto& [r, t] : lib.entries()) {
    rows.push_back({htt::tagged_line(r, 3), t.occurrence > 0 ? std::optional<double>(htt::confidence(t)) : std::nullopt, t});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.conf.value_or(-1) > b.conf.value_or(-1); });
  for (const auto& r : rows) {
    std::printf("%s: %s (%lld/%lld)\n", r.line.c_str(), r.conf ? htt::text::fixed(*r.conf, 2).c_str() : "n/a",
                static_cast<long long>(r.tally.correct), static_cast<long long>(r.tally.occurrence));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rule induction and deduction runs over kinship, arithmetic and list-function tasks"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML file with option values (flags take precedence)");
  Options o;
  o.client.cache_dir = ".htt-cache";

  app.add_option("--task", o.task, "kinship, arith-9, arith-11, arith-16 or listfn");
  app.add_option("--backend", o.backend, "simulated or http")->capture_default_str();
  app.add_option("--mode", o.mode, "zero_shot_cot, few_shot_cot or few_shot_ltm")->capture_default_str();
  app.add_option("--epsilon", o.epsilon, "simulated per-step corruption rate")->capture_default_str();
  app.add_option("--rho", o.rho, "simulated wrong-sibling retrieval rate")->capture_default_str();
  app.add_option("--seed", o.seed, "global seed")->capture_default_str();
  app.add_option("--k", o.k, "minimal coverage (default: tuned per task)");
  app.add_option("--p", o.p, "minimal confidence (default: tuned per task)");
  app.add_option("--tag-depth", o.tag_depth, "XML tag levels shown in prompts (0-3)")->capture_default_str();
  app.add_flag("--sorted,!--unsorted", o.sorted, "render library rules sorted (default) or shuffled");
  app.add_flag("--no-library", o.no_library, "deduce without a library (baseline)");
  app.add_flag("--randomize-conclusions", o.randomize, "replace every library conclusion by a random wrong one");
  app.add_option("--workers", o.workers, "parallel workers")->capture_default_str();
  app.add_flag("--force", o.force, "overwrite existing data files");
  app.add_option("--out", o.out, "output directory")->capture_default_str();
  app.add_option("--data", o.data, "data directory")->capture_default_str();
  app.add_option("--library", o.library, "library file (default: <out>/library.json)");
  app.add_option("--n-train", o.n_train, "training instances (gen-data) or list tasks per subset");
  app.add_option("--draws", o.draws, "induction draws; smaller training sets are resampled")->capture_default_str();
  app.add_option("--split", o.split, "deduction split: test or validation")->capture_default_str();
  app.add_option("--ns", o.ns, "sweep sizes")->capture_default_str()->delimiter(',');
  app.add_option("--seeds", o.seeds, "sweep seeds")->capture_default_str()->delimiter(',');
  app.add_option("--model", o.gen.model, "http: model name")->capture_default_str();
  app.add_option("--endpoint", o.gen.endpoint, "http: chat-completions URL")->capture_default_str();
  app.add_option("--temperature", o.gen.temperature, "http: sampling temperature")->capture_default_str();
  app.add_option("--max-tokens", o.gen.max_tokens, "http: completion length limit")->capture_default_str();
  app.add_option("--credential-env", o.client.credential_variable, "http: variable holding the API key")->capture_default_str();
  app.add_option("--cache-dir", o.client.cache_dir, "http: response cache directory")->capture_default_str();
  app.add_option("--rpm", o.client.requests_per_minute, "http: request rate limit per minute")->capture_default_str();

  auto* gen = app.add_subcommand("gen-data", "generate train/validation/test data");
  auto* induce = app.add_subcommand("induce", "induce a rule library from training data");
  auto* deduce = app.add_subcommand("deduce", "answer a split with (or without) a library");
  auto* grid = app.add_subcommand("grid", "search (k, p) on the validation split");
  auto* sweep = app.add_subcommand("sweep", "accuracy and recall against training size");
  auto* inspect = app.add_subcommand("inspect", "list a library sorted by confidence");
  inspect->add_option("path", o.inspect_path, "library file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*inspect) return cmd_inspect(o);
    if (o.task.empty()) throw UsageError("--task is required");
    if (*gen) return cmd_gen_data(o);
    if (*induce) return cmd_induce(o);
    if (*deduce) return cmd_deduce(o);
    if (*grid) return cmd_grid(o);
    if (*sweep) return cmd_sweep(o);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const htt::ConfigurationError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
