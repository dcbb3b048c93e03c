#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "brtrl/config.hpp"
#include "brtrl/errors.hpp"
#include "brtrl/plotting.hpp"
#include "brtrl/runner.hpp"
#include "brtrl/trees.hpp"

using namespace brtrl;
namespace fs = std::filesystem;

namespace {

using Flags = std::vector<std::pair<std::string, std::string>>;

// Fresh scratch directory per test, wiped up front so reruns start clean.
fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "brtrl_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string message_of(const std::function<void()>& thrower) {
  try {
    thrower();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

// ============================================================================
// Config parsing
// ============================================================================

TEST_CASE("cli: parse_config_text handles comments and rejects junk") {
  std::istringstream good(
      "# a comment\n"
      "\n"
      "environment = cartpole\n"
      "seed = 7   # trailing comment\n"
      "pg.eta = 0.25\n");
  const auto values = parse_config_text(good);
  CHECK(values.at("environment") == "cartpole");
  CHECK(values.at("seed") == "7");
  CHECK(values.at("pg.eta") == "0.25");

  std::istringstream unknown("no.such.key = 1\n");
  CHECK_THROWS_AS(parse_config_text(unknown), ConfigError);
  const std::string msg =
      message_of([] { std::istringstream in("no.such.key = 1\n"); parse_config_text(in); });
  CHECK(msg.find("no.such.key") != std::string::npos);

  std::istringstream no_equals("environment cartpole\n");
  CHECK_THROWS_AS(parse_config_text(no_equals), ConfigError);
  std::istringstream empty_value("environment =\n");
  CHECK_THROWS_AS(parse_config_text(empty_value), ConfigError);
}

TEST_CASE("cli: resolve layers defaults, file, then flags") {
  const fs::path dir = scratch("resolve_layers");
  write_file(dir / "run.cfg",
             "environment = cartpole\n"
             "seed = 5\n"
             "gbm.rounds = 9\n");

  const auto config = ExperimentConfig::resolve(
      "distill", (dir / "run.cfg").string(),
      {{"seed", "11"}, {"out", (dir / "out").string()}});
  CHECK(config.mode() == "distill");
  CHECK(config.get_uint("seed") == 11);          // flag beats file
  CHECK(config.get_int("gbm.rounds") == 9);      // file beats default
  CHECK(config.get_real("gbm.shrinkage") == 0.3);  // registry default
  CHECK(config.get_string("out") == (dir / "out").string());

  // Environment-dependent defaults land per env when left unset.
  const auto cp = ExperimentConfig::resolve("teach", std::nullopt,
                                            {{"environment", "cartpole"}, {"out", "o"}});
  CHECK(cp.get_int("teacher.episodes") == 10000);
  CHECK(cp.get_real("teacher.gamma") == 0.99);
  const auto mc = ExperimentConfig::resolve("teach", std::nullopt,
                                            {{"environment", "mountaincar"}, {"out", "o"}});
  CHECK(mc.get_int("teacher.episodes") == 5000);
  CHECK(mc.get_real("teacher.gamma") == 1.0);
  const auto pinned = ExperimentConfig::resolve(
      "teach", std::nullopt,
      {{"environment", "mountaincar"}, {"teacher.episodes", "77"}, {"out", "o"}});
  CHECK(pinned.get_int("teacher.episodes") == 77);

  CHECK_THROWS_AS(ExperimentConfig::resolve("teach", (dir / "nope.cfg").string(), {}), IoError);
  CHECK_THROWS_AS(ExperimentConfig::resolve("teach", std::nullopt, {{"bogus", "1"}}), ConfigError);
}

TEST_CASE("cli: a mode key that contradicts the subcommand is rejected") {
  CHECK_THROWS_AS(
      ExperimentConfig::resolve("collect", std::nullopt, {{"mode", "teach"}, {"out", "o"}}),
      ConfigError);
  // Matching is fine.
  const auto ok =
      ExperimentConfig::resolve("teach", std::nullopt, {{"mode", "teach"}, {"out", "o"}});
  CHECK(ok.mode() == "teach");
}

TEST_CASE("cli: typed getters validate and name the offending key") {
  const auto config = ExperimentConfig::resolve(
      "pg", std::nullopt, {{"environment", "cartpole"}, {"out", "o"}});
  CHECK(config.get_int_min("pg.batches", 0) == 100);
  CHECK(config.get_real_range("pg.gamma", 0.0, 1.0) == 0.99);

  CHECK_THROWS_AS(ExperimentConfig::resolve(
                      "pg", std::nullopt,
                      {{"environment", "cartpole"}, {"pg.eta", "fast"}, {"out", "o"}}),
                  ConfigError);

  const std::string missing = message_of([&] { config.get_string("model"); });
  CHECK(missing.find("model") != std::string::npos);
  const std::string range = message_of([&] { config.get_int_min("pg.batches", 1000); });
  CHECK(range.find("pg.batches") != std::string::npos);
}

TEST_CASE("cli: config echo is sorted and re-parseable") {
  const auto config = ExperimentConfig::resolve(
      "teach", std::nullopt, {{"environment", "mountaincar"}, {"seed", "3"}, {"out", "o"}});
  std::ostringstream echoed;
  config.echo(echoed);

  std::string prev;
  std::istringstream lines(echoed.str());
  for (std::string line; std::getline(lines, line);) {
    CHECK(line.find(" = ") != std::string::npos);
    const std::string key = line.substr(0, line.find(' '));
    CHECK(prev < key);  // strictly sorted
    prev = key;
  }

  std::istringstream again(echoed.str());
  CHECK(parse_config_text(again) == config.values());
}

// ============================================================================
// Curve plumbing
// ============================================================================

TEST_CASE("cli: read_curve_csv picks columns by header name") {
  std::istringstream plain("episode,total_reward\n0,5\n1,7.5\n");
  const PlotSeries series = read_curve_csv(plain);
  CHECK(series.episodes == std::vector<int>{0, 1});
  CHECK(series.rewards == std::vector<double>{5.0, 7.5});

  // Extra columns (the pg curve layout) are ignored.
  std::istringstream wide("episode,total_reward,ensemble_groups,total_nodes\n3,200,1,14\n");
  const PlotSeries pg = read_curve_csv(wide);
  CHECK(pg.episodes == std::vector<int>{3});
  CHECK(pg.rewards == std::vector<double>{200.0});

  std::istringstream missing_column("episode,reward\n0,1\n");
  CHECK_THROWS_AS(read_curve_csv(missing_column), IoError);
  std::istringstream no_rows("episode,total_reward\n");
  CHECK_THROWS_AS(read_curve_csv(no_rows), IoError);
  std::istringstream bad_number("episode,total_reward\n0,banana\n");
  CHECK_THROWS_AS(read_curve_csv(bad_number), IoError);
  std::istringstream short_row("episode,total_reward\n0\n");
  CHECK_THROWS_AS(read_curve_csv(short_row), IoError);
}

TEST_CASE("cli: moving_average is a trailing window mean") {
  const std::vector<double> values{1.0, 2.0, 3.0, 4.0};
  CHECK(moving_average(values, 2) == std::vector<double>{1.0, 1.5, 2.5, 3.5});
  CHECK(moving_average(values, 1) == values);
  const auto wide = moving_average(values, 10);  // window longer than the data
  CHECK(wide[0] == 1.0);
  CHECK(wide[3] == doctest::Approx(2.5).epsilon(1e-12));
  CHECK_THROWS_AS(moving_average(values, 0), std::invalid_argument);
}

TEST_CASE("cli: SVG rendering is deterministic") {
  PlotSeries series;
  series.episodes = {0, 1, 2, 3};
  series.rewards = {10.0, 30.0, 20.0, 40.0};
  std::ostringstream a, b;
  render_curve_svg(a, series, 2);
  render_curve_svg(b, series, 2);
  CHECK(a.str() == b.str());
  CHECK(a.str().find("<svg") != std::string::npos);
  CHECK(a.str().find("</svg>") != std::string::npos);

  std::ostringstream sink;
  CHECK_THROWS_AS(render_curve_svg(sink, PlotSeries{}, 1), std::invalid_argument);
}

// ============================================================================
// End-to-end runs (small budgets, real artifacts)
// ============================================================================

TEST_CASE("cli: teach/collect/distill/evaluate produce their artifacts") {
  const fs::path dir = scratch("full_chain");
  std::ostringstream log;

  const Flags teach_flags{{"environment", "mountaincar"},
                          {"teacher.episodes", "30"},
                          {"out", (dir / "teach").string()},
                          {"seed", "2"}};
  run_experiment(ExperimentConfig::resolve("teach", std::nullopt, teach_flags), log);
  CHECK(fs::exists(dir / "teach" / "config.echo"));
  CHECK(fs::exists(dir / "teach" / "teacher.sarsa"));
  CHECK(fs::exists(dir / "teach" / "teacher_curve.csv"));
  CHECK(fs::exists(dir / "teach" / "teacher_curve.svg"));
  CHECK(log.str().find("teach: environment=mountaincar episodes=30") != std::string::npos);

  // The echoed config re-resolves to the same values.
  std::ifstream echo_in(dir / "teach" / "config.echo");
  const auto echoed = parse_config_text(echo_in);
  CHECK(echoed.at("teacher.episodes") == "30");
  CHECK(echoed.at("mode") == "teach");

  const Flags collect_flags{{"environment", "mountaincar"},
                            {"collect.episodes", "4"},
                            {"model", (dir / "teach" / "teacher.sarsa").string()},
                            {"out", (dir / "collect").string()},
                            {"seed", "2"}};
  run_experiment(ExperimentConfig::resolve("collect", std::nullopt, collect_flags), log);
  const std::string dataset = slurp(dir / "collect" / "dataset.csv");
  CHECK(dataset.rfind("episode,state_0,state_1,action\n", 0) == 0);
  CHECK(log.str().find("collect: environment=mountaincar episodes=4") != std::string::npos);

  const Flags distill_flags{{"environment", "mountaincar"},
                            {"model", (dir / "teach" / "teacher.sarsa").string()},
                            {"data", (dir / "collect" / "dataset.csv").string()},
                            {"gbm.rounds", "5"},
                            {"eval.episodes", "5"},
                            {"out", (dir / "distill").string()},
                            {"seed", "2"}};
  run_experiment(ExperimentConfig::resolve("distill", std::nullopt, distill_flags), log);
  CHECK(fs::exists(dir / "distill" / "student.gbm"));
  CHECK(fs::exists(dir / "distill" / "distill_report.txt"));
  const std::string experiments = slurp(dir / "distill" / "experiments.csv");
  CHECK(experiments.rfind("mode,environment,seed,mean_reward,std_reward,min_reward,max_reward,"
                          "fidelity,total_nodes\n",
                          0) == 0);
  CHECK(experiments.find("\ndistill,mountaincar,2,") != std::string::npos);
  CHECK(slurp(dir / "distill" / "distill_report.txt").find("fidelity = ") != std::string::npos);

  const Flags eval_flags{{"environment", "mountaincar"},
                         {"model", (dir / "distill" / "student.gbm").string()},
                         {"eval.episodes", "5"},
                         {"out", (dir / "evaluate").string()},
                         {"seed", "2"}};
  run_experiment(ExperimentConfig::resolve("evaluate", std::nullopt, eval_flags), log);
  CHECK(log.str().find("evaluate: environment=mountaincar") != std::string::npos);
  CHECK(log.str().find("total_nodes=") != std::string::npos);
  CHECK(fs::exists(dir / "evaluate" / "experiments.csv"));

  // Same distilled model, same seed: the evaluate row is reproducible.
  std::ostringstream rerun_log;
  const Flags rerun_flags{{"environment", "mountaincar"},
                          {"model", (dir / "distill" / "student.gbm").string()},
                          {"eval.episodes", "5"},
                          {"out", (dir / "evaluate2").string()},
                          {"seed", "2"}};
  run_experiment(ExperimentConfig::resolve("evaluate", std::nullopt, rerun_flags), rerun_log);
  const auto row_of = [](const std::string& csv) { return csv.substr(csv.find('\n') + 1); };
  CHECK(row_of(slurp(dir / "evaluate2" / "experiments.csv")) ==
        row_of(slurp(dir / "evaluate" / "experiments.csv")));
}

TEST_CASE("cli: export-tree writes the rule listing") {
  const fs::path dir = scratch("export_tree");
  std::ostringstream log;

  // A bare TREE file round-trips through the exporter with generic names.
  WeightedDataset data;
  data.states = {{0.0}, {1.0}};
  data.targets = {0.0, 10.0};
  TreeParams params;
  params.max_depth = 1;
  {
    std::ofstream out(dir / "model.tree");
    fit_tree(data, params).save(out);
  }
  const Flags flags{{"model", (dir / "model.tree").string()},
                    {"out", (dir / "export").string()}};
  run_experiment(ExperimentConfig::resolve("export-tree", std::nullopt, flags), log);
  const std::string rules = slurp(dir / "export" / "tree_rules.txt");
  CHECK(rules == "if f0 < 0.5\n  leaf: 0\nelse\n  leaf: 10\n");
  CHECK(log.str() == rules);

  const Flags bad_index{{"model", (dir / "model.tree").string()},
                        {"tree.index", "5"},
                        {"out", (dir / "export2").string()}};
  CHECK_THROWS_AS(
      run_experiment(ExperimentConfig::resolve("export-tree", std::nullopt, bad_index), log),
      ConfigError);
}

TEST_CASE("cli: evaluate refuses a bare tree model") {
  const fs::path dir = scratch("eval_tree");
  {
    std::ofstream out(dir / "model.tree");
    RegressionTree::leaf(1.0).save(out);
  }
  std::ostringstream log;
  const Flags flags{{"environment", "cartpole"},
                    {"model", (dir / "model.tree").string()},
                    {"out", (dir / "out").string()}};
  CHECK_THROWS_AS(run_experiment(ExperimentConfig::resolve("evaluate", std::nullopt, flags), log),
                  ConfigError);
}

TEST_CASE("cli: plot renders an SVG from a curve CSV") {
  const fs::path dir = scratch("plot");
  write_file(dir / "curve.csv", "episode,total_reward\n0,5\n1,6\n2,9\n");
  std::ostringstream log;
  const Flags flags{{"input", (dir / "curve.csv").string()},
                    {"plot.window", "2"},
                    {"out", (dir / "out").string()}};
  run_experiment(ExperimentConfig::resolve("plot", std::nullopt, flags), log);
  CHECK(fs::exists(dir / "out" / "plot.svg"));
  CHECK(log.str().find("plot: points=3 window=2") != std::string::npos);

  write_file(dir / "bad.csv", "episode,total_reward\n");
  const Flags bad{{"input", (dir / "bad.csv").string()}, {"out", (dir / "out2").string()}};
  const std::string msg = message_of([&] {
    std::ostringstream sink;
    run_experiment(ExperimentConfig::resolve("plot", std::nullopt, bad), sink);
  });
  CHECK(msg.find("input") != std::string::npos);
}

TEST_CASE("cli: pg modes emit curve, svg, and model artifacts") {
  const fs::path dir = scratch("pg_modes");
  std::ostringstream log;
  const Flags pg_flags{{"environment", "cartpole"},
                       {"pg.batches", "2"},
                       {"pg.batch_episodes", "2"},
                       {"plot.window", "2"},
                       {"out", (dir / "pg").string()},
                       {"seed", "4"}};
  run_experiment(ExperimentConfig::resolve("pg", std::nullopt, pg_flags), log);
  CHECK(fs::exists(dir / "pg" / "curve.csv"));
  CHECK(fs::exists(dir / "pg" / "curve.svg"));
  CHECK(fs::exists(dir / "pg" / "model.pge"));
  CHECK(log.str().find("pg: environment=cartpole episodes=4 groups=2") != std::string::npos);
  const std::string curve = slurp(dir / "pg" / "curve.csv");
  CHECK(curve.rfind("episode,total_reward,ensemble_groups,total_nodes\n", 0) == 0);

  const Flags recycled_flags{{"environment", "cartpole"},
                             {"pg.batches", "3"},
                             {"pg.batch_episodes", "2"},
                             {"pg.capacity", "1"},
                             {"out", (dir / "recycled").string()},
                             {"seed", "4"}};
  run_experiment(ExperimentConfig::resolve("pg-recycled", std::nullopt, recycled_flags), log);
  CHECK(log.str().find("pg-recycled: environment=cartpole episodes=6 groups=1") !=
        std::string::npos);
}

TEST_CASE("cli: unknown modes are rejected") {
  const fs::path dir = scratch("unknown_mode");
  std::ostringstream log;
  CHECK_THROWS_AS(
      run_experiment(
          ExperimentConfig::resolve("dance", std::nullopt, {{"out", (dir / "o").string()}}), log),
      ConfigError);
}
