#include "brtrl/runner.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <utility>

#include "brtrl/boosting.hpp"
#include "brtrl/envs.hpp"
#include "brtrl/errors.hpp"
#include "brtrl/pipeline.hpp"
#include "brtrl/plotting.hpp"
#include "brtrl/policy_gradient.hpp"
#include "brtrl/rng.hpp"
#include "brtrl/teacher.hpp"
#include "brtrl/trees.hpp"

namespace fs = std::filesystem;

namespace brtrl {

namespace {

// Evaluation episodes must not share streams with training/collection
// episodes drawn from the same master seed.
std::uint64_t eval_seed(std::uint64_t master_seed) {
  return splitmix64(master_seed ^ 0x6576616c5345454dULL);
}

fs::path prepare_out_dir(const ExperimentConfig& config) {
  const fs::path out = config.get_string("out");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) {
    throw IoError("cannot create output directory '" + out.string() + "': " + ec.message());
  }
  std::ofstream echo(out / "config.echo");
  if (!echo) throw IoError("cannot write '" + (out / "config.echo").string() + "'");
  config.echo(echo);
  return out;
}

std::ofstream open_for_write(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

std::ifstream open_for_read(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  return in;
}

std::unique_ptr<Environment> make_env_checked(const ExperimentConfig& config) {
  const std::string id = config.get_string("environment");
  try {
    return make_environment(id);
  } catch (const std::invalid_argument&) {
    throw ConfigError("config key 'environment': unknown environment '" + id + "'");
  }
}

std::string sniff_model_kind(const fs::path& path) {
  std::ifstream in = open_for_read(path);
  std::string magic;
  in >> magic;
  if (magic == "SARSA" || magic == "GBM" || magic == "PGE" || magic == "TREE") return magic;
  throw ConfigError("config key 'model': unrecognized model file '" + path.string() + "'");
}

SarsaParams sarsa_params_from(const ExperimentConfig& config) {
  SarsaParams params;
  params.alpha = config.get_real_range("teacher.alpha", 0.0, 10.0);
  params.gamma = config.get_real_range("teacher.gamma", 0.0, 1.0);
  params.epsilon_start = config.get_real_range("teacher.epsilon_start", 0.0, 1.0);
  params.epsilon_end = config.get_real_range("teacher.epsilon_end", 0.0, 1.0);
  params.episodes = static_cast<int>(config.get_int_min("teacher.episodes", 1));
  return params;
}

GbmParams gbm_params_from(const ExperimentConfig& config, int n_actions) {
  GbmParams params;
  params.rounds = static_cast<int>(config.get_int_min("gbm.rounds", 0));
  params.shrinkage = config.get_real_range("gbm.shrinkage", 0.0, 1.0);
  if (params.shrinkage == 0.0) {
    throw ConfigError("config key 'gbm.shrinkage': must be > 0");
  }
  params.tree_params.max_depth = static_cast<int>(config.get_int_min("gbm.max_depth", 0));
  params.tree_params.min_samples_leaf =
      static_cast<int>(config.get_int_min("gbm.min_samples_leaf", 1));
  params.tree_params.min_samples_split =
      static_cast<int>(config.get_int_min("gbm.min_samples_split", 2));
  params.n_actions = n_actions;
  return params;
}

PgConfig pg_config_from(const ExperimentConfig& config, bool recycled) {
  PgConfig pg;
  pg.batch_episodes = static_cast<int>(config.get_int_min("pg.batch_episodes", 1));
  pg.gamma = config.get_real_range("pg.gamma", 0.0, 1.0);
  pg.total_batches = static_cast<int>(config.get_int_min("pg.batches", 0));
  pg.learning_rate = config.get_real("pg.eta");
  if (!(pg.learning_rate > 0.0)) throw ConfigError("config key 'pg.eta': must be > 0");
  pg.baseline_step = config.get_real_range("pg.beta", 0.0, 10.0);
  const int depth = static_cast<int>(config.get_int_min("pg.max_depth", 0));
  pg.tree_params.max_depth = depth;
  pg.baseline_tree_params.max_depth = depth;
  if (recycled) {
    pg.capacity = static_cast<int>(config.get_int_min("pg.capacity", 1));
    pg.recycle_blend = config.get_real_range("pg.lambda", 0.0, 1.0);
  }
  return pg;
}

void write_reward_curve(const fs::path& csv_path, const fs::path& svg_path,
                        const std::vector<double>& rewards, int window) {
  std::ofstream csv = open_for_write(csv_path);
  csv << "episode,total_reward\n";
  for (std::size_t e = 0; e < rewards.size(); ++e) {
    csv << e << ',' << format_double(rewards[e]) << '\n';
  }
  csv.close();

  PlotSeries series;
  series.episodes.resize(rewards.size());
  for (std::size_t e = 0; e < rewards.size(); ++e) series.episodes[e] = static_cast<int>(e);
  series.rewards = rewards;
  std::ofstream svg = open_for_write(svg_path);
  render_curve_svg(svg, series, window);
}

void append_experiments_row(const fs::path& csv_path, const std::string& mode,
                            const std::string& env_id, std::uint64_t seed, const EvalReport& r,
                            const std::optional<double>& fidelity,
                            const std::optional<int>& total_nodes) {
  const bool fresh = !fs::exists(csv_path);
  std::ofstream out(csv_path, std::ios::app);
  if (!out) throw IoError("cannot write '" + csv_path.string() + "'");
  if (fresh) {
    out << "mode,environment,seed,mean_reward,std_reward,min_reward,max_reward,fidelity,"
           "total_nodes\n";
  }
  out << mode << ',' << env_id << ',' << seed << ',' << format_double(r.mean_reward) << ','
      << format_double(r.std_reward) << ',' << format_double(r.min_reward) << ','
      << format_double(r.max_reward) << ',';
  if (fidelity.has_value()) out << format_double(*fidelity);
  out << ',';
  if (total_nodes.has_value()) out << *total_nodes;
  out << '\n';
}

std::string eval_summary(const EvalReport& r) {
  std::ostringstream line;
  line << "episodes=" << r.n_episodes << " mean_reward=" << format_double(r.mean_reward)
       << " std_reward=" << format_double(r.std_reward)
       << " min_reward=" << format_double(r.min_reward)
       << " max_reward=" << format_double(r.max_reward)
       << " mean_length=" << format_double(r.mean_length);
  return line.str();
}

// ---------------------------------------------------------------------------
// dataset.csv: episode,state_0..state_{D-1},action
// ---------------------------------------------------------------------------

void write_dataset_csv(const fs::path& path, const std::vector<LabeledDataset>& episodes,
                       int state_dim) {
  std::ofstream out = open_for_write(path);
  out << "episode";
  for (int d = 0; d < state_dim; ++d) out << ",state_" << d;
  out << ",action\n";
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    for (std::size_t i = 0; i < episodes[e].size(); ++i) {
      out << e;
      for (double v : episodes[e].states[i]) out << ',' << format_double(v);
      out << ',' << episodes[e].labels[i] << '\n';
    }
  }
}

std::vector<LabeledDataset> read_dataset_csv(const fs::path& path) {
  std::ifstream in = open_for_read(path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("dataset CSV: missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::istringstream header(line);
  std::vector<std::string> columns;
  std::string field;
  while (std::getline(header, field, ',')) columns.push_back(field);
  if (columns.size() < 3 || columns.front() != "episode" || columns.back() != "action") {
    throw IoError("dataset CSV: expected header episode,state_*,action");
  }
  const int state_dim = static_cast<int>(columns.size()) - 2;

  std::vector<LabeledDataset> episodes;
  std::string prev_episode;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream row(line);
    std::vector<std::string> fields;
    while (std::getline(row, field, ',')) fields.push_back(field);
    if (fields.size() != columns.size()) {
      throw IoError("dataset CSV: wrong field count at line " + std::to_string(line_no));
    }
    try {
      if (episodes.empty() || fields[0] != prev_episode) {
        episodes.emplace_back();
        prev_episode = fields[0];
      }
      State state(state_dim);
      for (int d = 0; d < state_dim; ++d) state[d] = parse_double(fields[d + 1]);
      episodes.back().append(state, static_cast<Action>(parse_double(fields.back())));
    } catch (const IoError&) {
      throw;
    } catch (const std::exception&) {
      throw IoError("dataset CSV: bad value at line " + std::to_string(line_no));
    }
  }
  if (episodes.empty()) throw IoError("dataset CSV: no data rows");
  return episodes;
}

// ---------------------------------------------------------------------------
// Mode handlers
// ---------------------------------------------------------------------------

void run_teach(const ExperimentConfig& config, const fs::path& out_dir, std::ostream& log) {
  const auto env = make_env_checked(config);
  const std::uint64_t seed = config.get_uint("seed");
  const int tilings = static_cast<int>(config.get_int_min("teacher.tilings", 1));
  const int tiles = static_cast<int>(config.get_int_min("teacher.tiles", 1));
  TileCoding coding = default_tile_coding(env->id(), tilings, tiles);
  const SarsaParams params = sarsa_params_from(config);

  const SarsaResult result = sarsa_train(*env, std::move(coding), params, seed);
  {
    std::ofstream model = open_for_write(out_dir / "teacher.sarsa");
    result.teacher.save(model);
  }
  write_reward_curve(out_dir / "teacher_curve.csv", out_dir / "teacher_curve.svg",
                     result.episode_rewards, static_cast<int>(config.get_int_min("plot.window", 1)));

  const int n = static_cast<int>(result.episode_rewards.size());
  const int tail = std::min(100, n);
  double tail_sum = 0.0;
  for (int e = n - tail; e < n; ++e) tail_sum += result.episode_rewards[e];
  log << "teach: environment=" << env->id() << " episodes=" << n
      << " final100_mean=" << format_double(tail_sum / tail) << "\n";
}

void run_collect(const ExperimentConfig& config, const fs::path& out_dir, std::ostream& log) {
  const auto env = make_env_checked(config);
  const std::uint64_t seed = config.get_uint("seed");
  const int n_episodes = static_cast<int>(config.get_int_min("collect.episodes", 1));
  std::ifstream model = open_for_read(config.get_string("model"));
  const SarsaTeacher teacher = SarsaTeacher::load(model);

  const std::vector<LabeledDataset> episodes =
      collect_episodes(greedy_policy(teacher), *env, n_episodes, seed);
  write_dataset_csv(out_dir / "dataset.csv", episodes, env->state_dim());

  std::size_t total = 0;
  for (const LabeledDataset& e : episodes) total += e.size();
  log << "collect: environment=" << env->id() << " episodes=" << n_episodes
      << " samples=" << total << "\n";
}

void run_distill(const ExperimentConfig& config, const fs::path& out_dir, std::ostream& log) {
  const auto env = make_env_checked(config);
  const std::uint64_t seed = config.get_uint("seed");
  std::ifstream model_in = open_for_read(config.get_string("model"));
  const SarsaTeacher teacher = SarsaTeacher::load(model_in);
  const std::vector<LabeledDataset> episodes = read_dataset_csv(config.get_string("data"));

  const double holdout = config.get_real_range("distill.holdout", 0.0, 0.99);
  const DatasetSplit split = split_dataset(episodes, holdout);
  const GbmParams params = gbm_params_from(config, env->action_count());
  const GbmClassifier student = distill(split.train, params);

  const int eval_episodes = static_cast<int>(config.get_int_min("eval.episodes", 1));
  const EvalReport teacher_eval =
      evaluate(greedy_policy(teacher), *env, eval_episodes, eval_seed(seed));
  const EvalReport student_eval = evaluate(
      [&student](const State& s) { return student.predict_action(s); }, *env, eval_episodes,
      eval_seed(seed));
  const LabeledDataset& fidelity_data = split.heldout.size() > 0 ? split.heldout : split.train;
  const DistillReport report = compare(teacher_eval, student_eval, student, fidelity_data);

  {
    std::ofstream model_out = open_for_write(out_dir / "student.gbm");
    student.save(model_out);
  }
  {
    std::ofstream report_out = open_for_write(out_dir / "distill_report.txt");
    write_distill_report(report_out, report);
  }
  append_experiments_row(out_dir / "experiments.csv", "distill", env->id(), seed,
                         report.student_eval, report.fidelity, report.total_nodes);
  log << "distill: environment=" << env->id()
      << " teacher_mean=" << format_double(report.teacher_eval.mean_reward)
      << " student_mean=" << format_double(report.student_eval.mean_reward)
      << " fidelity=" << format_double(report.fidelity)
      << " total_nodes=" << report.total_nodes << "\n";
}

void run_evaluate(const ExperimentConfig& config, const fs::path& out_dir, std::ostream& log) {
  const auto env = make_env_checked(config);
  const std::uint64_t seed = config.get_uint("seed");
  const int eval_episodes = static_cast<int>(config.get_int_min("eval.episodes", 1));
  const fs::path model_path = config.get_string("model");
  const std::string kind = sniff_model_kind(model_path);

  DeterministicPolicy policy;
  std::optional<int> total_nodes;
  SarsaTeacher teacher{TileCoding(1, {1}, {0.0}, {1.0}), QFunction(1, 2)};
  GbmClassifier gbm;
  PreferenceEnsemble pge;
  if (kind == "SARSA") {
    std::ifstream in = open_for_read(model_path);
    teacher = SarsaTeacher::load(in);
    policy = greedy_policy(teacher);
  } else if (kind == "GBM") {
    std::ifstream in = open_for_read(model_path);
    gbm = GbmClassifier::load(in);
    total_nodes = gbm.total_node_count();
    policy = [&gbm](const State& s) { return gbm.predict_action(s); };
  } else if (kind == "PGE") {
    std::ifstream in = open_for_read(model_path);
    pge = PreferenceEnsemble::load(in);
    total_nodes = pge.total_node_count();
    policy = [&pge](const State& s) {
      const std::vector<double> p = pge.probs(s);
      return static_cast<Action>(std::max_element(p.begin(), p.end()) - p.begin());
    };
  } else {
    throw ConfigError("config key 'model': cannot evaluate a bare tree file");
  }

  const EvalReport report = evaluate(policy, *env, eval_episodes, eval_seed(seed));
  append_experiments_row(out_dir / "experiments.csv", "evaluate", env->id(), seed, report,
                         std::nullopt, total_nodes);
  log << "evaluate: environment=" << env->id() << " model=" << model_path.string() << " "
      << eval_summary(report);
  if (total_nodes.has_value()) log << " total_nodes=" << *total_nodes;
  log << "\n";
}

void run_pg(const ExperimentConfig& config, const fs::path& out_dir, std::ostream& log,
            bool recycled) {
  const auto env = make_env_checked(config);
  const std::uint64_t seed = config.get_uint("seed");
  const PgConfig pg = pg_config_from(config, recycled);
  const int window = static_cast<int>(config.get_int_min("plot.window", 1));

  const PgResult result = train_policy_gradient(*env, pg, seed);
  {
    std::ofstream csv = open_for_write(out_dir / "curve.csv");
    write_curve_csv(csv, result.curve);
  }
  {
    PlotSeries series;
    for (const CurvePoint& p : result.curve) {
      series.episodes.push_back(p.episode);
      series.rewards.push_back(p.total_reward);
    }
    std::ofstream svg = open_for_write(out_dir / "curve.svg");
    render_curve_svg(svg, series, window);
  }
  {
    std::ofstream model = open_for_write(out_dir / "model.pge");
    result.ensemble.save(model);
  }

  double tail_ma = 0.0;
  if (!result.curve.empty()) {
    std::vector<double> rewards;
    rewards.reserve(result.curve.size());
    for (const CurvePoint& p : result.curve) rewards.push_back(p.total_reward);
    tail_ma = moving_average(rewards, window).back();
  }
  log << (recycled ? "pg-recycled" : "pg") << ": environment=" << env->id()
      << " episodes=" << result.curve.size() << " groups=" << result.ensemble.group_count()
      << " total_nodes=" << result.ensemble.total_node_count() << " ma" << window << "="
      << format_double(tail_ma) << "\n";
}

void run_export_tree(const ExperimentConfig& config, const fs::path& out_dir, std::ostream& log) {
  const fs::path model_path = config.get_string("model");
  const std::string kind = sniff_model_kind(model_path);
  std::vector<RegressionTree> trees;
  std::ifstream in = open_for_read(model_path);
  if (kind == "TREE") {
    trees.push_back(RegressionTree::load(in));
  } else if (kind == "GBM") {
    const GbmClassifier model = GbmClassifier::load(in);
    for (const auto& stage : model.stages()) {
      for (const RegressionTree& tree : stage) trees.push_back(tree);
    }
  } else if (kind == "PGE") {
    const PreferenceEnsemble model = PreferenceEnsemble::load(in);
    for (const auto& group : model.groups()) {
      for (const RegressionTree& tree : group) trees.push_back(tree);
    }
  } else {
    throw ConfigError("config key 'model': SARSA teachers hold no trees to export");
  }

  const long long index = config.get_int("tree.index");
  if (index < 0 || index >= static_cast<long long>(trees.size())) {
    throw ConfigError("config key 'tree.index': out of range, model holds " +
                      std::to_string(trees.size()) + " trees");
  }
  std::vector<std::string> names;
  if (config.has("environment")) {
    names = make_env_checked(config)->feature_names();
  }
  const RegressionTree& tree = trees[static_cast<std::size_t>(index)];
  int needed = 0;
  for (const auto& node : tree.nodes()) {
    if (!node.is_leaf()) needed = std::max(needed, node.feature + 1);
  }
  while (static_cast<int>(names.size()) < needed) {
    names.push_back("f" + std::to_string(names.size()));
  }

  const std::string rules = tree.export_rules(names);
  std::ofstream out = open_for_write(out_dir / "tree_rules.txt");
  out << rules;
  log << rules;
}

void run_plot(const ExperimentConfig& config, const fs::path& out_dir, std::ostream& log) {
  std::ifstream in = open_for_read(config.get_string("input"));
  PlotSeries series;
  try {
    series = read_curve_csv(in);
  } catch (const IoError& e) {
    throw IoError(std::string(e.what()) + " (config key 'input')");
  }
  const int window = static_cast<int>(config.get_int_min("plot.window", 1));
  std::ofstream svg = open_for_write(out_dir / "plot.svg");
  render_curve_svg(svg, series, window);
  log << "plot: points=" << series.episodes.size() << " window=" << window << " -> "
      << (out_dir / "plot.svg").string() << "\n";
}

void run_repro(const ExperimentConfig& config, const fs::path& out_dir, std::ostream& log) {
  std::vector<std::string> env_ids;
  if (config.has("environment")) {
    env_ids.push_back(config.get_string("environment"));
  } else {
    env_ids = {"cartpole", "mountaincar"};
  }

  std::vector<std::pair<std::string, std::string>> base_flags;
  for (const auto& [key, value] : config.values()) {
    if (key == "mode" || key == "out" || key == "model" || key == "data" || key == "input") {
      continue;
    }
    base_flags.emplace_back(key, value);
  }
  const auto step = [&](const std::string& mode, const fs::path& dir,
                        std::vector<std::pair<std::string, std::string>> extra) {
    std::vector<std::pair<std::string, std::string>> flags = base_flags;
    flags.emplace_back("out", dir.string());
    for (auto& kv : extra) flags.push_back(std::move(kv));
    run_experiment(ExperimentConfig::resolve(mode, std::nullopt, flags), log);
  };

  for (const std::string& env_id : env_ids) {
    const fs::path base = out_dir / env_id;
    step("teach", base / "teach", {{"environment", env_id}});
    step("collect", base / "collect",
         {{"environment", env_id}, {"model", (base / "teach" / "teacher.sarsa").string()}});
    step("distill", base / "distill",
         {{"environment", env_id},
          {"model", (base / "teach" / "teacher.sarsa").string()},
          {"data", (base / "collect" / "dataset.csv").string()}});
    step("evaluate", base / "evaluate",
         {{"environment", env_id}, {"model", (base / "distill" / "student.gbm").string()}});
    if (env_id == "cartpole") {
      step("pg", base / "pg", {{"environment", env_id}});
      step("pg-recycled", base / "pg_recycled", {{"environment", env_id}});
    }
  }
  log << "repro: done, artifacts under " << out_dir.string() << "\n";
}

}  // namespace

void run_experiment(const ExperimentConfig& config, std::ostream& log) {
  const fs::path out_dir = prepare_out_dir(config);
  const std::string& mode = config.mode();
  if (mode == "teach") {
    run_teach(config, out_dir, log);
  } else if (mode == "collect") {
    run_collect(config, out_dir, log);
  } else if (mode == "distill") {
    run_distill(config, out_dir, log);
  } else if (mode == "evaluate") {
    run_evaluate(config, out_dir, log);
  } else if (mode == "pg") {
    run_pg(config, out_dir, log, false);
  } else if (mode == "pg-recycled") {
    run_pg(config, out_dir, log, true);
  } else if (mode == "export-tree") {
    run_export_tree(config, out_dir, log);
  } else if (mode == "plot") {
    run_plot(config, out_dir, log);
  } else if (mode == "repro") {
    run_repro(config, out_dir, log);
  } else {
    throw ConfigError("unknown mode '" + mode + "'");
  }
}

}  // namespace brtrl
