#include "brtrl/policy_gradient.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

#include "brtrl/errors.hpp"
#include "brtrl/rng.hpp"
#include "brtrl/softmax.hpp"

namespace brtrl {

namespace {

double parse_header_field(const std::string& token, const char* key) {
  const std::string prefix = std::string(key) + "=";
  if (token.rfind(prefix, 0) != 0) {
    throw IoError("expected '" + prefix + "...' in header, got '" + token + "'");
  }
  return parse_double(token.substr(prefix.size()));
}

}  // namespace

// ---------------------------------------------------------------------------
// PreferenceEnsemble
// ---------------------------------------------------------------------------

PreferenceEnsemble::PreferenceEnsemble(int n_actions, double learning_rate)
    : n_actions_(n_actions), learning_rate_(learning_rate) {
  if (n_actions < 2) throw std::invalid_argument("PreferenceEnsemble: need at least 2 actions");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("PreferenceEnsemble: learning rate must be positive");
  }
}

std::vector<double> PreferenceEnsemble::preferences(const State& state) const {
  std::vector<double> f(n_actions_, 0.0);
  for (const auto& group : groups_) {
    for (int k = 0; k < n_actions_; ++k) {
      f[k] += learning_rate_ * group[k].predict(state);
    }
  }
  return f;
}

std::vector<double> PreferenceEnsemble::probs(const State& state) const {
  return policy_probs(*this, state);
}

void PreferenceEnsemble::add_group(std::vector<RegressionTree> group) {
  if (static_cast<int>(group.size()) != n_actions_) {
    throw std::invalid_argument("PreferenceEnsemble: group must hold one tree per action");
  }
  groups_.push_back(std::move(group));
}

void PreferenceEnsemble::drop_oldest_group() {
  if (groups_.empty()) throw std::logic_error("PreferenceEnsemble: no group to drop");
  groups_.erase(groups_.begin());
}

int PreferenceEnsemble::total_node_count() const {
  int total = 0;
  for (const auto& group : groups_) {
    for (const auto& tree : group) total += tree.node_count();
  }
  return total;
}

void PreferenceEnsemble::save(std::ostream& out) const {
  out << "PGE v1 actions=" << n_actions_ << " eta=" << format_double(learning_rate_)
      << " groups=" << groups_.size() << "\n";
  for (const auto& group : groups_) {
    for (const auto& tree : group) tree.save(out);
  }
}

PreferenceEnsemble PreferenceEnsemble::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("PGE load: missing header");
  std::istringstream header(line);
  std::string magic, version, actions_tok, eta_tok, groups_tok;
  header >> magic >> version >> actions_tok >> eta_tok >> groups_tok;
  if (magic != "PGE" || version != "v1") throw IoError("PGE load: bad header '" + line + "'");
  const int n_actions = static_cast<int>(parse_header_field(actions_tok, "actions"));
  const double eta = parse_header_field(eta_tok, "eta");
  const int n_groups = static_cast<int>(parse_header_field(groups_tok, "groups"));
  if (n_groups < 0) throw IoError("PGE load: negative group count");

  PreferenceEnsemble ensemble(n_actions, eta);
  for (int g = 0; g < n_groups; ++g) {
    std::vector<RegressionTree> group;
    group.reserve(n_actions);
    for (int k = 0; k < n_actions; ++k) group.push_back(RegressionTree::load(in));
    ensemble.groups_.push_back(std::move(group));
  }
  return ensemble;
}

bool PreferenceEnsemble::operator==(const PreferenceEnsemble& other) const {
  return n_actions_ == other.n_actions_ && learning_rate_ == other.learning_rate_ &&
         groups_ == other.groups_;
}

// ---------------------------------------------------------------------------
// ValueBaseline
// ---------------------------------------------------------------------------

double ValueBaseline::value(const State& state) const {
  double v = 0.0;
  for (const auto& tree : trees_) v += step_ * tree.predict(state);
  return v;
}

void ValueBaseline::append(RegressionTree tree) {
  if (static_cast<int>(trees_.size()) == kMaxTrees) trees_.erase(trees_.begin());
  trees_.push_back(std::move(tree));
}

// ---------------------------------------------------------------------------
// Policy ops
// ---------------------------------------------------------------------------

std::vector<double> policy_probs(const PreferenceEnsemble& ensemble, const State& state) {
  std::vector<double> f = ensemble.preferences(state);
  const double offset = 1.0 / static_cast<double>(f.size());
  for (double& v : f) v += offset;
  return softmax(f);
}

Action sample_action(std::span<const double> probs, std::mt19937_64& rng) {
  if (probs.empty()) throw std::invalid_argument("sample_action: empty probability vector");
  double sum = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0) {
      throw std::invalid_argument("sample_action: probabilities must be non-negative");
    }
    sum += p;
  }
  if (std::fabs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("sample_action: probabilities must sum to 1");
  }
  const double u = uniform_unit(rng);
  double cumulative = 0.0;
  for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
    cumulative += probs[k];
    if (u < cumulative) return static_cast<Action>(k);
  }
  return static_cast<Action>(probs.size() - 1);
}

std::vector<double> discounted_returns(std::span<const double> rewards, double gamma) {
  if (!(gamma >= 0.0) || !(gamma <= 1.0)) {
    throw std::invalid_argument("discounted_returns: gamma must lie in [0, 1]");
  }
  std::vector<double> returns(rewards.size());
  double tail = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    tail = rewards[i] + gamma * tail;
    returns[i] = tail;
  }
  return returns;
}

std::vector<AdvantageRecord> compute_advantages(const std::vector<EpisodeLog>& batch,
                                                const PreferenceEnsemble& ensemble,
                                                const ValueBaseline& baseline, double gamma) {
  std::vector<AdvantageRecord> records;
  for (const EpisodeLog& episode : batch) {
    std::vector<double> rewards;
    rewards.reserve(episode.records.size());
    for (const StepRecord& step : episode.records) rewards.push_back(step.reward);
    const std::vector<double> returns = discounted_returns(rewards, gamma);
    for (std::size_t i = 0; i < episode.records.size(); ++i) {
      const StepRecord& step = episode.records[i];
      AdvantageRecord rec;
      rec.state = step.state;
      rec.action = step.action;
      rec.advantage = returns[i] - baseline.value(step.state);
      rec.probs_at_decision = policy_probs(ensemble, step.state);
      records.push_back(std::move(rec));
    }
  }
  return records;
}

ValueBaseline update_baseline(ValueBaseline baseline, const std::vector<State>& states,
                              const std::vector<double>& returns,
                              const TreeParams& tree_params) {
  if (states.size() != returns.size()) {
    throw std::invalid_argument("update_baseline: states/returns size mismatch");
  }
  if (states.empty()) throw std::invalid_argument("update_baseline: empty batch");
  WeightedDataset data;
  data.states = states;
  data.targets.resize(returns.size());
  for (std::size_t i = 0; i < returns.size(); ++i) {
    data.targets[i] = returns[i] - baseline.value(states[i]);
  }
  baseline.append(fit_tree(data, tree_params));
  return baseline;
}

namespace {

// One tree per action on targets advantage * (1{a=k} - p_k), plus an optional
// recycled contribution from the group about to be dropped.
std::vector<RegressionTree> fit_policy_group(const PreferenceEnsemble& ensemble,
                                             const std::vector<AdvantageRecord>& records,
                                             const TreeParams& tree_params,
                                             const std::vector<RegressionTree>* recycled,
                                             double blend) {
  const int n_actions = ensemble.n_actions();
  WeightedDataset data;
  data.states.reserve(records.size());
  for (const AdvantageRecord& rec : records) {
    if (static_cast<int>(rec.probs_at_decision.size()) != n_actions) {
      throw std::invalid_argument("train_round: record probability vector has wrong length");
    }
    data.states.push_back(rec.state);
  }
  std::vector<RegressionTree> group;
  group.reserve(n_actions);
  for (int k = 0; k < n_actions; ++k) {
    data.targets.clear();
    data.targets.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
      const AdvantageRecord& rec = records[i];
      const double indicator = rec.action == k ? 1.0 : 0.0;
      double target = rec.advantage * (indicator - rec.probs_at_decision[k]);
      if (recycled != nullptr) {
        target += blend * ensemble.learning_rate() * (*recycled)[k].predict(rec.state);
      }
      data.targets.push_back(target);
    }
    group.push_back(fit_tree(data, tree_params));
  }
  return group;
}

}  // namespace

PreferenceEnsemble train_round(PreferenceEnsemble ensemble,
                               const std::vector<AdvantageRecord>& records,
                               const TreeParams& tree_params) {
  if (records.empty()) throw std::invalid_argument("train_round: empty batch");
  ensemble.add_group(fit_policy_group(ensemble, records, tree_params, nullptr, 0.0));
  return ensemble;
}

PreferenceEnsemble train_round_recycled(PreferenceEnsemble ensemble,
                                        const std::vector<AdvantageRecord>& records,
                                        const TreeParams& tree_params, int capacity,
                                        double blend) {
  if (records.empty()) throw std::invalid_argument("train_round_recycled: empty batch");
  if (capacity < 1) throw std::invalid_argument("train_round_recycled: capacity must be >= 1");
  if (ensemble.group_count() < capacity) {
    ensemble.add_group(fit_policy_group(ensemble, records, tree_params, nullptr, 0.0));
    return ensemble;
  }
  const std::vector<RegressionTree>& oldest = ensemble.groups().front();
  std::vector<RegressionTree> group =
      fit_policy_group(ensemble, records, tree_params, &oldest, blend);
  ensemble.add_group(std::move(group));
  ensemble.drop_oldest_group();
  return ensemble;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

PgResult train_policy_gradient(Environment& env, const PgConfig& config, std::uint64_t seed) {
  if (config.batch_episodes < 1) {
    throw std::invalid_argument("train_policy_gradient: batch_episodes must be >= 1");
  }
  if (config.total_batches < 0) {
    throw std::invalid_argument("train_policy_gradient: total_batches must be >= 0");
  }
  PgResult result;
  result.ensemble = PreferenceEnsemble(env.action_count(), config.learning_rate);
  ValueBaseline baseline(config.baseline_step);

  const PolicyFn policy = [&result](const State& state, std::mt19937_64& rng) {
    const std::vector<double> p = policy_probs(result.ensemble, state);
    return sample_action(p, rng);
  };

  int global_episode = 0;
  for (int batch_index = 0; batch_index < config.total_batches; ++batch_index) {
    const int groups_now = result.ensemble.group_count();
    const int nodes_now = result.ensemble.total_node_count();

    std::vector<EpisodeLog> batch;
    batch.reserve(config.batch_episodes);
    for (int e = 0; e < config.batch_episodes; ++e) {
      std::mt19937_64 stream = derive_stream(seed, static_cast<std::uint64_t>(global_episode));
      EpisodeLog log = run_episode(env, policy, stream, config.max_steps);
      result.curve.push_back(
          {global_episode, log.total_reward, groups_now, nodes_now});
      batch.push_back(std::move(log));
      ++global_episode;
    }

    // Advantages and baseline targets both use the pre-update baseline.
    std::vector<AdvantageRecord> records =
        compute_advantages(batch, result.ensemble, baseline, config.gamma);

    std::vector<State> states;
    std::vector<double> returns;
    for (const EpisodeLog& episode : batch) {
      std::vector<double> rewards;
      rewards.reserve(episode.records.size());
      for (const StepRecord& step : episode.records) rewards.push_back(step.reward);
      std::vector<double> g = discounted_returns(rewards, config.gamma);
      for (std::size_t i = 0; i < episode.records.size(); ++i) {
        states.push_back(episode.records[i].state);
        returns.push_back(g[i]);
      }
    }
    baseline = update_baseline(std::move(baseline), states, returns, config.baseline_tree_params);

    if (config.capacity.has_value()) {
      result.ensemble = train_round_recycled(std::move(result.ensemble), records,
                                             config.tree_params, *config.capacity,
                                             config.recycle_blend);
    } else {
      result.ensemble = train_round(std::move(result.ensemble), records, config.tree_params);
    }
  }
  return result;
}

void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve) {
  out << "episode,total_reward,ensemble_groups,total_nodes\n";
  for (const CurvePoint& point : curve) {
    out << point.episode << ',' << format_double(point.total_reward) << ','
        << point.ensemble_groups << ',' << point.total_nodes << '\n';
  }
}

}  // namespace brtrl
