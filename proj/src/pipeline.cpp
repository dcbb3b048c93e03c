#include "brtrl/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "brtrl/rng.hpp"
#include "brtrl/trees.hpp"

namespace brtrl {

namespace {

PolicyFn wrap_deterministic(const DeterministicPolicy& policy) {
  return [&policy](const State& state, std::mt19937_64&) { return policy(state); };
}

}  // namespace

std::vector<LabeledDataset> collect_episodes(const DeterministicPolicy& policy, Environment& env,
                                             int n_episodes, std::uint64_t seed) {
  if (n_episodes < 1) throw std::invalid_argument("collect: n_episodes must be >= 1");
  const PolicyFn rollout_policy = wrap_deterministic(policy);
  std::vector<LabeledDataset> episodes;
  episodes.reserve(n_episodes);
  for (int e = 0; e < n_episodes; ++e) {
    std::mt19937_64 stream = derive_stream(seed, static_cast<std::uint64_t>(e));
    const EpisodeLog log = run_episode(env, rollout_policy, stream, Environment::kMaxEpisodeSteps);
    LabeledDataset data;
    for (const StepRecord& step : log.records) data.append(step.state, step.action);
    episodes.push_back(std::move(data));
  }
  return episodes;
}

LabeledDataset collect(const DeterministicPolicy& policy, Environment& env, int n_episodes,
                       std::uint64_t seed) {
  LabeledDataset flat;
  for (const LabeledDataset& episode : collect_episodes(policy, env, n_episodes, seed)) {
    for (std::size_t i = 0; i < episode.states.size(); ++i) {
      flat.append(episode.states[i], episode.labels[i]);
    }
  }
  return flat;
}

DatasetSplit split_dataset(const std::vector<LabeledDataset>& episodes, double holdout_fraction) {
  if (!(holdout_fraction >= 0.0) || !(holdout_fraction < 1.0)) {
    throw std::invalid_argument("split_dataset: holdout fraction must lie in [0, 1)");
  }
  const int n = static_cast<int>(episodes.size());
  int n_heldout = 0;
  if (holdout_fraction > 0.0 && n > 0) {
    n_heldout = std::max(1, static_cast<int>(std::floor(n * holdout_fraction)));
    n_heldout = std::min(n_heldout, n - 1);  // keep at least one training episode
  }
  DatasetSplit split;
  for (int e = 0; e < n; ++e) {
    LabeledDataset& dest = e < n - n_heldout ? split.train : split.heldout;
    for (std::size_t i = 0; i < episodes[e].states.size(); ++i) {
      dest.append(episodes[e].states[i], episodes[e].labels[i]);
    }
  }
  return split;
}

GbmClassifier distill(const LabeledDataset& data, const GbmParams& params) {
  return fit_gbm(data, params);
}

EvalReport evaluate(const DeterministicPolicy& policy, Environment& env, int n_episodes,
                    std::uint64_t seed) {
  if (n_episodes < 1) throw std::invalid_argument("evaluate: n_episodes must be >= 1");
  const PolicyFn rollout_policy = wrap_deterministic(policy);
  EvalReport report;
  report.n_episodes = n_episodes;
  report.episode_rewards.reserve(n_episodes);
  report.episode_lengths.reserve(n_episodes);
  for (int e = 0; e < n_episodes; ++e) {
    std::mt19937_64 stream = derive_stream(seed, static_cast<std::uint64_t>(e));
    const EpisodeLog log = run_episode(env, rollout_policy, stream, Environment::kMaxEpisodeSteps);
    report.episode_rewards.push_back(log.total_reward);
    report.episode_lengths.push_back(log.length());
  }
  double sum = 0.0, sum_len = 0.0;
  report.min_reward = report.episode_rewards.front();
  report.max_reward = report.episode_rewards.front();
  for (int e = 0; e < n_episodes; ++e) {
    sum += report.episode_rewards[e];
    sum_len += report.episode_lengths[e];
    report.min_reward = std::min(report.min_reward, report.episode_rewards[e]);
    report.max_reward = std::max(report.max_reward, report.episode_rewards[e]);
  }
  report.mean_reward = sum / n_episodes;
  report.mean_length = sum_len / n_episodes;
  double variance = 0.0;
  for (double r : report.episode_rewards) {
    variance += (r - report.mean_reward) * (r - report.mean_reward);
  }
  report.std_reward = std::sqrt(variance / n_episodes);
  return report;
}

double fidelity(const GbmClassifier& model, const LabeledDataset& data) {
  if (data.states.empty()) throw std::invalid_argument("fidelity: empty dataset");
  int hits = 0;
  for (std::size_t i = 0; i < data.states.size(); ++i) {
    if (model.predict_action(data.states[i]) == data.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.states.size());
}

DistillReport compare(const EvalReport& teacher_report, const EvalReport& student_report,
                      const GbmClassifier& student, const LabeledDataset& heldout) {
  DistillReport report;
  report.teacher_eval = teacher_report;
  report.student_eval = student_report;
  report.fidelity = fidelity(student, heldout);
  report.per_tree_nodes = student.per_tree_node_counts();
  report.total_nodes = student.total_node_count();
  return report;
}

namespace {

void write_eval_block(std::ostream& out, const char* prefix, const EvalReport& r) {
  out << prefix << ".n_episodes = " << r.n_episodes << "\n";
  out << prefix << ".mean_reward = " << format_double(r.mean_reward) << "\n";
  out << prefix << ".std_reward = " << format_double(r.std_reward) << "\n";
  out << prefix << ".min_reward = " << format_double(r.min_reward) << "\n";
  out << prefix << ".max_reward = " << format_double(r.max_reward) << "\n";
  out << prefix << ".mean_length = " << format_double(r.mean_length) << "\n";
}

}  // namespace

void write_distill_report(std::ostream& out, const DistillReport& report) {
  write_eval_block(out, "teacher", report.teacher_eval);
  write_eval_block(out, "student", report.student_eval);
  out << "fidelity = " << format_double(report.fidelity) << "\n";
  out << "student.total_nodes = " << report.total_nodes << "\n";
  out << "student.per_tree_nodes =";
  for (int n : report.per_tree_nodes) out << ' ' << n;
  out << "\n";
}

}  // namespace brtrl
