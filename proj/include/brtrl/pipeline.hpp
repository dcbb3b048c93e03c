#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "brtrl/boosting.hpp"
#include "brtrl/envs.hpp"

namespace brtrl {

using DeterministicPolicy = std::function<Action(const State&)>;

struct EvalReport {
  int n_episodes = 0;
  double mean_reward = 0.0;
  double std_reward = 0.0;  // population std
  double min_reward = 0.0;
  double max_reward = 0.0;
  double mean_length = 0.0;
  std::vector<double> episode_rewards;
  std::vector<int> episode_lengths;
};

struct DistillReport {
  EvalReport teacher_eval;
  EvalReport student_eval;
  double fidelity = 0.0;
  int total_nodes = 0;
  std::vector<int> per_tree_nodes;
};

// Rollouts under the policy's own actions; episode i uses the stream derived
// from (seed, i). collect() is the concatenation of collect_episodes().
std::vector<LabeledDataset> collect_episodes(const DeterministicPolicy& policy, Environment& env,
                                             int n_episodes, std::uint64_t seed);
LabeledDataset collect(const DeterministicPolicy& policy, Environment& env, int n_episodes,
                       std::uint64_t seed);

// Episode-level split: the last max(1, floor(n * holdout_fraction)) episodes
// are held out (none when the fraction is 0).
struct DatasetSplit {
  LabeledDataset train;
  LabeledDataset heldout;
};
DatasetSplit split_dataset(const std::vector<LabeledDataset>& episodes, double holdout_fraction);

GbmClassifier distill(const LabeledDataset& data, const GbmParams& params);

EvalReport evaluate(const DeterministicPolicy& policy, Environment& env, int n_episodes,
                    std::uint64_t seed);

// Fraction of recorded states where the student's argmax matches the label.
double fidelity(const GbmClassifier& model, const LabeledDataset& data);

DistillReport compare(const EvalReport& teacher_report, const EvalReport& student_report,
                      const GbmClassifier& student, const LabeledDataset& heldout);

// Flat key=value rendering of a DistillReport.
void write_distill_report(std::ostream& out, const DistillReport& report);

}  // namespace brtrl
