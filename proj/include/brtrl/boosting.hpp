#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "brtrl/envs.hpp"
#include "brtrl/softmax.hpp"
#include "brtrl/trees.hpp"

namespace brtrl {

struct GbmParams {
  int rounds = 30;
  double shrinkage = 0.3;
  TreeParams tree_params;
  int n_actions = 2;
};

// Recorded (state, chosen action) pairs from a working policy.
struct LabeledDataset {
  std::vector<State> states;
  std::vector<Action> labels;

  std::size_t size() const { return states.size(); }
  void append(const LabeledDataset& other);
  void append(const State& state, Action label) {
    states.push_back(state);
    labels.push_back(label);
  }
};

// Negative gradient of multiclass cross-entropy at the current scores:
// r_k = 1{label == k} - p_k.
std::vector<double> residuals(Action label, std::span<const double> probs);

// Multiclass gradient-boosted tree classifier: one scalar regression tree
// per class per round, softmax cross-entropy loss, one-step Newton leaf
// values, zero initial scores (uniform policy with zero rounds).
class GbmClassifier {
 public:
  GbmClassifier() = default;

  static GbmClassifier fit(const LabeledDataset& data, const GbmParams& params);

  // Raw score for class k = sum over rounds of shrinkage * tree_k(state).
  std::vector<double> raw_scores(const State& state) const;
  std::vector<double> predict_proba(const State& state) const;
  // Argmax of predict_proba, ties broken toward the lowest action index.
  Action predict_action(const State& state) const;

  int n_actions() const { return n_actions_; }
  int rounds() const { return static_cast<int>(stages_.size()); }
  double shrinkage() const { return shrinkage_; }
  const std::vector<std::vector<RegressionTree>>& stages() const { return stages_; }

  int total_node_count() const;
  std::vector<int> per_tree_node_counts() const;

  // "GBM v1 actions=<K> rounds=<M> shrinkage=<v>" followed by M*K TREE
  // blocks in round-major, class-minor order. Round-trips bit-exactly.
  void save(std::ostream& out) const;
  static GbmClassifier load(std::istream& in);

  bool operator==(const GbmClassifier& other) const;

 private:
  std::vector<std::vector<RegressionTree>> stages_;  // [round][class]
  double shrinkage_ = 0.3;
  int n_actions_ = 2;
};

inline GbmClassifier fit_gbm(const LabeledDataset& data, const GbmParams& params) {
  return GbmClassifier::fit(data, params);
}

}  // namespace brtrl
