#include "brtrl/boosting.hpp"

#include <algorithm>

#include "brtrl/errors.hpp"
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace brtrl {

void LabeledDataset::append(const LabeledDataset& other) {
  states.insert(states.end(), other.states.begin(), other.states.end());
  labels.insert(labels.end(), other.labels.begin(), other.labels.end());
}

std::vector<double> residuals(Action label, std::span<const double> probs) {
  std::vector<double> out(probs.size());
  for (std::size_t k = 0; k < probs.size(); ++k)
    out[k] = (static_cast<int>(k) == label ? 1.0 : 0.0) - probs[k];
  return out;
}

GbmClassifier GbmClassifier::fit(const LabeledDataset& data, const GbmParams& params) {
  if (data.states.empty()) throw std::invalid_argument("fit_gbm: empty dataset");
  if (data.labels.size() != data.states.size())
    throw std::invalid_argument("fit_gbm: states/labels length mismatch");
  if (params.n_actions < 2) throw std::invalid_argument("fit_gbm: n_actions must be >= 2");
  if (params.rounds < 0) throw std::invalid_argument("fit_gbm: rounds must be >= 0");
  if (params.shrinkage <= 0.0 || params.shrinkage > 1.0)
    throw std::invalid_argument("fit_gbm: shrinkage must be in (0, 1]");
  for (Action label : data.labels)
    if (label < 0 || label >= params.n_actions)
      throw std::invalid_argument("fit_gbm: label out of range");

  const std::size_t n = data.size();
  const int n_classes = params.n_actions;

  GbmClassifier model;
  model.shrinkage_ = params.shrinkage;
  model.n_actions_ = n_classes;

  std::vector<std::vector<double>> scores(n, std::vector<double>(n_classes, 0.0));
  WeightedDataset round_data;
  round_data.states = data.states;
  round_data.targets.resize(n);

  const double newton_scale = static_cast<double>(n_classes - 1) / n_classes;

  for (int round = 0; round < params.rounds; ++round) {
    // Per-class residuals at the current scores, fit against a frozen
    // probability snapshot so class tree order does not matter.
    std::vector<std::vector<double>> res(n);
    for (std::size_t i = 0; i < n; ++i) res[i] = residuals(data.labels[i], softmax(scores[i]));

    std::vector<RegressionTree> group;
    group.reserve(n_classes);
    for (int k = 0; k < n_classes; ++k) {
      for (std::size_t i = 0; i < n; ++i) round_data.targets[i] = res[i][k];
      RegressionTree tree = RegressionTree::fit(round_data, params.tree_params);

      // One-step Newton leaf values for the multiclass cross-entropy:
      // gamma = ((K-1)/K) * sum r / sum |r|(1 - |r|) over the leaf.
      std::vector<double> numer(tree.node_count(), 0.0);
      std::vector<double> denom(tree.node_count(), 0.0);
      std::vector<int> leaf_of(n);
      for (std::size_t i = 0; i < n; ++i) {
        const int leaf = tree.leaf_for(data.states[i]);
        leaf_of[i] = leaf;
        const double r = res[i][k];
        numer[leaf] += r;
        denom[leaf] += std::abs(r) * (1.0 - std::abs(r));
      }
      for (int node = 0; node < tree.node_count(); ++node) {
        if (tree.nodes()[node].is_leaf())
          tree.set_leaf_value(node, newton_scale * numer[node] / std::max(denom[node], 1e-10));
      }

      for (std::size_t i = 0; i < n; ++i)
        scores[i][k] += params.shrinkage * tree.nodes()[leaf_of[i]].value;
      group.push_back(std::move(tree));
    }
    model.stages_.push_back(std::move(group));
  }
  return model;
}

std::vector<double> GbmClassifier::raw_scores(const State& state) const {
  std::vector<double> scores(n_actions_, 0.0);
  for (const auto& group : stages_)
    for (int k = 0; k < n_actions_; ++k) scores[k] += shrinkage_ * group[k].predict(state);
  return scores;
}

std::vector<double> GbmClassifier::predict_proba(const State& state) const {
  return softmax(raw_scores(state));
}

Action GbmClassifier::predict_action(const State& state) const {
  const std::vector<double> probs = predict_proba(state);
  return static_cast<Action>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

int GbmClassifier::total_node_count() const {
  int total = 0;
  for (const auto& group : stages_)
    for (const RegressionTree& tree : group) total += tree.node_count();
  return total;
}

std::vector<int> GbmClassifier::per_tree_node_counts() const {
  std::vector<int> counts;
  for (const auto& group : stages_)
    for (const RegressionTree& tree : group) counts.push_back(tree.node_count());
  return counts;
}

void GbmClassifier::save(std::ostream& out) const {
  out << "GBM v1 actions=" << n_actions_ << " rounds=" << rounds()
      << " shrinkage=" << format_double(shrinkage_) << "\n";
  for (const auto& group : stages_)
    for (const RegressionTree& tree : group) tree.save(out);
}

GbmClassifier GbmClassifier::load(std::istream& in) {
  std::string tag, version, actions_field, rounds_field, shrinkage_field;
  if (!(in >> tag >> version >> actions_field >> rounds_field >> shrinkage_field) ||
      tag != "GBM" || version != "v1" || actions_field.rfind("actions=", 0) != 0 ||
      rounds_field.rfind("rounds=", 0) != 0 || shrinkage_field.rfind("shrinkage=", 0) != 0)
    throw IoError("gbm load: bad header");

  GbmClassifier model;
  int n_rounds = 0;
  try {
    model.n_actions_ = std::stoi(actions_field.substr(8));
    n_rounds = std::stoi(rounds_field.substr(7));
  } catch (const std::exception&) {
    throw IoError("gbm load: bad header");
  }
  model.shrinkage_ = parse_double(shrinkage_field.substr(10));
  if (model.n_actions_ < 2 || n_rounds < 0) throw IoError("gbm load: bad header");

  for (int round = 0; round < n_rounds; ++round) {
    std::vector<RegressionTree> group;
    group.reserve(model.n_actions_);
    for (int k = 0; k < model.n_actions_; ++k) group.push_back(RegressionTree::load(in));
    model.stages_.push_back(std::move(group));
  }
  return model;
}

bool GbmClassifier::operator==(const GbmClassifier& other) const {
  return n_actions_ == other.n_actions_ && shrinkage_ == other.shrinkage_ &&
         stages_ == other.stages_;
}

}  // namespace brtrl
