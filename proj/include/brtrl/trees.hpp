#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace brtrl {

using State = std::vector<double>;

struct TreeParams {
  int max_depth = 3;
  int min_samples_leaf = 1;
  int min_samples_split = 2;
};

// Regression training set. Weights are optional; empty means all ones.
struct WeightedDataset {
  std::vector<State> states;
  std::vector<double> targets;
  std::vector<double> weights;

  std::size_t size() const { return states.size(); }
};

// Binary axis-aligned regression tree with scalar leaf values, fit by greedy
// least-squares split search. Nodes live in an arena in pre-order; immutable
// after fitting apart from explicit leaf-value rewrites (used by boosting's
// Newton step).
class RegressionTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;

    bool is_leaf() const { return feature < 0; }
  };

  RegressionTree() = default;

  static RegressionTree fit(const WeightedDataset& data, const TreeParams& params);

  // Single-leaf tree with a fixed value, accepting states of any dimension.
  static RegressionTree leaf(double value);

  // Descent rule: go left when state[feature] < threshold, right otherwise.
  double predict(std::span<const double> state) const;
  double predict(const State& state) const { return predict(std::span<const double>(state)); }

  // Arena id of the leaf a state lands in.
  int leaf_for(std::span<const double> state) const;
  void set_leaf_value(int node_id, double value);

  int node_count() const { return static_cast<int>(nodes_.size()); }
  int depth() const;
  const std::vector<Node>& nodes() const { return nodes_; }

  // Indented if/else listing, one line per node plus "else" separators.
  std::string export_rules(const std::vector<std::string>& feature_names) const;

  // Line-oriented block: "TREE n=<count>" then one node per line in
  // pre-order, "I <feature> <threshold>" or "L <value>", numbers printed as
  // shortest round-trippable decimals. Round-trips bit-exactly.
  void save(std::ostream& out) const;
  static RegressionTree load(std::istream& in);

  bool operator==(const RegressionTree& other) const;

 private:
  int descend(std::span<const double> state) const;

  std::vector<Node> nodes_;
  // Minimum state dimension this tree can consume. Set to the training
  // dimension by fit(); reconstructed as max split feature + 1 on load.
  int min_dim_ = 0;
};

inline RegressionTree fit_tree(const WeightedDataset& data, const TreeParams& params) {
  return RegressionTree::fit(data, params);
}

inline int node_count(const RegressionTree& tree) { return tree.node_count(); }

// Shortest decimal form that parses back to exactly the same double.
std::string format_double(double value);

// Strict full-token parse; throws IoError on malformed tokens.
double parse_double(const std::string& token);

}  // namespace brtrl
