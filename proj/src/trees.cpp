#include "brtrl/trees.hpp"

#include "brtrl/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace brtrl {

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& token) {
  double value = 0.0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  const auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc{} || res.ptr != end)
    throw IoError("bad number '" + token + "'");
  return value;
}

namespace {

// Printed with 6 significant digits for human-readable rule listings.
std::string format_sig6(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", value);
  return std::string(buf);
}

struct NodeStats {
  long double weight = 0.0L;
  long double weighted_sum = 0.0L;
  long double weighted_sq = 0.0L;

  void add(double w, double y) {
    weight += w;
    weighted_sum += w * y;
    weighted_sq += w * y * y;
  }
  double mean() const { return static_cast<double>(weighted_sum / weight); }
  long double sse() const {
    const long double s = weighted_sq - weighted_sum * weighted_sum / weight;
    return s > 0.0L ? s : 0.0L;
  }
};

class TreeBuilder {
 public:
  TreeBuilder(const WeightedDataset& data, const TreeParams& params)
      : data_(data), params_(params) {}

  std::vector<RegressionTree::Node> build() {
    std::vector<int> indices(data_.size());
    std::iota(indices.begin(), indices.end(), 0);
    grow(indices, 0);
    return std::move(nodes_);
  }

 private:
  double weight_of(int i) const { return data_.weights.empty() ? 1.0 : data_.weights[i]; }

  int grow(std::vector<int>& indices, int depth) {
    NodeStats stats;
    bool pure = true;
    double first_target = data_.targets[indices.front()];
    for (int i : indices) {
      stats.add(weight_of(i), data_.targets[i]);
      if (data_.targets[i] != first_target) pure = false;
    }
    const double mean = stats.mean();

    const int node_id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();

    const int n = static_cast<int>(indices.size());
    if (depth >= params_.max_depth || n < params_.min_samples_split || pure) {
      nodes_[node_id].value = mean;
      return node_id;
    }

    int best_feature = -1;
    double best_threshold = 0.0;
    long double best_sse = std::numeric_limits<long double>::infinity();
    const int dim = static_cast<int>(data_.states.front().size());

    std::vector<int> sorted = indices;
    for (int f = 0; f < dim; ++f) {
      std::sort(sorted.begin(), sorted.end(), [&](int a, int b) {
        const double xa = data_.states[a][f];
        const double xb = data_.states[b][f];
        return xa != xb ? xa < xb : a < b;
      });
      NodeStats left;
      for (int i = 1; i < n; ++i) {
        const int prev = sorted[i - 1];
        left.add(weight_of(prev), data_.targets[prev]);
        const double lo = data_.states[prev][f];
        const double hi = data_.states[sorted[i]][f];
        if (lo == hi) continue;
        if (i < params_.min_samples_leaf || n - i < params_.min_samples_leaf) continue;
        const long double right_w = stats.weight - left.weight;
        if (left.weight <= 0.0L || right_w <= 0.0L) continue;
        const long double right_sum = stats.weighted_sum - left.weighted_sum;
        const long double right_sq = stats.weighted_sq - left.weighted_sq;
        long double right_sse = right_sq - right_sum * right_sum / right_w;
        if (right_sse < 0.0L) right_sse = 0.0L;
        const long double split_sse = left.sse() + right_sse;
        // Features ascend and thresholds ascend within a feature, so keeping
        // only strict improvements breaks ties toward the lowest feature
        // index, then the lowest threshold.
        if (split_sse < best_sse) {
          best_sse = split_sse;
          best_feature = f;
          double mid = lo + (hi - lo) / 2.0;
          if (mid <= lo) mid = hi;  // adjacent doubles: keep lo strictly left
          best_threshold = mid;
        }
      }
    }

    if (best_feature < 0) {
      nodes_[node_id].value = mean;
      return node_id;
    }

    std::vector<int> left_idx, right_idx;
    left_idx.reserve(indices.size());
    right_idx.reserve(indices.size());
    for (int i : indices) {
      if (data_.states[i][best_feature] < best_threshold)
        left_idx.push_back(i);
      else
        right_idx.push_back(i);
    }

    const int left_id = grow(left_idx, depth + 1);
    const int right_id = grow(right_idx, depth + 1);
    nodes_[node_id].feature = best_feature;
    nodes_[node_id].threshold = best_threshold;
    nodes_[node_id].left = left_id;
    nodes_[node_id].right = right_id;
    return node_id;
  }

  const WeightedDataset& data_;
  const TreeParams& params_;
  std::vector<RegressionTree::Node> nodes_;
};

}  // namespace

RegressionTree RegressionTree::fit(const WeightedDataset& data, const TreeParams& params) {
  if (data.states.empty()) throw std::invalid_argument("fit_tree: empty dataset");
  if (data.targets.size() != data.states.size())
    throw std::invalid_argument("fit_tree: states/targets length mismatch");
  if (!data.weights.empty() && data.weights.size() != data.states.size())
    throw std::invalid_argument("fit_tree: states/weights length mismatch");
  if (params.max_depth < 1 || params.min_samples_leaf < 1 || params.min_samples_split < 2)
    throw std::invalid_argument("fit_tree: invalid TreeParams");
  const std::size_t dim = data.states.front().size();
  for (const State& s : data.states)
    if (s.size() != dim) throw std::invalid_argument("fit_tree: ragged state dimensions");
  if (!data.weights.empty()) {
    bool any_positive = false;
    for (double w : data.weights) {
      if (w < 0.0) throw std::invalid_argument("fit_tree: negative weight");
      if (w > 0.0) any_positive = true;
    }
    if (!any_positive) throw std::invalid_argument("fit_tree: all weights zero");
  }

  RegressionTree tree;
  tree.nodes_ = TreeBuilder(data, params).build();
  tree.min_dim_ = static_cast<int>(dim);
  return tree;
}

RegressionTree RegressionTree::leaf(double value) {
  RegressionTree tree;
  tree.nodes_.push_back(Node{});
  tree.nodes_.back().value = value;
  tree.min_dim_ = 0;
  return tree;
}

int RegressionTree::descend(std::span<const double> state) const {
  if (static_cast<int>(state.size()) < min_dim_)
    throw std::invalid_argument("tree predict: state dimension mismatch");
  int id = 0;
  while (!nodes_[id].is_leaf()) {
    const Node& node = nodes_[id];
    id = state[node.feature] < node.threshold ? node.left : node.right;
  }
  return id;
}

double RegressionTree::predict(std::span<const double> state) const {
  return nodes_[descend(state)].value;
}

int RegressionTree::leaf_for(std::span<const double> state) const { return descend(state); }

void RegressionTree::set_leaf_value(int node_id, double value) {
  if (node_id < 0 || node_id >= node_count() || !nodes_[node_id].is_leaf())
    throw std::invalid_argument("set_leaf_value: not a leaf");
  nodes_[node_id].value = value;
}

int RegressionTree::depth() const {
  // Arena is pre-order, so a simple stack walk suffices.
  int max_depth = 0;
  std::vector<std::pair<int, int>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [id, d] = stack.back();
    stack.pop_back();
    max_depth = std::max(max_depth, d);
    if (!nodes_[id].is_leaf()) {
      stack.push_back({nodes_[id].left, d + 1});
      stack.push_back({nodes_[id].right, d + 1});
    }
  }
  return max_depth;
}

std::string RegressionTree::export_rules(const std::vector<std::string>& feature_names) const {
  if (min_dim_ > static_cast<int>(feature_names.size()))
    throw std::invalid_argument("export_rules: feature name count mismatch");
  std::string out;
  std::vector<std::tuple<int, int, bool>> stack{{0, 0, false}};  // id, indent, else-line
  while (!stack.empty()) {
    auto [id, indent, emit_else] = stack.back();
    stack.pop_back();
    const std::string pad(2 * static_cast<std::size_t>(indent), ' ');
    if (emit_else) {
      out += pad + "else\n";
      continue;
    }
    const Node& node = nodes_[id];
    if (node.is_leaf()) {
      out += pad + "leaf: " + format_sig6(node.value) + "\n";
    } else {
      out += pad + "if " + feature_names[node.feature] + " < " + format_sig6(node.threshold) +
             "\n";
      // Reverse push order: left subtree, then "else", then right subtree.
      stack.push_back({node.right, indent + 1, false});
      stack.push_back({id, indent, true});
      stack.push_back({node.left, indent + 1, false});
    }
  }
  return out;
}

void RegressionTree::save(std::ostream& out) const {
  out << "TREE n=" << node_count() << "\n";
  // Pre-order emission; the arena is already in pre-order.
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    const Node& node = nodes_[id];
    if (node.is_leaf()) {
      out << "L " << format_double(node.value) << "\n";
    } else {
      out << "I " << node.feature << " " << format_double(node.threshold) << "\n";
      stack.push_back(node.right);
      stack.push_back(node.left);
    }
  }
}

namespace {

int load_node(std::istream& in, std::vector<RegressionTree::Node>& nodes, int& max_feature,
              int expected_total) {
  if (static_cast<int>(nodes.size()) >= expected_total)
    throw IoError("tree load: node count mismatch");
  std::string tag;
  if (!(in >> tag)) throw IoError("tree load: truncated stream");
  const int id = static_cast<int>(nodes.size());
  nodes.emplace_back();
  if (tag == "L") {
    std::string value;
    if (!(in >> value)) throw IoError("tree load: truncated leaf");
    nodes[id].value = parse_double(value);
    return id;
  }
  if (tag != "I") throw IoError("tree load: bad node tag '" + tag + "'");
  int feature = -1;
  std::string threshold;
  if (!(in >> feature >> threshold)) throw IoError("tree load: truncated split");
  if (feature < 0) throw IoError("tree load: negative feature index");
  max_feature = std::max(max_feature, feature);
  nodes[id].feature = feature;
  nodes[id].threshold = parse_double(threshold);
  nodes[id].left = load_node(in, nodes, max_feature, expected_total);
  nodes[id].right = load_node(in, nodes, max_feature, expected_total);
  return id;
}

}  // namespace

RegressionTree RegressionTree::load(std::istream& in) {
  std::string tag, count_field;
  if (!(in >> tag >> count_field) || tag != "TREE" || count_field.rfind("n=", 0) != 0)
    throw IoError("tree load: missing TREE header");
  int expected = 0;
  try {
    expected = std::stoi(count_field.substr(2));
  } catch (const std::exception&) {
    throw IoError("tree load: bad node count");
  }
  if (expected < 1) throw IoError("tree load: bad node count");

  RegressionTree tree;
  int max_feature = -1;
  load_node(in, tree.nodes_, max_feature, expected);
  if (tree.node_count() != expected) throw IoError("tree load: node count mismatch");
  tree.min_dim_ = max_feature + 1;
  return tree;
}

bool RegressionTree::operator==(const RegressionTree& other) const {
  if (nodes_.size() != other.nodes_.size()) return false;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& a = nodes_[i];
    const Node& b = other.nodes_[i];
    if (a.feature != b.feature || a.left != b.left || a.right != b.right) return false;
    if (a.is_leaf() ? (a.value != b.value) : (a.threshold != b.threshold)) return false;
  }
  return true;
}

}  // namespace brtrl
