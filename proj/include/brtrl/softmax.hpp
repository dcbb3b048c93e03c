#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace brtrl {

// softmax(x)_i = exp(x_i) / sum_j exp(x_j), computed with max subtraction so
// large scores cannot overflow. Output sums to 1 and every entry is in (0,1).
inline std::vector<double> softmax(std::span<const double> scores) {
  if (scores.empty()) throw std::invalid_argument("softmax: empty input");
  const double top = *std::max_element(scores.begin(), scores.end());
  if (!std::isfinite(top)) throw std::invalid_argument("softmax: non-finite input");
  std::vector<double> out(scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - top);
    total += out[i];
  }
  for (double& p : out) p /= total;
  return out;
}

inline std::vector<double> softmax(const std::vector<double>& scores) {
  return softmax(std::span<const double>(scores));
}

}  // namespace brtrl
