#include "brtrl/teacher.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "brtrl/errors.hpp"
#include "brtrl/rng.hpp"
#include "brtrl/trees.hpp"  // format_double / parse_double

namespace brtrl {

// ---------------------------------------------------------------------------
// TileCoding
// ---------------------------------------------------------------------------

TileCoding::TileCoding(int n_tilings, std::vector<int> tiles_per_dim, std::vector<double> lows,
                       std::vector<double> highs)
    : n_tilings_(n_tilings),
      tiles_per_dim_(std::move(tiles_per_dim)),
      lows_(std::move(lows)),
      highs_(std::move(highs)) {
  if (n_tilings_ < 1) throw std::invalid_argument("TileCoding: n_tilings must be >= 1");
  if (tiles_per_dim_.empty() || tiles_per_dim_.size() != lows_.size() ||
      lows_.size() != highs_.size()) {
    throw std::invalid_argument("TileCoding: tiles/lows/highs must agree on dimension");
  }
  widths_.resize(tiles_per_dim_.size());
  tiles_per_tiling_ = 1;
  for (std::size_t d = 0; d < tiles_per_dim_.size(); ++d) {
    if (tiles_per_dim_[d] < 1) throw std::invalid_argument("TileCoding: tiles_per_dim must be >= 1");
    if (!(lows_[d] < highs_[d])) throw std::invalid_argument("TileCoding: need low < high");
    widths_[d] = (highs_[d] - lows_[d]) / tiles_per_dim_[d];
    tiles_per_tiling_ *= tiles_per_dim_[d] + 1;  // one spill cell for shifted tilings
  }
  offset_fracs_.resize(n_tilings_);
  for (int t = 0; t < n_tilings_; ++t) {
    offset_fracs_[t].resize(tiles_per_dim_.size());
    for (std::size_t d = 0; d < tiles_per_dim_.size(); ++d) {
      // t/n_tilings of a tile width, staggered by odd multipliers per dim;
      // integer modulus keeps the fraction exact.
      const long long numer = static_cast<long long>(t) * (2 * static_cast<long long>(d) + 1);
      offset_fracs_[t][d] =
          static_cast<double>(numer % n_tilings_) / static_cast<double>(n_tilings_);
    }
  }
}

std::vector<int> TileCoding::encode(const State& state) const {
  if (state.size() != tiles_per_dim_.size()) {
    throw std::invalid_argument("TileCoding::encode: state dimension mismatch");
  }
  std::vector<int> active(n_tilings_);
  for (int t = 0; t < n_tilings_; ++t) {
    int index = 0;
    for (std::size_t d = 0; d < tiles_per_dim_.size(); ++d) {
      const double x = std::clamp(state[d], lows_[d], highs_[d]);
      const double u = (x - lows_[d]) / widths_[d] + offset_fracs_[t][d];
      int cell = static_cast<int>(std::floor(u));
      cell = std::clamp(cell, 0, tiles_per_dim_[d]);  // guard float fringe
      index = index * (tiles_per_dim_[d] + 1) + cell;
    }
    active[t] = t * tiles_per_tiling_ + index;
  }
  return active;
}

bool TileCoding::operator==(const TileCoding& other) const {
  return n_tilings_ == other.n_tilings_ && tiles_per_dim_ == other.tiles_per_dim_ &&
         lows_ == other.lows_ && highs_ == other.highs_;
}

// ---------------------------------------------------------------------------
// QFunction
// ---------------------------------------------------------------------------

QFunction::QFunction(int total_tiles, int n_actions) : n_actions_(n_actions) {
  if (total_tiles < 1) throw std::invalid_argument("QFunction: total_tiles must be >= 1");
  if (n_actions < 2) throw std::invalid_argument("QFunction: need at least 2 actions");
  weights_.assign(static_cast<std::size_t>(total_tiles) * n_actions, 0.0);
}

double QFunction::q_value(std::span<const int> active, Action action) const {
  if (action < 0 || action >= n_actions_) throw std::invalid_argument("QFunction: bad action");
  double sum = 0.0;
  for (int tile : active) sum += weights_[static_cast<std::size_t>(tile) * n_actions_ + action];
  return sum;
}

void QFunction::bump(std::span<const int> active, Action action, double amount) {
  if (action < 0 || action >= n_actions_) throw std::invalid_argument("QFunction: bad action");
  for (int tile : active) weights_[static_cast<std::size_t>(tile) * n_actions_ + action] += amount;
}

bool QFunction::operator==(const QFunction& other) const {
  return n_actions_ == other.n_actions_ && weights_ == other.weights_;
}

// ---------------------------------------------------------------------------
// SARSA
// ---------------------------------------------------------------------------

double q_value(const QFunction& q, const TileCoding& tc, const State& state, Action action) {
  return q.q_value(tc.encode(state), action);
}

Action greedy_action(const QFunction& q, const TileCoding& tc, const State& state) {
  const std::vector<int> active = tc.encode(state);
  Action best = 0;
  double best_q = q.q_value(active, 0);
  for (Action a = 1; a < q.n_actions(); ++a) {
    const double qa = q.q_value(active, a);
    if (qa > best_q) {
      best_q = qa;
      best = a;
    }
  }
  return best;
}

double sarsa_step_update(QFunction& q, const TileCoding& tc, const State& state, Action action,
                         double reward, const State* next_state, Action next_action,
                         double alpha, double gamma) {
  const std::vector<int> active = tc.encode(state);
  double delta = reward - q.q_value(active, action);
  if (next_state != nullptr) {
    delta += gamma * q_value(q, tc, *next_state, next_action);
  }
  q.bump(active, action, alpha / tc.n_tilings() * delta);
  return delta;
}

Action epsilon_greedy(const QFunction& q, const TileCoding& tc, const State& state,
                      double epsilon, std::mt19937_64& rng) {
  // Explore coin first, action draw only when exploring: keeps the stream
  // layout stable whichever branch is taken.
  if (uniform_unit(rng) < epsilon) return uniform_index(rng, q.n_actions());
  return greedy_action(q, tc, state);
}

SarsaResult sarsa_train(Environment& env, TileCoding coding, const SarsaParams& params,
                        std::uint64_t seed) {
  if (params.episodes < 1) throw std::invalid_argument("sarsa_train: episodes must be >= 1");
  if (params.max_steps < 1) throw std::invalid_argument("sarsa_train: max_steps must be >= 1");
  QFunction q(coding.total_tiles(), env.action_count());
  std::vector<double> curve;
  curve.reserve(params.episodes);

  const int denom = std::max(params.episodes - 1, 1);
  for (int episode = 0; episode < params.episodes; ++episode) {
    const double epsilon =
        params.epsilon_start +
        (params.epsilon_end - params.epsilon_start) * (static_cast<double>(episode) / denom);
    std::mt19937_64 rng = derive_stream(seed, static_cast<std::uint64_t>(episode));
    State state = env.reset(rng);
    Action action = epsilon_greedy(q, coding, state, epsilon, rng);
    double total_reward = 0.0;
    for (int step = 0; step < params.max_steps; ++step) {
      const StepOutcome outcome = env.step(action);
      total_reward += outcome.reward;
      if (outcome.done) {
        sarsa_step_update(q, coding, state, action, outcome.reward, nullptr, 0, params.alpha,
                          params.gamma);
        break;
      }
      const Action next_action = epsilon_greedy(q, coding, outcome.next_state, epsilon, rng);
      sarsa_step_update(q, coding, state, action, outcome.reward, &outcome.next_state,
                        next_action, params.alpha, params.gamma);
      state = outcome.next_state;
      action = next_action;
    }
    curve.push_back(total_reward);
  }
  return {SarsaTeacher{std::move(coding), std::move(q)}, std::move(curve)};
}

std::function<Action(const State&)> greedy_policy(const SarsaTeacher& teacher) {
  return [&teacher](const State& state) { return greedy_action(teacher.q, teacher.coding, state); };
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

void SarsaTeacher::save(std::ostream& out) const {
  out << "SARSA v1 actions=" << q.n_actions() << " tilings=" << coding.n_tilings()
      << " dims=" << coding.dims() << "\n";
  out << "tiles";
  for (int t : coding.tiles_per_dim()) out << ' ' << t;
  out << "\nlow";
  for (double v : coding.lows()) out << ' ' << format_double(v);
  out << "\nhigh";
  for (double v : coding.highs()) out << ' ' << format_double(v);
  out << "\nweights " << q.weights().size() << "\n";
  for (double w : q.weights()) out << format_double(w) << "\n";
}

namespace {

std::istringstream expect_row(std::istream& in, const std::string& label) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("SARSA load: missing '" + label + "' row");
  std::istringstream row(line);
  std::string head;
  row >> head;
  if (head != label) throw IoError("SARSA load: expected '" + label + "', got '" + head + "'");
  return row;
}

long long parse_header_int(const std::string& token, const char* key) {
  const std::string prefix = std::string(key) + "=";
  if (token.rfind(prefix, 0) != 0) {
    throw IoError("SARSA load: expected '" + prefix + "...', got '" + token + "'");
  }
  try {
    return std::stoll(token.substr(prefix.size()));
  } catch (const std::exception&) {
    throw IoError("SARSA load: bad integer in '" + token + "'");
  }
}

}  // namespace

SarsaTeacher SarsaTeacher::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("SARSA load: missing header");
  std::istringstream header(line);
  std::string magic, version, actions_tok, tilings_tok, dims_tok;
  header >> magic >> version >> actions_tok >> tilings_tok >> dims_tok;
  if (magic != "SARSA" || version != "v1") throw IoError("SARSA load: bad header '" + line + "'");
  const int n_actions = static_cast<int>(parse_header_int(actions_tok, "actions"));
  const int n_tilings = static_cast<int>(parse_header_int(tilings_tok, "tilings"));
  const int dims = static_cast<int>(parse_header_int(dims_tok, "dims"));
  if (dims < 1) throw IoError("SARSA load: bad dimension count");

  std::istringstream tiles_row = expect_row(in, "tiles");
  std::vector<int> tiles(dims);
  for (int& t : tiles) {
    if (!(tiles_row >> t)) throw IoError("SARSA load: short tiles row");
  }
  std::istringstream low_row = expect_row(in, "low");
  std::istringstream high_row = expect_row(in, "high");
  std::vector<double> lows(dims), highs(dims);
  std::string token;
  for (double& v : lows) {
    if (!(low_row >> token)) throw IoError("SARSA load: short low row");
    v = parse_double(token);
  }
  for (double& v : highs) {
    if (!(high_row >> token)) throw IoError("SARSA load: short high row");
    v = parse_double(token);
  }

  TileCoding coding(n_tilings, std::move(tiles), std::move(lows), std::move(highs));
  std::istringstream weights_row = expect_row(in, "weights");
  std::size_t n_weights = 0;
  if (!(weights_row >> n_weights)) throw IoError("SARSA load: bad weight count");
  if (n_weights != static_cast<std::size_t>(coding.total_tiles()) * n_actions) {
    throw IoError("SARSA load: weight count does not match tiling config");
  }
  QFunction q(coding.total_tiles(), n_actions);
  for (std::size_t i = 0; i < n_weights; ++i) {
    if (!std::getline(in, line)) throw IoError("SARSA load: short weight list");
    q.weights()[i] = parse_double(line);
  }
  return SarsaTeacher{std::move(coding), std::move(q)};
}

bool SarsaTeacher::operator==(const SarsaTeacher& other) const {
  return coding == other.coding && q == other.q;
}

// ---------------------------------------------------------------------------
// Per-environment defaults
// ---------------------------------------------------------------------------

TileCoding default_tile_coding(const std::string& env_id, int n_tilings, int tiles_per_dim) {
  if (env_id == "cartpole") {
    return TileCoding(n_tilings, std::vector<int>(4, tiles_per_dim),
                      {-2.4, -3.0, -0.2094395102393195, -3.5},
                      {2.4, 3.0, 0.2094395102393195, 3.5});
  }
  if (env_id == "mountaincar") {
    return TileCoding(n_tilings, std::vector<int>(2, tiles_per_dim), {-1.2, -0.07}, {0.6, 0.07});
  }
  throw std::invalid_argument("default_tile_coding: unknown environment '" + env_id + "'");
}

}  // namespace brtrl
