#include "lstm_cctc/cctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lstm_cctc/errors.hpp"

namespace lstm_cctc {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kNormTolerance = 1e-6;
constexpr int kMaxBruteForceSteps = 16;

void check_distribution(const FrameLogProbs& log_probs) {
  for (int t = 0; t < log_probs.steps(); ++t) {
    const double norm = log_sum_exp(log_probs.blank(t), log_probs.object(t));
    if (!(std::abs(norm) <= kNormTolerance)) {
      throw NonDistribution("frame " + std::to_string(t) + " log-probabilities sum to exp(" +
                            std::to_string(norm) + ")");
    }
  }
}

void check_feasible(int steps, int count) {
  if (count < 0) throw InfeasibleCount("count must be non-negative");
  if (!is_feasible(steps, count)) {
    throw InfeasibleCount("count " + std::to_string(count) + " needs at least " +
                          std::to_string(min_steps_for_count(count)) + " frames, got " +
                          std::to_string(steps));
  }
}

}  // namespace

ExtendedLabel::ExtendedLabel(int count) : count_(count) {
  if (count < 0) throw InfeasibleCount("count must be non-negative");
}

int min_steps_for_count(int count) { return count == 0 ? 0 : 2 * count - 1; }

bool is_feasible(int steps, int count) {
  return count >= 0 && steps >= min_steps_for_count(count);
}

AlphaBetaTables forward_backward(const FrameLogProbs& log_probs, int count) {
  check_distribution(log_probs);
  const int steps = log_probs.steps();
  if (steps < 1) throw InfeasibleCount("empty frame sequence");
  check_feasible(steps, count);

  const ExtendedLabel label(count);
  AlphaBetaTables tab;
  tab.steps = steps;
  tab.states = label.size();
  const int states = tab.states;
  tab.alpha.assign(static_cast<std::size_t>(steps) * states, kNegInf);
  tab.beta.assign(static_cast<std::size_t>(steps) * states, kNegInf);
  auto alpha = [&](int t, int s) -> double& { return tab.alpha[static_cast<std::size_t>(t) * states + s]; };
  auto beta = [&](int t, int s) -> double& { return tab.beta[static_cast<std::size_t>(t) * states + s]; };
  auto emit = [&](int t, int s) { return log_probs.rows[t][label.symbol(s)]; };

  alpha(0, 0) = emit(0, 0);
  if (states > 1) alpha(0, 1) = emit(0, 1);
  for (int t = 1; t < steps; ++t) {
    for (int s = 0; s < states; ++s) {
      double acc = alpha(t - 1, s);
      if (s > 0) acc = log_sum_exp(acc, alpha(t - 1, s - 1));
      if (acc != kNegInf) alpha(t, s) = acc + emit(t, s);
    }
  }

  beta(steps - 1, states - 1) = 0.0;
  if (states > 1) beta(steps - 1, states - 2) = 0.0;
  for (int t = steps - 2; t >= 0; --t) {
    for (int s = 0; s < states; ++s) {
      double acc = beta(t + 1, s) + emit(t + 1, s);
      if (s + 1 < states) acc = log_sum_exp(acc, beta(t + 1, s + 1) + emit(t + 1, s + 1));
      beta(t, s) = acc;
    }
  }

  double total = alpha(steps - 1, states - 1);
  if (states > 1) total = log_sum_exp(total, alpha(steps - 1, states - 2));
  tab.log_likelihood = total;
  return tab;
}

LossResult cctc_loss(const FrameLogProbs& log_probs, int count) {
  const AlphaBetaTables tab = forward_backward(log_probs, count);
  const int steps = tab.steps;
  LossResult result;
  result.loss = -tab.log_likelihood;
  result.d_logits.resize(static_cast<std::size_t>(steps));
  for (int t = 0; t < steps; ++t) {
    std::array<double, 2> occupancy = {kNegInf, kNegInf};
    for (int s = 0; s < tab.states; ++s) {
      const int sym = ExtendedLabel::is_blank(s) ? kBlank : kObject;
      occupancy[sym] = log_sum_exp(occupancy[sym], tab.a(t, s) + tab.b(t, s));
    }
    for (int k = 0; k < 2; ++k) {
      const double posterior = std::exp(occupancy[k] - tab.log_likelihood);
      result.d_logits[t][k] = std::exp(log_probs.rows[t][k]) - posterior;
    }
  }
  return result;
}

double brute_force_log_likelihood(const FrameLogProbs& log_probs, int count) {
  const int steps = log_probs.steps();
  if (steps > kMaxBruteForceSteps) {
    throw std::invalid_argument("brute force limited to " + std::to_string(kMaxBruteForceSteps) +
                                " frames");
  }
  double total = kNegInf;
  std::vector<int> path(static_cast<std::size_t>(steps));
  for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << steps); ++bits) {
    for (int t = 0; t < steps; ++t) path[t] = static_cast<int>((bits >> t) & 1U);
    if (collapsed_count(path) != count) continue;
    total = log_sum_exp(total, path_log_prob(log_probs, path));
  }
  return total;
}

Alignment make_alignment(std::vector<int> path) {
  Alignment a;
  a.path = std::move(path);
  const int steps = static_cast<int>(a.path.size());
  for (int t = 0; t < steps; ++t) {
    if (a.path[t] != kObject) continue;
    if (t > 0 && a.path[t - 1] == kObject) {
      a.runs.back().end = t;
    } else {
      a.runs.push_back({t, t});
    }
  }
  return a;
}

int collapsed_count(const std::vector<int>& path) {
  int count = 0;
  int prev = kBlank;
  for (int sym : path) {
    if (sym == kObject && prev != kObject) ++count;
    prev = sym;
  }
  return count;
}

double path_log_prob(const FrameLogProbs& log_probs, const std::vector<int>& path) {
  double total = 0.0;
  for (std::size_t t = 0; t < path.size(); ++t) total += log_probs.rows[t][path[t]];
  return total;
}

BestPath decode_best_path(const FrameLogProbs& log_probs) {
  std::vector<int> path(log_probs.rows.size());
  for (int t = 0; t < log_probs.steps(); ++t) {
    path[t] = log_probs.object(t) > log_probs.blank(t) ? kObject : kBlank;
  }
  BestPath best;
  best.alignment = make_alignment(std::move(path));
  best.count = static_cast<int>(best.alignment.runs.size());
  return best;
}

Alignment decode_constrained(const FrameLogProbs& log_probs, int count) {
  const int steps = log_probs.steps();
  if (steps < 1) throw InfeasibleCount("empty frame sequence");
  check_feasible(steps, count);
  const ExtendedLabel label(count);
  const int states = label.size();

  // score[t][s]: best log-probability of a prefix ending in state s at t.
  // from_prev[t][s]: true when that prefix arrived from s - 1.
  std::vector<double> score(static_cast<std::size_t>(steps) * states, kNegInf);
  std::vector<char> from_prev(score.size(), 0);
  auto at = [states](int t, int s) { return static_cast<std::size_t>(t) * states + s; };

  score[at(0, 0)] = log_probs.rows[0][label.symbol(0)];
  if (states > 1) {
    score[at(0, 1)] = log_probs.rows[0][label.symbol(1)];
    from_prev[at(0, 1)] = 1;
  }
  for (int t = 1; t < steps; ++t) {
    for (int s = 0; s < states; ++s) {
      const double stay = score[at(t - 1, s)];
      const double advance = s > 0 ? score[at(t - 1, s - 1)] : kNegInf;
      // Equal scores prefer the predecessor with the smaller state index.
      const bool take_advance = s > 0 && advance >= stay;
      const double best = take_advance ? advance : stay;
      if (best == kNegInf) continue;
      score[at(t, s)] = best + log_probs.rows[t][label.symbol(s)];
      from_prev[at(t, s)] = take_advance ? 1 : 0;
    }
  }

  int state = states - 1;
  if (states > 1 && score[at(steps - 1, states - 2)] >= score[at(steps - 1, states - 1)]) {
    state = states - 2;
  }
  std::vector<int> path(static_cast<std::size_t>(steps));
  for (int t = steps - 1; t >= 0; --t) {
    path[t] = label.symbol(state);
    if (t > 0 && from_prev[at(t, state)]) --state;
  }
  return make_alignment(std::move(path));
}

std::vector<int> runs_to_frames(const Alignment& alignment) {
  std::vector<int> frames;
  frames.reserve(alignment.runs.size());
  for (const Run& run : alignment.runs) frames.push_back((run.start + run.end) / 2);
  return frames;
}

double run_score(const FrameLogProbs& log_probs, const Run& run) {
  double total = 0.0;
  for (int t = run.start; t <= run.end; ++t) total += log_probs.object(t);
  return total / static_cast<double>(run.end - run.start + 1);
}

}  // namespace lstm_cctc
