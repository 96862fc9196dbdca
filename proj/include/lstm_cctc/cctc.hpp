#pragma once

#include <vector>

#include "json.hpp"
#include "lstm_cctc/log_probs.hpp"

namespace lstm_cctc {

// Blank-interleaved label for a count c: blank, object, blank, ..., blank.
// All labels are the same symbol, so the state graph is a chain: a path may
// stay in a state or advance by one, never skip a blank.
class ExtendedLabel {
 public:
  explicit ExtendedLabel(int count);
  int count() const { return count_; }
  int size() const { return 2 * count_ + 1; }
  static bool is_blank(int state) { return state % 2 == 0; }
  int symbol(int state) const { return is_blank(state) ? kBlank : kObject; }

 private:
  int count_;
};

// Minimum sequence length that can carry `count` objects.
int min_steps_for_count(int count);
bool is_feasible(int steps, int count);

// Log-space forward/backward variables. alpha[t][s] includes the emission at
// t; beta[t][s] covers only frames after t, so alpha + beta is the joint
// log-probability of all valid paths through (t, s).
struct AlphaBetaTables {
  int steps = 0;
  int states = 0;
  std::vector<double> alpha;
  std::vector<double> beta;
  double log_likelihood = 0.0;

  double a(int t, int s) const { return alpha[static_cast<std::size_t>(t) * states + s]; }
  double b(int t, int s) const { return beta[static_cast<std::size_t>(t) * states + s]; }
};

AlphaBetaTables forward_backward(const FrameLogProbs& log_probs, int count);

struct LossResult {
  double loss = 0.0;  // -log p(count | frames)
  LogitGrads d_logits;
};

LossResult cctc_loss(const FrameLogProbs& log_probs, int count);

// Exhaustive enumeration of all 2^T paths. Independent reference for cctc_loss.
double brute_force_log_likelihood(const FrameLogProbs& log_probs, int count);

struct Run {
  int start = 0;
  int end = 0;  // inclusive
  friend bool operator==(const Run&, const Run&) = default;
};

struct Alignment {
  std::vector<int> path;  // kBlank / kObject per frame
  std::vector<Run> runs;  // maximal object runs
};

Alignment make_alignment(std::vector<int> path);
int collapsed_count(const std::vector<int>& path);
double path_log_prob(const FrameLogProbs& log_probs, const std::vector<int>& path);

struct BestPath {
  int count = 0;
  Alignment alignment;
};

// Frame-wise argmax; ties go to blank.
BestPath decode_best_path(const FrameLogProbs& log_probs);

// Most probable path collapsing to exactly `count` objects.
Alignment decode_constrained(const FrameLogProbs& log_probs, int count);

// Midpoint frame of every run, floor((start + end) / 2).
std::vector<int> runs_to_frames(const Alignment& alignment);

// Mean object log-probability over a run's frames.
double run_score(const FrameLogProbs& log_probs, const Run& run);

}  // namespace lstm_cctc
