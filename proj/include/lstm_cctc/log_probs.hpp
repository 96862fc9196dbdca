#pragma once

#include <array>
#include <vector>

namespace lstm_cctc {

inline constexpr int kBlank = 0;
inline constexpr int kObject = 1;

// Per-frame log-probabilities over {blank, object}.
struct FrameLogProbs {
  std::vector<std::array<double, 2>> rows;

  int steps() const { return static_cast<int>(rows.size()); }
  double blank(int t) const { return rows[t][kBlank]; }
  double object(int t) const { return rows[t][kObject]; }
};

// Gradient of a scalar loss with respect to per-frame (blank, object) logits.
using LogitGrads = std::vector<std::array<double, 2>>;

double log_sum_exp(double a, double b);

// Row-wise log-softmax of (blank, object) logits.
FrameLogProbs log_softmax(const std::vector<std::array<double, 2>>& logits);

// Builds log-probabilities from per-frame object probabilities.
FrameLogProbs from_object_probs(const std::vector<double>& p_object);

}  // namespace lstm_cctc
