#include "lstm_cctc/log_probs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lstm_cctc {

double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

FrameLogProbs log_softmax(const std::vector<std::array<double, 2>>& logits) {
  FrameLogProbs out;
  out.rows.reserve(logits.size());
  for (const auto& z : logits) {
    const double norm = log_sum_exp(z[kBlank], z[kObject]);
    out.rows.push_back({z[kBlank] - norm, z[kObject] - norm});
  }
  return out;
}

FrameLogProbs from_object_probs(const std::vector<double>& p_object) {
  FrameLogProbs out;
  out.rows.reserve(p_object.size());
  for (double p : p_object) out.rows.push_back({std::log1p(-p), std::log(p)});
  return out;
}

}  // namespace lstm_cctc
