#pragma once

#include <span>
#include <vector>

#include "lstm_cctc/box.hpp"
#include "lstm_cctc/cctc.hpp"
#include "lstm_cctc/grid.hpp"

namespace lstm_cctc {

struct CriticalPoint {
  int row = 0;
  int col = 0;
  ScanOrder order = ScanOrder::RowMajorForward;
  double score = 0.0;  // mean object log-probability over the run
};

// Decoding result for one scan order of one grid.
struct DecodedOrder {
  ScanOrder order = ScanOrder::RowMajorForward;
  Alignment alignment;
  FrameLogProbs log_probs;
};

// Run midpoints mapped back to grid cells. A point lying within Chebyshev
// distance 1 of a point already found by a different order is merged into
// it; the merged point keeps the location and order of the higher score.
std::vector<CriticalPoint> to_critical_points(std::span<const DecodedOrder> decoded, int n);

// Width:height ratios used to seed proposals.
struct AspectRatio {
  int width;
  int height;
};
inline constexpr std::array<AspectRatio, 5> kAspectRatios = {
    AspectRatio{1, 1}, AspectRatio{2, 1}, AspectRatio{1, 2}, AspectRatio{1, 3}, AspectRatio{3, 1}};

inline constexpr int kBaseShortSide = 2;
inline constexpr int kGrowthStep = 2;

// Nested boxes around p for every aspect ratio, grown from a short side of 2
// by 2 cells at a time until the next box would leave the grid.
std::vector<Box> generate_proposals(const CriticalPoint& p, int n);

std::vector<Box> generate_proposals(std::span<const CriticalPoint> points, int n);

struct PseudoGroundTruth {
  Box pgt;
  std::size_t index = 0;
  std::vector<Box> positives;
};

// Highest-scoring box (ties: larger area, then first index) plus every box
// overlapping it with IoU >= overlap_threshold.
PseudoGroundTruth select_pseudo_ground_truth(std::span<const Box> boxes,
                                             std::span<const double> scores,
                                             double overlap_threshold);

}  // namespace lstm_cctc
