#include "lstm_cctc/proposals.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "lstm_cctc/errors.hpp"

namespace lstm_cctc {
namespace {

// [lo, hi] of a side of `length` cells centred on `center`; for even lengths
// the centre is the lower of the two middle cells.
std::pair<int, int> centred_span(int center, int length) {
  const int lo = center - (length - 1) / 2;
  return {lo, lo + length - 1};
}

int scaled_side(int short_side, int numer, int denom) {
  return static_cast<int>(std::lround(static_cast<double>(short_side) * numer / denom));
}

}  // namespace

std::vector<CriticalPoint> to_critical_points(std::span<const DecodedOrder> decoded, int n) {
  std::vector<CriticalPoint> points;
  std::vector<unsigned> orders_seen;
  for (const DecodedOrder& d : decoded) {
    if (d.log_probs.steps() != n * n || static_cast<int>(d.alignment.path.size()) != n * n) {
      throw DimensionMismatch("decoded sequence length does not match grid size");
    }
    const unsigned bit = 1U << index_of(d.order);
    for (const Run& run : d.alignment.runs) {
      const int frame = (run.start + run.end) / 2;
      const Cell cell = index_to_coord(d.order, frame, n);
      const CriticalPoint candidate{cell.row, cell.col, d.order, run_score(d.log_probs, run)};

      auto merge = std::find_if(points.begin(), points.end(), [&](const CriticalPoint& p) {
        const std::size_t i = static_cast<std::size_t>(&p - points.data());
        return (orders_seen[i] & bit) == 0 &&
               std::max(std::abs(p.row - cell.row), std::abs(p.col - cell.col)) <= 1;
      });
      if (merge == points.end()) {
        points.push_back(candidate);
        orders_seen.push_back(bit);
        continue;
      }
      orders_seen[static_cast<std::size_t>(merge - points.begin())] |= bit;
      if (candidate.score > merge->score) *merge = candidate;
    }
  }
  return points;
}

std::vector<Box> generate_proposals(const CriticalPoint& p, int n) {
  if (p.row < 0 || p.row >= n || p.col < 0 || p.col >= n) {
    throw std::out_of_range("critical point outside grid");
  }
  std::vector<Box> boxes;
  for (const AspectRatio ratio : kAspectRatios) {
    const int short_ratio = std::min(ratio.width, ratio.height);
    for (int short_side = kBaseShortSide;; short_side += kGrowthStep) {
      const int width = scaled_side(short_side, ratio.width, short_ratio);
      const int height = scaled_side(short_side, ratio.height, short_ratio);
      const auto [x0, x1] = centred_span(p.col, width);
      const auto [y0, y1] = centred_span(p.row, height);
      Box box{x0, y0, x1, y1, p.score, Cell{p.row, p.col}};
      if (!box.inside_grid(n)) break;
      boxes.push_back(box);
    }
  }
  return boxes;
}

std::vector<Box> generate_proposals(std::span<const CriticalPoint> points, int n) {
  std::vector<Box> boxes;
  for (const CriticalPoint& p : points) {
    auto more = generate_proposals(p, n);
    boxes.insert(boxes.end(), more.begin(), more.end());
  }
  return boxes;
}

PseudoGroundTruth select_pseudo_ground_truth(std::span<const Box> boxes,
                                             std::span<const double> scores,
                                             double overlap_threshold) {
  if (boxes.empty()) throw ValidationError("boxes", "no candidate boxes");
  if (scores.size() != boxes.size()) {
    throw ValidationError("scores", "expected one score per box");
  }
  if (!(overlap_threshold > 0.0 && overlap_threshold < 1.0)) {
    throw ValidationError("overlap_threshold", "must lie in (0, 1)");
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < boxes.size(); ++i) {
    if (scores[i] > scores[best] ||
        (scores[i] == scores[best] && boxes[i].area() > boxes[best].area())) {
      best = i;
    }
  }
  PseudoGroundTruth out{boxes[best], best, {}};
  for (const Box& b : boxes) {
    if (iou(b, out.pgt) >= overlap_threshold) out.positives.push_back(b);
  }
  return out;
}

}  // namespace lstm_cctc
