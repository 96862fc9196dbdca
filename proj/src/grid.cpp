#include "lstm_cctc/grid.hpp"

#include <cmath>
#include <string>

#include "lstm_cctc/errors.hpp"

namespace lstm_cctc {

std::string_view to_string(ScanOrder order) {
  switch (order) {
    case ScanOrder::RowMajorForward: return "row_major_forward";
    case ScanOrder::RowMajorReverse: return "row_major_reverse";
    case ScanOrder::ColMajorForward: return "col_major_forward";
    case ScanOrder::ColMajorReverse: return "col_major_reverse";
  }
  return "unknown";
}

ScanOrder parse_scan_order(std::string_view name) {
  for (ScanOrder order : kAllScanOrders) {
    if (to_string(order) == name) return order;
  }
  throw ValidationError("order", "unknown scan order '" + std::string(name) + "'");
}

FeatureGrid::FeatureGrid(int n, int k, std::vector<double> values)
    : n_(n), k_(k), values_(std::move(values)) {
  if (n < 2) throw ValidationError("n", "grid side must be at least 2");
  if (k < 1) throw ValidationError("k", "channel count must be at least 1");
  const auto expected = static_cast<std::size_t>(n) * n * k;
  if (values_.size() != expected) {
    throw ValidationError("values", "expected " + std::to_string(expected) +
                                        " values, got " + std::to_string(values_.size()));
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw ValidationError("values", "non-finite grid value");
  }
}

FeatureGrid FeatureGrid::zeros(int n, int k) {
  const auto size = static_cast<std::size_t>(std::max(n, 0)) * std::max(n, 0) * std::max(k, 0);
  return FeatureGrid(n, k, std::vector<double>(size, 0.0));
}

Cell index_to_coord(ScanOrder order, int t, int n) {
  const int total = n * n;
  if (n < 1 || t < 0 || t >= total) {
    throw std::out_of_range("timestep " + std::to_string(t) + " outside [0, " +
                            std::to_string(total) + ")");
  }
  switch (order) {
    case ScanOrder::RowMajorForward: return {t / n, t % n};
    case ScanOrder::RowMajorReverse: {
      const int u = total - 1 - t;
      return {u / n, u % n};
    }
    case ScanOrder::ColMajorForward: return {t % n, t / n};
    case ScanOrder::ColMajorReverse: {
      const int u = total - 1 - t;
      return {u % n, u / n};
    }
  }
  throw std::logic_error("bad scan order");
}

int coord_to_index(ScanOrder order, Cell cell, int n) {
  if (cell.row < 0 || cell.row >= n || cell.col < 0 || cell.col >= n) {
    throw std::out_of_range("cell outside grid");
  }
  const int total = n * n;
  switch (order) {
    case ScanOrder::RowMajorForward: return cell.row * n + cell.col;
    case ScanOrder::RowMajorReverse: return total - 1 - (cell.row * n + cell.col);
    case ScanOrder::ColMajorForward: return cell.col * n + cell.row;
    case ScanOrder::ColMajorReverse: return total - 1 - (cell.col * n + cell.row);
  }
  throw std::logic_error("bad scan order");
}

SequenceSample serialize(const FeatureGrid& grid, ScanOrder order, int count,
                         std::string source) {
  const int n = grid.n();
  const int steps = n * n;
  if (count < 0) throw InfeasibleCount("count must be non-negative");
  if (count > steps) {
    throw InfeasibleCount("count " + std::to_string(count) + " exceeds sequence length " +
                          std::to_string(steps));
  }
  SequenceSample sample;
  sample.steps = steps;
  sample.dims = grid.k();
  sample.order = order;
  sample.count = count;
  sample.source = std::move(source);
  sample.frames.reserve(grid.values().size());
  for (int t = 0; t < steps; ++t) {
    const Cell c = index_to_coord(order, t, n);
    const auto src = grid.cell(c.row, c.col);
    sample.frames.insert(sample.frames.end(), src.begin(), src.end());
  }
  return sample;
}

FeatureGrid deserialize(const SequenceSample& sample, int n) {
  if (sample.steps != n * n) {
    throw DimensionMismatch("sequence length " + std::to_string(sample.steps) +
                            " is not " + std::to_string(n) + "^2");
  }
  FeatureGrid grid = FeatureGrid::zeros(n, sample.dims);
  for (int t = 0; t < sample.steps; ++t) {
    const Cell c = index_to_coord(sample.order, t, n);
    const auto src = sample.frame(t);
    std::copy(src.begin(), src.end(), grid.cell(c.row, c.col).begin());
  }
  return grid;
}

void to_json(nlohmann::json& j, const FeatureGrid& grid) {
  j = nlohmann::json{{"n", grid.n()}, {"k", grid.k()}, {"values", grid.values()}};
}

void from_json(const nlohmann::json& j, FeatureGrid& grid) {
  grid = FeatureGrid(j.at("n").get<int>(), j.at("k").get<int>(),
                     j.at("values").get<std::vector<double>>());
}

}  // namespace lstm_cctc
