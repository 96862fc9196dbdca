#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace lstm_cctc {

// Raster traversals of an n x n grid. Each row (or column) restarts at its
// origin; the reverse variants visit cells in exactly the opposite order.
enum class ScanOrder {
  RowMajorForward = 0,
  RowMajorReverse = 1,
  ColMajorForward = 2,
  ColMajorReverse = 3,
};

inline constexpr std::array<ScanOrder, 4> kAllScanOrders = {
    ScanOrder::RowMajorForward, ScanOrder::RowMajorReverse,
    ScanOrder::ColMajorForward, ScanOrder::ColMajorReverse};

inline constexpr std::size_t index_of(ScanOrder order) {
  return static_cast<std::size_t>(order);
}

std::string_view to_string(ScanOrder order);
ScanOrder parse_scan_order(std::string_view name);

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

// n x n x k grid of finite reals. Storage is row-major, then channel:
// value(r, c, ch) lives at (r * n + c) * k + ch.
class FeatureGrid {
 public:
  FeatureGrid() = default;
  FeatureGrid(int n, int k, std::vector<double> values);

  static FeatureGrid zeros(int n, int k);

  int n() const { return n_; }
  int k() const { return k_; }
  const std::vector<double>& values() const { return values_; }

  double at(int row, int col, int channel) const {
    return values_[offset(row, col) + static_cast<std::size_t>(channel)];
  }
  double& at(int row, int col, int channel) {
    return values_[offset(row, col) + static_cast<std::size_t>(channel)];
  }
  std::span<const double> cell(int row, int col) const {
    return {values_.data() + offset(row, col), static_cast<std::size_t>(k_)};
  }
  std::span<double> cell(int row, int col) {
    return {values_.data() + offset(row, col), static_cast<std::size_t>(k_)};
  }

  friend bool operator==(const FeatureGrid&, const FeatureGrid&) = default;

 private:
  std::size_t offset(int row, int col) const {
    return (static_cast<std::size_t>(row) * n_ + col) * k_;
  }

  int n_ = 0;
  int k_ = 0;
  std::vector<double> values_;
};

// A grid flattened along one scan order. frames holds T rows of k values.
struct SequenceSample {
  int steps = 0;  // T
  int dims = 0;   // k
  std::vector<double> frames;
  ScanOrder order = ScanOrder::RowMajorForward;
  int count = 0;
  std::string source;

  std::span<const double> frame(int t) const {
    return {frames.data() + static_cast<std::size_t>(t) * dims,
            static_cast<std::size_t>(dims)};
  }
};

Cell index_to_coord(ScanOrder order, int t, int n);
int coord_to_index(ScanOrder order, Cell cell, int n);

SequenceSample serialize(const FeatureGrid& grid, ScanOrder order, int count,
                         std::string source = {});

// Inverse of serialize for a sample taken from an n x n grid.
FeatureGrid deserialize(const SequenceSample& sample, int n);

void to_json(nlohmann::json& j, const FeatureGrid& grid);
void from_json(const nlohmann::json& j, FeatureGrid& grid);

}  // namespace lstm_cctc
