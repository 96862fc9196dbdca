#pragma once

#include "lstm_cctc/grid.hpp"

namespace lstm_cctc {

// Axis-aligned box in grid cells with inclusive corners; x is the column
// axis, y the row axis. Area counts cells: (x1 - x0 + 1) * (y1 - y0 + 1).
struct Box {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;
  double score = 0.0;
  Cell center;

  long area() const { return static_cast<long>(x1 - x0 + 1) * (y1 - y0 + 1); }
  bool contains(Cell c) const { return c.col >= x0 && c.col <= x1 && c.row >= y0 && c.row <= y1; }
  bool contains(const Box& b) const {
    return b.x0 >= x0 && b.x1 <= x1 && b.y0 >= y0 && b.y1 <= y1;
  }
  bool inside_grid(int n) const { return x0 >= 0 && y0 >= 0 && x1 < n && y1 < n; }
};

inline Box make_box(int x0, int y0, int x1, int y1, double score = 0.0) {
  return Box{x0, y0, x1, y1, score, Cell{(y0 + y1) / 2, (x0 + x1) / 2}};
}

double iou(const Box& a, const Box& b);

}  // namespace lstm_cctc
