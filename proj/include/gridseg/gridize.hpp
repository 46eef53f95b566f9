#pragma once

#include <cstdint>
#include <vector>

#include "gridseg/image.hpp"

namespace gridseg {

struct GridDims {
  int rows = 0;
  int cols = 0;
};

struct Point {
  int y = 0;
  int x = 0;
};

// (rows+1) x (cols+1) lattice of cell corner positions.
struct JunctionSet {
  GridDims dims;
  std::vector<Point> pts;

  Point& at(int r, int c) {
    return pts[static_cast<std::size_t>(r) * (dims.cols + 1) + c];
  }
  const Point& at(int r, int c) const {
    return pts[static_cast<std::size_t>(r) * (dims.cols + 1) + c];
  }
};

// One polyline per grid line. horizontal[r][x] is the y coordinate of
// horizontal path r at column x; vertical[c][y] is its x at row y.
// Paths 0 and rows/cols run along the image borders.
struct BoundaryPathSet {
  int img_h = 0;
  int img_w = 0;
  std::vector<std::vector<int>> horizontal;
  std::vector<std::vector<int>> vertical;
};

struct SuperpixelGrid {
  GridDims dims;
  int img_h = 0;
  int img_w = 0;
  std::vector<std::int32_t> labels;       // img_h * img_w, label = r * cols + c
  std::vector<std::int64_t> cell_sizes;   // rows * cols
  bool fallback = false;                  // plain rectangular partition used
};

struct PathResult {
  double score = 0.0;
  std::vector<int> ys;     // one y per x in [a.x, b.x]
  bool feasible = true;    // false when |dy| > dx forced a straight line
};

// rows = max(2, round(sqrt(n * h / w))), cols = max(2, round(n / rows)).
// Rejects images with fewer than 2 pixels per cell side.
GridDims choose_dims(int img_h, int img_w, int target_cells);

// Evenly spaced corner lattice: y_r = round(r * (h-1) / rows), x likewise.
JunctionSet place_junctions(int img_h, int img_w, GridDims dims);

// Moves each junction to the strongest boundary pixel inside its search
// window. Corners stay fixed, border junctions slide along their border,
// interior junctions move in both directions. Windows are sized so that
// relocated junctions keep the strict lattice ordering. Ties prefer the
// smallest squared displacement, then smallest y, then smallest x.
JunctionSet relocate_junctions(const BoundaryMap& bmap, GridDims dims);

// Max-total-strength path from a to b (a.x < b.x), one pixel per column,
// y changing by at most 1 per step, confined to y in [lo, hi]. Ties prefer
// keeping y, then moving up, then moving down. When |b.y - a.y| > b.x - a.x
// no such path exists and the rounded straight line is returned instead.
PathResult best_monotone_path(const BoundaryMap& bmap, Point a, Point b,
                              int lo, int hi);

// Runs best_monotone_path between consecutive junctions of every interior
// grid line. Each line is confined to the open band between the midlines
// toward its initial neighbor lines, so lines of the same orientation can
// never touch or cross. Border lines are pinned to the image borders.
BoundaryPathSet trace_paths(const BoundaryMap& bmap,
                            const JunctionSet& junctions, int threads = 1);

// Pixel (y, x) gets row index = number of interior horizontal paths at or
// above it (path pixels belong to the cell below / right of the path),
// column index likewise; label = row * cols + col.
std::vector<std::int32_t> label_cells(const BoundaryPathSet& paths,
                                      GridDims dims);

// Reattaches every non-largest connected component of a cell to the
// 4-adjacent neighbor cell it shares the longest border with. Returns the
// number of fragments moved.
int repair_connectivity(SuperpixelGrid& grid);

// True when every cell is nonempty and 4-connected, adjacent pixels with
// different labels differ by at most 1 in both grid coordinates, and cells
// adjacent in the grid touch somewhere in the image.
bool check_grid_invariants(const SuperpixelGrid& grid);

// Full pipeline: boundary_map, choose_dims, relocate_junctions, trace_paths,
// label_cells, repair_connectivity. If the result still violates the
// invariants (or some cell came out empty) a plain rectangular partition is
// used and the fallback flag is set.
SuperpixelGrid gridize(const RasterImage& img, int target_cells,
                       int threads = 1);

// Rebuilds a grid (cell size tally included) from a stored label map.
SuperpixelGrid grid_from_labels(GridDims dims, int img_h, int img_w,
                                std::vector<std::int32_t> labels);

}  // namespace gridseg
