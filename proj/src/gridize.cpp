#include "gridseg/gridize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gridseg/common.hpp"

namespace gridseg {

namespace {

// Evenly spaced coordinates 0..extent-1 split into `count` spans.
std::vector<int> lattice_coords(int extent, int count) {
  std::vector<int> v(count + 1);
  for (int i = 0; i <= count; ++i)
    v[i] = static_cast<int>(
        std::lround(static_cast<double>(i) * (extent - 1) / count));
  return v;
}

// Half the seed spacing minus one; keeps relocation windows disjoint so the
// junction ordering invariant holds by construction.
int window_half(int extent, int count) {
  return std::max(0, (extent - 1) / (2 * count) - 1);
}

BoundaryMap transpose(const BoundaryMap& b) {
  BoundaryMap t = BoundaryMap::make(b.width, b.height);
  for (int y = 0; y < b.height; ++y)
    for (int x = 0; x < b.width; ++x) t.at(x, y) = b.at(y, x);
  return t;
}

std::vector<int> straight_line(Point a, Point b) {
  const int len = b.x - a.x + 1;
  std::vector<int> ys(len);
  for (int i = 0; i < len; ++i)
    ys[i] = a.y + static_cast<int>(std::lround(
                      static_cast<double>(i) * (b.y - a.y) / (b.x - a.x)));
  return ys;
}

struct Components {
  std::vector<std::int32_t> comp;    // per pixel
  std::vector<std::int64_t> size;    // per component
  std::vector<std::int32_t> label;   // per component
};

Components connected_components(const std::vector<std::int32_t>& labels,
                                int h, int w) {
  Components out;
  out.comp.assign(labels.size(), -1);
  std::vector<std::int64_t> stack;
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(labels.size()); ++i) {
    if (out.comp[i] >= 0) continue;
    const auto id = static_cast<std::int32_t>(out.size.size());
    const std::int32_t lab = labels[i];
    out.size.push_back(0);
    out.label.push_back(lab);
    out.comp[i] = id;
    stack.push_back(i);
    while (!stack.empty()) {
      const std::int64_t p = stack.back();
      stack.pop_back();
      ++out.size[id];
      const int y = static_cast<int>(p / w), x = static_cast<int>(p % w);
      const int ny[4] = {y - 1, y + 1, y, y};
      const int nx[4] = {x, x, x - 1, x + 1};
      for (int k = 0; k < 4; ++k) {
        if (ny[k] < 0 || ny[k] >= h || nx[k] < 0 || nx[k] >= w) continue;
        const std::int64_t q = static_cast<std::int64_t>(ny[k]) * w + nx[k];
        if (out.comp[q] < 0 && labels[q] == lab) {
          out.comp[q] = id;
          stack.push_back(q);
        }
      }
    }
  }
  return out;
}

SuperpixelGrid rectangular_grid(GridDims dims, int h, int w) {
  SuperpixelGrid g;
  g.dims = dims;
  g.img_h = h;
  g.img_w = w;
  g.fallback = true;
  g.labels.resize(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y) {
    const int r = static_cast<int>(static_cast<std::int64_t>(y) * dims.rows / h);
    for (int x = 0; x < w; ++x) {
      const int c = static_cast<int>(static_cast<std::int64_t>(x) * dims.cols / w);
      g.labels[static_cast<std::size_t>(y) * w + x] = r * dims.cols + c;
    }
  }
  return g;
}

void tally_cells(SuperpixelGrid& g) {
  g.cell_sizes.assign(static_cast<std::size_t>(g.dims.rows) * g.dims.cols, 0);
  for (const auto lab : g.labels) ++g.cell_sizes[lab];
}

}  // namespace

GridDims choose_dims(int img_h, int img_w, int target_cells) {
  if (target_cells < 4)
    throw input_error("need at least 4 target cells, got " +
                      std::to_string(target_cells));
  GridDims d;
  d.rows = std::max<int>(
      2, static_cast<int>(std::lround(
             std::sqrt(static_cast<double>(target_cells) * img_h / img_w))));
  d.cols = std::max<int>(
      2, static_cast<int>(
             std::lround(static_cast<double>(target_cells) / d.rows)));
  if (img_h < 2 * d.rows || img_w < 2 * d.cols)
    throw input_error("image " + std::to_string(img_h) + "x" +
                      std::to_string(img_w) + " too small for " +
                      std::to_string(target_cells) + " cells");
  return d;
}

JunctionSet place_junctions(int img_h, int img_w, GridDims dims) {
  JunctionSet js;
  js.dims = dims;
  js.pts.resize(static_cast<std::size_t>(dims.rows + 1) * (dims.cols + 1));
  const std::vector<int> cy = lattice_coords(img_h, dims.rows);
  const std::vector<int> cx = lattice_coords(img_w, dims.cols);
  for (int r = 0; r <= dims.rows; ++r)
    for (int c = 0; c <= dims.cols; ++c) js.at(r, c) = {cy[r], cx[c]};
  return js;
}

JunctionSet relocate_junctions(const BoundaryMap& bmap, GridDims dims) {
  JunctionSet js = place_junctions(bmap.height, bmap.width, dims);
  const int wy = window_half(bmap.height, dims.rows);
  const int wx = window_half(bmap.width, dims.cols);
  for (int r = 0; r <= dims.rows; ++r) {
    for (int c = 0; c <= dims.cols; ++c) {
      const Point center = js.at(r, c);
      const int dy = (r > 0 && r < dims.rows) ? wy : 0;
      const int dx = (c > 0 && c < dims.cols) ? wx : 0;
      if (dy == 0 && dx == 0) continue;
      Point best = center;
      float best_s = bmap.at(center.y, center.x);
      int best_d2 = 0;
      const int y0 = std::max(0, center.y - dy);
      const int y1 = std::min(bmap.height - 1, center.y + dy);
      const int x0 = std::max(0, center.x - dx);
      const int x1 = std::min(bmap.width - 1, center.x + dx);
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const float s = bmap.at(y, x);
          const int d2 = (y - center.y) * (y - center.y) +
                         (x - center.x) * (x - center.x);
          const bool better =
              s > best_s ||
              (s == best_s &&
               (d2 < best_d2 ||
                (d2 == best_d2 &&
                 (y < best.y || (y == best.y && x < best.x)))));
          if (better) {
            best = {y, x};
            best_s = s;
            best_d2 = d2;
          }
        }
      }
      js.at(r, c) = best;
    }
  }
  return js;
}

PathResult best_monotone_path(const BoundaryMap& bmap, Point a, Point b,
                              int lo, int hi) {
  if (a.x >= b.x) throw input_error("path endpoints must satisfy a.x < b.x");
  lo = std::max(0, std::min({lo, a.y, b.y}));
  hi = std::min(bmap.height - 1, std::max({hi, a.y, b.y}));
  PathResult res;
  if (std::abs(b.y - a.y) > b.x - a.x) {
    res.feasible = false;
    res.ys = straight_line(a, b);
    double s = 0.0;
    for (std::size_t i = 0; i < res.ys.size(); ++i)
      s += bmap.at(res.ys[i], a.x + static_cast<int>(i));
    res.score = s;
    return res;
  }

  const int band = hi - lo + 1;
  const int len = b.x - a.x + 1;
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  std::vector<double> dp(band, kNegInf), next(band, kNegInf);
  std::vector<std::int8_t> step(static_cast<std::size_t>(len) * band, 0);
  dp[a.y - lo] = bmap.at(a.y, a.x);
  for (int i = 1; i < len; ++i) {
    const int x = a.x + i;
    const int ylo = std::max({lo, a.y - i, b.y - (b.x - x)});
    const int yhi = std::min({hi, a.y + i, b.y + (b.x - x)});
    std::fill(next.begin(), next.end(), kNegInf);
    for (int y = ylo; y <= yhi; ++y) {
      // tie order: keep y, then come from below (step -1), then from above
      const int prevs[3] = {y, y + 1, y - 1};
      double best = kNegInf;
      std::int8_t pick = 0;
      for (const int py : prevs) {
        if (py < lo || py > hi) continue;
        const double v = dp[py - lo];
        if (v > best) {
          best = v;
          pick = static_cast<std::int8_t>(y - py);
        }
      }
      if (best == kNegInf) continue;
      next[y - lo] = best + bmap.at(y, x);
      step[static_cast<std::size_t>(i) * band + (y - lo)] = pick;
    }
    dp.swap(next);
  }

  res.score = dp[b.y - lo];
  res.ys.assign(len, 0);
  int y = b.y;
  for (int i = len - 1; i >= 1; --i) {
    res.ys[i] = y;
    y -= step[static_cast<std::size_t>(i) * band + (y - lo)];
  }
  res.ys[0] = y;
  return res;
}

BoundaryPathSet trace_paths(const BoundaryMap& bmap,
                            const JunctionSet& junctions, int threads) {
  const int h = bmap.height, w = bmap.width;
  const int rows = junctions.dims.rows, cols = junctions.dims.cols;
  BoundaryPathSet out;
  out.img_h = h;
  out.img_w = w;
  out.horizontal.assign(rows + 1, std::vector<int>(w, 0));
  out.vertical.assign(cols + 1, std::vector<int>(h, 0));
  std::fill(out.horizontal[rows].begin(), out.horizontal[rows].end(), h - 1);
  std::fill(out.vertical[cols].begin(), out.vertical[cols].end(), w - 1);

  // Corridors come from the initial lattice so they do not depend on where
  // junctions relocated to; relocation windows fit inside them.
  const std::vector<int> cy = lattice_coords(h, rows);
  const std::vector<int> cx = lattice_coords(w, cols);
  const auto band_lo = [](const std::vector<int>& c, int i) {
    return (c[i - 1] + c[i]) / 2 + 1;
  };
  // The midline pixel itself belongs to neither corridor, so adjacent paths
  // keep a two-pixel gap and bands can never pinch shut.
  const auto band_hi = [](const std::vector<int>& c, int i) {
    return (c[i] + c[i + 1]) / 2 - 1;
  };
  const BoundaryMap tmap = transpose(bmap);

  parallel_for(
      rows - 1 + cols - 1, threads, [&](std::int64_t lo_t, std::int64_t hi_t) {
        for (std::int64_t t = lo_t; t < hi_t; ++t) {
          if (t < rows - 1) {
            const int r = static_cast<int>(t) + 1;
            auto& path = out.horizontal[r];
            const int blo = band_lo(cy, r), bhi = band_hi(cy, r);
            for (int c = 0; c < cols; ++c) {
              const Point a = junctions.at(r, c), b = junctions.at(r, c + 1);
              const PathResult seg = best_monotone_path(bmap, a, b, blo, bhi);
              for (std::size_t i = 0; i < seg.ys.size(); ++i)
                path[a.x + i] = seg.ys[i];
            }
          } else {
            const int c = static_cast<int>(t - (rows - 1)) + 1;
            auto& path = out.vertical[c];
            const int blo = band_lo(cx, c), bhi = band_hi(cx, c);
            for (int r = 0; r < rows; ++r) {
              const Point a = junctions.at(r, c), b = junctions.at(r + 1, c);
              const PathResult seg = best_monotone_path(
                  tmap, Point{a.x, a.y}, Point{b.x, b.y}, blo, bhi);
              for (std::size_t i = 0; i < seg.ys.size(); ++i)
                path[a.y + i] = seg.ys[i];
            }
          }
        }
      });
  return out;
}

std::vector<std::int32_t> label_cells(const BoundaryPathSet& paths,
                                      GridDims dims) {
  const int h = paths.img_h, w = paths.img_w;
  const int rows = dims.rows, cols = dims.cols;
  std::vector<std::int32_t> labels(static_cast<std::size_t>(h) * w, 0);
  // Row index per pixel: how many interior horizontal paths lie at or above
  // it. Interior paths never touch within one column, so a walk suffices.
  std::vector<std::uint16_t> rowidx(labels.size(), 0);
  for (int x = 0; x < w; ++x) {
    int rr = 0;
    for (int y = 0; y < h; ++y) {
      while (rr < rows - 1 && paths.horizontal[rr + 1][x] <= y) ++rr;
      rowidx[static_cast<std::size_t>(y) * w + x] =
          static_cast<std::uint16_t>(rr);
    }
  }
  for (int y = 0; y < h; ++y) {
    int cc = 0;
    for (int x = 0; x < w; ++x) {
      while (cc < cols - 1 && paths.vertical[cc + 1][y] <= x) ++cc;
      labels[static_cast<std::size_t>(y) * w + x] =
          static_cast<std::int32_t>(rowidx[static_cast<std::size_t>(y) * w + x]) *
              cols +
          cc;
    }
  }
  return labels;
}

int repair_connectivity(SuperpixelGrid& grid) {
  const int h = grid.img_h, w = grid.img_w;
  const int ncell = grid.dims.rows * grid.dims.cols;
  int moved = 0;
  for (int pass = 0; pass < 64; ++pass) {
    const Components cc = connected_components(grid.labels, h, w);
    // Keep the largest component of each label; components are discovered in
    // scan order, so ties keep the earlier one.
    std::vector<std::int32_t> keep(ncell, -1);
    for (std::int32_t id = 0; id < static_cast<std::int32_t>(cc.size.size());
         ++id) {
      const std::int32_t cur = keep[cc.label[id]];
      if (cur < 0 || cc.size[id] > cc.size[cur]) keep[cc.label[id]] = id;
    }
    std::vector<std::vector<std::int64_t>> members(cc.size.size());
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(grid.labels.size());
         ++i)
      members[cc.comp[i]].push_back(i);

    bool any = false;
    std::vector<std::int64_t> tally(ncell, 0);
    const int cols = grid.dims.cols;
    const auto box_adjacent = [cols](std::int32_t a, std::int32_t b) {
      return std::abs(a / cols - b / cols) <= 1 &&
             std::abs(a % cols - b % cols) <= 1;
    };
    for (std::int32_t id = 0; id < static_cast<std::int32_t>(cc.size.size());
         ++id) {
      if (keep[cc.label[id]] == id) continue;
      const std::int32_t lab = cc.label[id];
      std::vector<std::int32_t> touched;
      for (const std::int64_t p : members[id]) {
        const int y = static_cast<int>(p / w), x = static_cast<int>(p % w);
        const int ny[4] = {y - 1, y + 1, y, y};
        const int nx[4] = {x, x, x - 1, x + 1};
        for (int k = 0; k < 4; ++k) {
          if (ny[k] < 0 || ny[k] >= h || nx[k] < 0 || nx[k] >= w) continue;
          const std::int32_t nl =
              grid.labels[static_cast<std::size_t>(ny[k]) * w + nx[k]];
          if (nl == lab) continue;
          if (tally[nl] == 0) touched.push_back(nl);
          ++tally[nl];
        }
      }
      // A safe target keeps every adjacency the move creates within one grid
      // step: it must be a grid neighbor of the fragment's own cell and of
      // every cell the fragment touches.
      std::int32_t target = -1;
      std::int64_t best = 0;
      for (const std::int32_t nl : touched) {
        bool safe = box_adjacent(nl, lab);
        for (const std::int32_t other : touched)
          safe = safe && (other == nl || box_adjacent(nl, other));
        if (safe &&
            (tally[nl] > best || (tally[nl] == best && nl < target))) {
          best = tally[nl];
          target = nl;
        }
      }
      for (const std::int32_t nl : touched) tally[nl] = 0;
      if (target < 0) continue;  // no safe move, leave for the fallback
      for (const std::int64_t p : members[id]) grid.labels[p] = target;
      ++moved;
      any = true;
    }
    if (!any) break;
  }
  if (moved > 0) tally_cells(grid);
  return moved;
}

bool check_grid_invariants(const SuperpixelGrid& grid) {
  const int h = grid.img_h, w = grid.img_w;
  const int rows = grid.dims.rows, cols = grid.dims.cols;
  const int ncell = rows * cols;
  if (rows < 1 || cols < 1) return false;
  if (grid.labels.size() != static_cast<std::size_t>(h) * w) return false;
  std::vector<std::int64_t> sizes(ncell, 0);
  for (const auto lab : grid.labels) {
    if (lab < 0 || lab >= ncell) return false;
    ++sizes[lab];
  }
  for (const auto s : sizes)
    if (s == 0) return false;

  const Components cc = connected_components(grid.labels, h, w);
  if (cc.size.size() != static_cast<std::size_t>(ncell)) return false;

  // Different labels may touch only if they are grid neighbors (diagonal
  // neighbors included, at cell corners); direct grid neighbors must touch.
  std::vector<std::uint8_t> right_adj(ncell, 0), down_adj(ncell, 0);
  const auto visit = [&](std::int32_t a, std::int32_t b) {
    const int ra = a / cols, ca = a % cols;
    const int rb = b / cols, cb = b % cols;
    if (std::abs(ra - rb) > 1 || std::abs(ca - cb) > 1) return false;
    if (ra == rb && cb == ca + 1) right_adj[a] = 1;
    if (ra == rb && ca == cb + 1) right_adj[b] = 1;
    if (ca == cb && rb == ra + 1) down_adj[a] = 1;
    if (ca == cb && ra == rb + 1) down_adj[b] = 1;
    return true;
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::int32_t a = grid.labels[static_cast<std::size_t>(y) * w + x];
      if (x + 1 < w) {
        const std::int32_t b =
            grid.labels[static_cast<std::size_t>(y) * w + x + 1];
        if (a != b && !visit(a, b)) return false;
      }
      if (y + 1 < h) {
        const std::int32_t b =
            grid.labels[static_cast<std::size_t>(y + 1) * w + x];
        if (a != b && !visit(a, b)) return false;
      }
    }
  }
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      if (c + 1 < cols && !right_adj[r * cols + c]) return false;
      if (r + 1 < rows && !down_adj[r * cols + c]) return false;
    }
  return true;
}

SuperpixelGrid gridize(const RasterImage& img, int target_cells, int threads) {
  const GridDims dims = choose_dims(img.height, img.width, target_cells);
  const BoundaryMap bmap = boundary_map(img);
  const JunctionSet js = relocate_junctions(bmap, dims);
  const BoundaryPathSet paths = trace_paths(bmap, js, threads);
  SuperpixelGrid g;
  g.dims = dims;
  g.img_h = img.height;
  g.img_w = img.width;
  g.labels = label_cells(paths, dims);
  repair_connectivity(g);
  if (!check_grid_invariants(g))
    g = rectangular_grid(dims, img.height, img.width);
  tally_cells(g);
  return g;
}

SuperpixelGrid grid_from_labels(GridDims dims, int img_h, int img_w,
                                std::vector<std::int32_t> labels) {
  if (dims.rows < 1 || dims.cols < 1)
    throw input_error("grid needs at least one row and column");
  if (labels.size() != static_cast<std::size_t>(img_h) * img_w)
    throw input_error("label map size does not match image dimensions");
  SuperpixelGrid g;
  g.dims = dims;
  g.img_h = img_h;
  g.img_w = img_w;
  g.labels = std::move(labels);
  const int ncell = dims.rows * dims.cols;
  g.cell_sizes.assign(ncell, 0);
  for (const auto lab : g.labels) {
    if (lab < 0 || lab >= ncell)
      throw input_error("label map value out of range");
    ++g.cell_sizes[lab];
  }
  return g;
}

}  // namespace gridseg
