#include "vda/deformation.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace vda {

DeformationGrid::DeformationGrid(int cols, int rows, int image_width,
                                 int image_height, double fill)
    : cols(cols),
      rows(rows),
      image_width(image_width),
      image_height(image_height),
      handles(size_t(cols) * rows, fill) {
  if (cols < 1 || rows < 1) {
    throw std::invalid_argument("DeformationGrid: need at least one handle");
  }
  if (image_width < 1 || image_height < 1) {
    throw std::invalid_argument("DeformationGrid: bad image size");
  }
}

PixelCoord DeformationGrid::handle_position(int cx, int cy) const {
  double x = cols > 1 ? cx * double(image_width - 1) / (cols - 1) : 0.0;
  double y = rows > 1 ? cy * double(image_height - 1) / (rows - 1) : 0.0;
  return {x, y};
}

SplineSupport DeformationGrid::support(const PixelCoord& p) const {
  // Grid-space coordinate; clamp so border pixels and out-of-bounds
  // positions fall into the nearest cell.
  auto cell = [](double v, int n_handles, int extent) {
    if (n_handles <= 1) return std::pair<int, double>{0, 0.0};
    double g = v * double(n_handles - 1) / double(extent - 1);
    g = std::clamp(g, 0.0, double(n_handles - 1));
    int i0 = std::min(int(std::floor(g)), n_handles - 2);
    return std::pair<int, double>{i0, g - i0};
  };
  auto [ix, fx] = cell(p.x, cols, image_width);
  auto [iy, fy] = cell(p.y, rows, image_height);

  SplineSupport s;
  auto push = [&](int cx, int cy, double w) {
    if (w == 0.0) return;
    s.index[s.count] = cy * cols + cx;
    s.weight[s.count] = w;
    ++s.count;
  };
  double wx1 = cols > 1 ? fx : 0.0;
  double wy1 = rows > 1 ? fy : 0.0;
  push(ix, iy, (1.0 - wx1) * (1.0 - wy1));
  if (cols > 1) push(ix + 1, iy, wx1 * (1.0 - wy1));
  if (rows > 1) push(ix, iy + 1, (1.0 - wx1) * wy1);
  if (cols > 1 && rows > 1) push(ix + 1, iy + 1, wx1 * wy1);
  return s;
}

void DeformationGrid::validate() const {
  for (size_t i = 0; i < handles.size(); ++i) {
    if (!(handles[i] > 0.0) || !std::isfinite(handles[i])) {
      throw std::runtime_error("DeformationGrid: non-positive handle " +
                               std::to_string(i));
    }
  }
}

double eval_spline(const DeformationGrid& grid, const PixelCoord& p) {
  SplineSupport s = grid.support(p);
  double v = 0.0;
  for (int k = 0; k < s.count; ++k) {
    v += s.weight[k] * grid.handles[s.index[k]];
  }
  return v;
}

DeformationGrid subdivide(const DeformationGrid& grid, int next_cols,
                          int next_rows) {
  if (next_cols < grid.cols || next_rows < grid.rows ||
      (next_cols == grid.cols && next_rows == grid.rows)) {
    throw std::invalid_argument("subdivide: target resolution must refine " +
                                std::to_string(grid.cols) + "x" +
                                std::to_string(grid.rows));
  }
  DeformationGrid fine(next_cols, next_rows, grid.image_width,
                       grid.image_height);
  for (int cy = 0; cy < next_rows; ++cy) {
    for (int cx = 0; cx < next_cols; ++cx) {
      fine.handle(cx, cy) = eval_spline(grid, fine.handle_position(cx, cy));
    }
  }
  return fine;
}

GridSchedule grid_schedule(int width, int height, int long_side_max) {
  if (width < 1 || height < 1) {
    throw std::invalid_argument("grid_schedule: bad image size");
  }
  const bool landscape = width >= height;
  const double aspect =
      landscape ? double(height) / width : double(width) / height;

  GridSchedule sched;
  sched.levels.emplace_back(1, 1);
  for (int intervals = 1; intervals <= long_side_max - 1; intervals *= 2) {
    int long_handles = intervals + 1;
    int short_handles =
        std::max<int>(2, std::lround(1.0 + intervals * aspect));
    if (landscape) {
      sched.levels.emplace_back(long_handles, short_handles);
    } else {
      sched.levels.emplace_back(short_handles, long_handles);
    }
  }
  return sched;
}

DepthMap apply_deformation(const DepthMap& d, const DeformationGrid& grid) {
  if (d.width() != grid.image_width || d.height() != grid.image_height) {
    throw std::invalid_argument("apply_deformation: dimension mismatch");
  }
  DepthMap out(d.width(), d.height());
  out.frame = d.frame;
  for (int y = 0; y < d.height(); ++y) {
    for (int x = 0; x < d.width(); ++x) {
      out.at(x, y) =
          float(eval_spline(grid, PixelCoord{double(x), double(y)}) *
                double(d.at(x, y)));
    }
  }
  return out;
}

}  // namespace vda
