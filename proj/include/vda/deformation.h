#pragma once

#include <array>
#include <vector>

#include "vda/geometry.h"
#include "vda/raster.h"

namespace vda {

// Up to four handle indices with their bilinear coefficients for one pixel.
// Coefficients sum to 1; handles outside the touched cell carry weight 0.
struct SplineSupport {
  std::array<int, 4> index{};
  std::array<double, 4> weight{};
  int count = 0;
};

// Spatially-varying depth scale field: a regular grid of positive scale
// handles spanning the full image, evaluated by bilinear interpolation.
// Handles sit at cell corners; spacing is (W-1)/(cols-1) along x. A 1x1
// grid is the constant function (the per-frame scalar special case).
struct DeformationGrid {
  int cols = 1;
  int rows = 1;
  int image_width = 0;
  int image_height = 0;
  std::vector<double> handles;  // row-major, rows x cols

  DeformationGrid() = default;
  DeformationGrid(int cols, int rows, int image_width, int image_height,
                  double fill = 1.0);

  double& handle(int cx, int cy) { return handles[size_t(cy) * cols + cx]; }
  double handle(int cx, int cy) const { return handles[size_t(cy) * cols + cx]; }
  int handle_count() const { return cols * rows; }

  // Pixel position of handle (cx, cy) in raster coordinates.
  PixelCoord handle_position(int cx, int cy) const;

  // Bilinear support of a raster pixel; out-of-bounds positions clamp to
  // the border cell.
  SplineSupport support(const PixelCoord& p) const;

  void validate() const;
};

// Evaluates the scale spline at a raster pixel. Out-of-bounds positions are
// clamped to the border cell.
double eval_spline(const DeformationGrid& grid, const PixelCoord& p);

// Resamples the grid at the handle positions of the next resolution. Exact
// (value-preserving) whenever the new cell boundaries contain the old ones,
// which holds along any doubled-interval dimension.
DeformationGrid subdivide(const DeformationGrid& grid, int next_cols,
                          int next_rows);

// Coarse-to-fine resolutions, first entry (1,1), final long side 17.
struct GridSchedule {
  std::vector<std::pair<int, int>> levels;  // (cols, rows)
};

// Builds the subdivision schedule for an image: a 1x1 level followed by
// long-side handle counts 2,3,5,9,17 (interval doubling), the short side
// scaled by aspect ratio and clamped to at least 2 handles.
GridSchedule grid_schedule(int width, int height, int long_side_max = 17);

// Materializes the deformed depth: output(p) = eval_spline(grid, p) * d(p).
DepthMap apply_deformation(const DepthMap& d, const DeformationGrid& grid);

}  // namespace vda
