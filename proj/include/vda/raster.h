#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace vda {

// Dense row-major raster. Pixel centers sit at integer coordinates,
// (0,0) is the top-left pixel center.
template <typename T>
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, T fill = T{})
      : width_(width), height_(height), data_(size_t(width) * height, fill) {
    if (width <= 0 || height <= 0) {
      throw std::invalid_argument("Raster: dimensions must be positive");
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& at(int x, int y) { return data_[size_t(y) * width_ + x]; }
  const T& at(int x, int y) const { return data_[size_t(y) * width_ + x]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  bool same_size(const Raster& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  // True if (x,y) can be sampled bilinearly with full 4-neighbor support
  // (border pixels included via clamping at the exact edge).
  bool in_bounds(double x, double y) const {
    return x >= 0.0 && x <= width_ - 1.0 && y >= 0.0 && y <= height_ - 1.0;
  }

  // Bilinear sample with border clamp. Caller checks in_bounds when
  // out-of-range lookups must be rejected rather than clamped.
  double sample(double x, double y) const {
    x = std::clamp(x, 0.0, double(width_ - 1));
    y = std::clamp(y, 0.0, double(height_ - 1));
    int x0 = std::min(int(std::floor(x)), width_ - 2 >= 0 ? width_ - 2 : 0);
    int y0 = std::min(int(std::floor(y)), height_ - 2 >= 0 ? height_ - 2 : 0);
    x0 = std::max(x0, 0);
    y0 = std::max(y0, 0);
    int x1 = std::min(x0 + 1, width_ - 1);
    int y1 = std::min(y0 + 1, height_ - 1);
    double fx = x - x0;
    double fy = y - y0;
    double v00 = double(at(x0, y0)), v10 = double(at(x1, y0));
    double v01 = double(at(x0, y1)), v11 = double(at(x1, y1));
    double top = v00 + fx * (v10 - v00);
    double bot = v01 + fx * (v11 - v01);
    return top + fy * (bot - top);
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

// Per-frame positive depth raster.
class DepthMap : public Raster<float> {
 public:
  DepthMap() = default;
  DepthMap(int width, int height, float fill = 1.f)
      : Raster<float>(width, height, fill) {}

  int frame = -1;

  // Throws if any stored value is non-positive or non-finite.
  void validate() const {
    for (int y = 0; y < height(); ++y) {
      for (int x = 0; x < width(); ++x) {
        float v = at(x, y);
        if (!(v > 0.f) || !std::isfinite(v)) {
          throw std::runtime_error("DepthMap: invalid value at pixel (" +
                                   std::to_string(x) + "," + std::to_string(y) +
                                   "): " + std::to_string(v));
        }
      }
    }
  }
};

// Dense 2D displacement field mapping pixels of frame `src` into frame `dst`.
struct FlowField {
  FlowField() = default;
  FlowField(int width, int height)
      : u(width, height, 0.f), v(width, height, 0.f) {}

  Raster<float> u;
  Raster<float> v;
  int src = -1;
  int dst = -1;

  int width() const { return u.width(); }
  int height() const { return u.height(); }
};

// Per-pixel boolean raster (dynamic masks, flow-consistency masks, validity).
class BinaryMask : public Raster<uint8_t> {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height, bool fill = false)
      : Raster<uint8_t>(width, height, fill ? 1 : 0) {}

  bool get(int x, int y) const { return at(x, y) != 0; }
  void set(int x, int y, bool value) { at(x, y) = value ? 1 : 0; }

  size_t count_set() const {
    size_t n = 0;
    for (size_t i = 0; i < size(); ++i) n += data()[i] != 0;
    return n;
  }
};

}  // namespace vda
