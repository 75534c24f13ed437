#include "vda/image_io.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace vda {

namespace {

constexpr float kFlowMagic = 202021.25f;

[[noreturn]] void fail(const std::filesystem::path& path,
                       const std::string& what) {
  throw std::runtime_error(path.string() + ": " + what);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path, "cannot open for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open");
  return in;
}

// Whitespace-delimited header token (PFM/PGM headers).
std::string read_token(std::istream& in) {
  std::string tok;
  in >> tok;
  return tok;
}

float byteswap_float(float v) {
  uint32_t u;
  std::memcpy(&u, &v, 4);
  u = __builtin_bswap32(u);
  std::memcpy(&v, &u, 4);
  return v;
}

constexpr bool host_little_endian() {
  return std::endian::native == std::endian::little;
}

}  // namespace

void write_pfm(const std::filesystem::path& path, const Raster<float>& img) {
  std::ofstream out = open_out(path);
  out << "Pf\n" << img.width() << " " << img.height() << "\n";
  out << (host_little_endian() ? "-1.0" : "1.0") << "\n";
  // PFM stores rows bottom-up.
  for (int y = img.height() - 1; y >= 0; --y) {
    out.write(reinterpret_cast<const char*>(&img.at(0, y)),
              std::streamsize(img.width()) * 4);
  }
  if (!out) fail(path, "write failed");
}

Raster<float> read_pfm(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  const std::string magic = read_token(in);
  if (magic != "Pf") fail(path, "not a grayscale PFM (magic '" + magic + "')");
  int width = 0, height = 0;
  double scale = 0.0;
  if (!(in >> width >> height >> scale) || width <= 0 || height <= 0 ||
      scale == 0.0) {
    fail(path, "malformed PFM header");
  }
  in.get();  // single whitespace before binary data
  Raster<float> img(width, height);
  const bool swap = (scale > 0.0) == host_little_endian();
  std::vector<float> row(width);
  for (int y = height - 1; y >= 0; --y) {
    if (!in.read(reinterpret_cast<char*>(row.data()),
                 std::streamsize(width) * 4)) {
      fail(path, "truncated PFM data");
    }
    for (int x = 0; x < width; ++x) {
      float v = swap ? byteswap_float(row[x]) : row[x];
      if (std::isnan(v)) {
        fail(path, "NaN at pixel (" + std::to_string(x) + "," +
                       std::to_string(y) + ")");
      }
      img.at(x, y) = v;
    }
  }
  return img;
}

void write_depth(const std::filesystem::path& path, const DepthMap& depth) {
  depth.validate();
  write_pfm(path, depth);
}

DepthMap read_depth(const std::filesystem::path& path) {
  Raster<float> img = read_pfm(path);
  DepthMap depth(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const float v = img.at(x, y);
      if (!(v > 0.f) || !std::isfinite(v)) {
        fail(path, "non-positive depth at pixel (" + std::to_string(x) + "," +
                       std::to_string(y) + ")");
      }
      depth.at(x, y) = v;
    }
  }
  return depth;
}

void write_flow(const std::filesystem::path& path, const FlowField& flow) {
  std::ofstream out = open_out(path);
  const float magic = kFlowMagic;
  const int32_t w = flow.width(), h = flow.height();
  out.write(reinterpret_cast<const char*>(&magic), 4);
  out.write(reinterpret_cast<const char*>(&w), 4);
  out.write(reinterpret_cast<const char*>(&h), 4);
  std::vector<float> row(size_t(w) * 2);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      row[2 * x] = flow.u.at(x, y);
      row[2 * x + 1] = flow.v.at(x, y);
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              std::streamsize(w) * 8);
  }
  if (!out) fail(path, "write failed");
}

FlowField read_flow(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  float magic = 0.f;
  int32_t w = 0, h = 0;
  if (!in.read(reinterpret_cast<char*>(&magic), 4)) {
    fail(path, "truncated flow header");
  }
  if (magic != kFlowMagic) fail(path, "not a flow file (bad magic)");
  if (!in.read(reinterpret_cast<char*>(&w), 4) ||
      !in.read(reinterpret_cast<char*>(&h), 4) || w <= 0 || h <= 0) {
    fail(path, "malformed flow dimensions");
  }
  FlowField flow(w, h);
  std::vector<float> row(size_t(w) * 2);
  for (int y = 0; y < h; ++y) {
    if (!in.read(reinterpret_cast<char*>(row.data()),
                 std::streamsize(w) * 8)) {
      fail(path, "truncated flow data");
    }
    for (int x = 0; x < w; ++x) {
      flow.u.at(x, y) = row[2 * x];
      flow.v.at(x, y) = row[2 * x + 1];
    }
  }
  return flow;
}

void write_mask(const std::filesystem::path& path, const BinaryMask& mask) {
  std::ofstream out = open_out(path);
  out << "P5\n" << mask.width() << " " << mask.height() << "\n255\n";
  std::vector<uint8_t> row(mask.width());
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) row[x] = mask.get(x, y) ? 255 : 0;
    out.write(reinterpret_cast<const char*>(row.data()), mask.width());
  }
  if (!out) fail(path, "write failed");
}

BinaryMask read_mask(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  if (read_token(in) != "P5") fail(path, "not a binary PGM");
  int width = 0, height = 0, maxval = 0;
  if (!(in >> width >> height >> maxval) || width <= 0 || height <= 0) {
    fail(path, "malformed PGM header");
  }
  if (maxval != 255) fail(path, "unsupported maxval");
  in.get();
  BinaryMask mask(width, height);
  std::vector<uint8_t> row(width);
  for (int y = 0; y < height; ++y) {
    if (!in.read(reinterpret_cast<char*>(row.data()), width)) {
      fail(path, "truncated PGM data");
    }
    for (int x = 0; x < width; ++x) {
      if (row[x] != 0 && row[x] != 255) {
        fail(path, "mask value " + std::to_string(row[x]) + " at (" +
                       std::to_string(x) + "," + std::to_string(y) +
                       ") is neither 0 nor 255");
      }
      mask.set(x, y, row[x] == 255);
    }
  }
  return mask;
}

}  // namespace vda
