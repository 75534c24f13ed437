#pragma once

#include <filesystem>
#include <string>

#include "vda/raster.h"

namespace vda {

// Portable float map, grayscale ("Pf"). The scale line's sign encodes byte
// order (negative = little-endian); rows are stored bottom-up per the PFM
// convention. Write-then-read is a bitwise identity.
void write_pfm(const std::filesystem::path& path, const Raster<float>& img);
Raster<float> read_pfm(const std::filesystem::path& path);

// PFM with the depth invariants enforced: rejects NaN and non-positive
// values, naming the offending pixel.
void write_depth(const std::filesystem::path& path, const DepthMap& depth);
DepthMap read_depth(const std::filesystem::path& path);

// Middlebury .flo: float magic 202021.25, int32 dims, interleaved float32
// (u, v) samples, row-major top-down.
void write_flow(const std::filesystem::path& path, const FlowField& flow);
FlowField read_flow(const std::filesystem::path& path);

// Binary PGM (P5), maxval 255; 0 = clear, 255 = set, anything else is an
// error.
void write_mask(const std::filesystem::path& path, const BinaryMask& mask);
BinaryMask read_mask(const std::filesystem::path& path);

}  // namespace vda
