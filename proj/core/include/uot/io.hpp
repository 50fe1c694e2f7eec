#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "uot/measures.hpp"

namespace uot {

/// Reads a point cloud from CSV: one row per point, d coordinate columns and an
/// optional column named `weight` (requires a header row). Without weights the
/// measure is uniform with total mass 1.
DiscreteMeasure load_measure_csv(const std::filesystem::path& path);

/// Writes points (and weights) in the format read by load_measure_csv.
void save_measure_csv(const DiscreteMeasure& measure, const std::filesystem::path& path);

/// 8-bit RGB image, row-major, 3 bytes per pixel.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> data;

  std::size_t pixel_count() const { return width * height; }
};

RgbImage load_png(const std::filesystem::path& path);
void save_png(const RgbImage& image, const std::filesystem::path& path);

/// Pixel colors as points in [0, 1]^3 (n = width * height rows).
RowMatrix image_colors(const RgbImage& image);
/// Inverse of image_colors; values are clamped to [0, 1] and rounded.
RgbImage image_from_colors(const RowMatrix& colors, std::size_t width, std::size_t height);

/// Uniformly weighted color measure of an image (total mass 1).
DiscreteMeasure measure_from_image(const RgbImage& image);

}  // namespace uot
