#include "uot/io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>
#include <string>

#include "uot/error.hpp"

namespace uot {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void throw_io(const std::filesystem::path& path, const std::string& what) {
  throw Error(ErrorKind::Io, path.string() + ": " + what);
}

}  // namespace

DiscreteMeasure load_measure_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_io(path, "cannot open for reading");

  std::string line;
  std::vector<std::vector<double>> rows;
  int weight_col = -1;
  std::size_t ncols = 0;
  bool first = true;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split_csv_line(line);
    std::vector<double> values(cells.size());
    bool numeric = true;
    for (std::size_t k = 0; k < cells.size(); ++k) numeric = numeric && parse_double(cells[k], values[k]);
    if (first) {
      first = false;
      ncols = cells.size();
      if (!numeric) {
        for (std::size_t k = 0; k < cells.size(); ++k) {
          if (cells[k] == "weight") weight_col = static_cast<int>(k);
        }
        continue;
      }
    }
    if (!numeric) throw_io(path, "non-numeric value on line " + std::to_string(lineno));
    if (cells.size() != ncols) throw_io(path, "ragged row on line " + std::to_string(lineno));
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw_io(path, "no data rows");

  const std::size_t d = weight_col >= 0 ? ncols - 1 : ncols;
  if (d == 0) throw_io(path, "no coordinate columns");
  RowMatrix pts(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
  Vector w(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Eigen::Index c = 0;
    for (std::size_t k = 0; k < ncols; ++k) {
      if (static_cast<int>(k) == weight_col) {
        w[static_cast<Eigen::Index>(i)] = rows[i][k];
      } else {
        pts(static_cast<Eigen::Index>(i), c++) = rows[i][k];
      }
    }
  }
  if (weight_col < 0) return DiscreteMeasure::uniform(std::move(pts), 1.0);
  return DiscreteMeasure(std::move(pts), std::move(w));
}

void save_measure_csv(const DiscreteMeasure& measure, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw_io(path, "cannot open for writing");
  for (std::size_t k = 0; k < measure.dim(); ++k) out << "x" << k << ",";
  out << "weight\n";
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < measure.points().rows(); ++i) {
    for (Eigen::Index k = 0; k < measure.points().cols(); ++k) out << measure.points()(i, k) << ",";
    out << measure.weights()[i] << "\n";
  }
  if (!out) throw_io(path, "write failed");
}

RgbImage load_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw_io(path, "cannot open for reading");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw_io(path, "not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw_io(path, "libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw_io(path, "libpng init failed");
  }
  RgbImage img;
  std::vector<png_bytep> rows;
  int color_type = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw_io(path, "corrupt PNG data");
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  if (color_type != PNG_COLOR_TYPE_RGB && color_type != PNG_COLOR_TYPE_RGB_ALPHA &&
      color_type != PNG_COLOR_TYPE_PALETTE) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::InvalidInput, path.string() + ": image is not RGB");
  }
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  img.width = png_get_image_width(png, info);
  img.height = png_get_image_height(png, info);
  if (png_get_rowbytes(png, info) != img.width * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::InvalidInput, path.string() + ": unsupported pixel layout");
  }
  img.data.resize(img.width * img.height * 3);
  rows.resize(img.height);
  for (std::size_t r = 0; r < img.height; ++r) rows[r] = img.data.data() + r * img.width * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void save_png(const RgbImage& image, const std::filesystem::path& path) {
  if (image.data.size() != image.width * image.height * 3 || image.pixel_count() == 0) {
    throw_invalid("image buffer does not match its dimensions");
  }
  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw_io(path, "cannot open for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw_io(path, "libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw_io(path, "libpng init failed");
  }
  std::vector<png_bytep> rows(image.height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw_io(path, "PNG encoding failed");
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
               static_cast<png_uint_32>(image.height), 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t r = 0; r < image.height; ++r) {
    rows[r] = const_cast<png_bytep>(image.data.data() + r * image.width * 3);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

RowMatrix image_colors(const RgbImage& image) {
  RowMatrix colors(static_cast<Eigen::Index>(image.pixel_count()), 3);
  for (std::size_t p = 0; p < image.pixel_count(); ++p) {
    for (int c = 0; c < 3; ++c) {
      colors(static_cast<Eigen::Index>(p), c) = image.data[3 * p + static_cast<std::size_t>(c)] / 255.0;
    }
  }
  return colors;
}

RgbImage image_from_colors(const RowMatrix& colors, std::size_t width, std::size_t height) {
  if (static_cast<std::size_t>(colors.rows()) != width * height || colors.cols() != 3) {
    throw_invalid("color matrix does not match image dimensions");
  }
  RgbImage img{width, height, std::vector<std::uint8_t>(width * height * 3)};
  for (std::size_t p = 0; p < img.pixel_count(); ++p) {
    for (int c = 0; c < 3; ++c) {
      const double v = std::clamp(colors(static_cast<Eigen::Index>(p), c), 0.0, 1.0);
      img.data[3 * p + static_cast<std::size_t>(c)] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  }
  return img;
}

DiscreteMeasure measure_from_image(const RgbImage& image) {
  if (image.pixel_count() == 0) throw_invalid("empty image");
  return DiscreteMeasure::uniform(image_colors(image), 1.0);
}

}  // namespace uot
