#ifndef IRSFS_IO_HPP
#define IRSFS_IO_HPP

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <png.h>

#include <json.hpp>

#include "irsfs/grid.hpp"

namespace irsfs {

namespace detail {

inline std::string lower_extension(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return ext;
}

inline std::uint32_t byteswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0x0000ff00u) | ((v << 8) & 0x00ff0000u) | (v << 24);
}

inline void skip_space_and_comments(std::istream& in) {
  while (true) {
    const int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (c != EOF && std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
}

struct PngImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint16_t> samples;  // row-major, interleaved channels
};

inline PngImage read_png(const std::filesystem::path& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "rb"), &std::fclose);
  if (!fp) throw Error("cannot open PNG file: " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw Error("not a PNG file: " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("libpng initialisation failed");
  }
  PngImage img;
  std::vector<png_bytep> rows;
  std::vector<png_byte> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("corrupt PNG file: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
    depth = 8;
  }
  png_set_strip_alpha(png);
  if (depth == 16 && std::endian::native == std::endian::little) png_set_swap(png);
  png_read_update_info(png, info);

  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.channels = png_get_channels(png, info);
  img.bit_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * static_cast<std::size_t>(img.height));
  rows.resize(static_cast<std::size_t>(img.height));
  for (int r = 0; r < img.height; ++r) rows[r] = buffer.data() + rowbytes * static_cast<std::size_t>(r);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t n = static_cast<std::size_t>(img.width) * img.height * img.channels;
  img.samples.resize(n);
  if (img.bit_depth == 16) {
    for (std::size_t i = 0; i < n; ++i) {
      std::uint16_t v;
      std::memcpy(&v, buffer.data() + 2 * i, 2);
      img.samples[i] = v;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) img.samples[i] = buffer[i];
  }
  return img;
}

inline void write_png_gray16(const std::filesystem::path& path, int width, int height,
                             const std::vector<std::uint16_t>& samples) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "wb"), &std::fclose);
  if (!fp) throw Error("cannot write PNG file: " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error("libpng initialisation failed");
  }
  std::vector<png_byte> row(static_cast<std::size_t>(width) * 2);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("failed writing PNG file: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, width, height, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const std::uint16_t v = samples[static_cast<std::size_t>(r) * width + c];
      row[2 * c] = static_cast<png_byte>(v >> 8);  // PNG is big-endian
      row[2 * c + 1] = static_cast<png_byte>(v & 0xff);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace detail

/// Reads a PFM file ("Pf" grayscale or "PF" colour, averaged to gray).
/// Rows are stored bottom-to-top on disk; the grid is top-to-bottom.
/// The mask is left fully valid; callers decide what counts as a hole.
inline Grid2D read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open PFM file: " + path.string());
  std::string magic;
  in >> magic;
  int channels = 0;
  if (magic == "Pf") channels = 1;
  else if (magic == "PF") channels = 3;
  else throw Error("bad PFM magic in " + path.string());
  int width = 0, height = 0;
  double scale = 0.0;
  detail::skip_space_and_comments(in);
  in >> width;
  detail::skip_space_and_comments(in);
  in >> height;
  detail::skip_space_and_comments(in);
  in >> scale;
  if (!in || width <= 0 || height <= 0 || scale == 0.0 || !std::isfinite(scale))
    throw Error("bad PFM header in " + path.string());
  in.get();  // single whitespace before the raster
  const bool little = scale < 0.0;

  const std::size_t n = static_cast<std::size_t>(width) * height * channels;
  std::vector<std::uint32_t> raw(n);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n * 4));
  if (in.gcount() != static_cast<std::streamsize>(n * 4))
    throw Error("truncated PFM raster in " + path.string());
  const bool swap = little != (std::endian::native == std::endian::little);

  Grid2D g(width, height);
  for (int r = 0; r < height; ++r) {
    const int src_row = height - 1 - r;
    for (int c = 0; c < width; ++c) {
      double acc = 0.0;
      for (int k = 0; k < channels; ++k) {
        std::uint32_t bits = raw[(static_cast<std::size_t>(src_row) * width + c) * channels + k];
        if (swap) bits = detail::byteswap32(bits);
        acc += static_cast<double>(std::bit_cast<float>(bits));
      }
      g(r, c) = channels == 1 ? acc : acc / channels;
    }
  }
  return g;
}

/// Writes a little-endian "Pf" file. Masked-out pixels are stored as 0.
inline void write_pfm(const Grid2D& g, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write PFM file: " + path.string());
  out << "Pf\n" << g.width() << " " << g.height() << "\n-1.0\n";
  std::vector<float> row(static_cast<std::size_t>(g.width()));
  for (int r = g.height() - 1; r >= 0; --r) {
    for (int c = 0; c < g.width(); ++c) row[c] = g.valid(r, c) ? static_cast<float>(g(r, c)) : 0.0f;
    if constexpr (std::endian::native == std::endian::little) {
      out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
    } else {
      for (float v : row) {
        const std::uint32_t bits = detail::byteswap32(std::bit_cast<std::uint32_t>(v));
        out.write(reinterpret_cast<const char*>(&bits), 4);
      }
    }
  }
  if (!out) throw Error("failed writing PFM file: " + path.string());
}

/// Sidecar holding the metric scale of a 16-bit depth PNG: `<png>.json`,
/// falling back to the PNG path with its extension replaced by `.json`.
inline std::filesystem::path depth_sidecar_path(const std::filesystem::path& png) {
  std::filesystem::path appended = png;
  appended += ".json";
  if (std::filesystem::exists(appended)) return appended;
  std::filesystem::path replaced = png;
  replaced.replace_extension(".json");
  if (std::filesystem::exists(replaced)) return replaced;
  return appended;
}

inline double read_depth_scale(const std::filesystem::path& png) {
  const auto sidecar = depth_sidecar_path(png);
  std::ifstream in(sidecar);
  if (!in) throw Error("missing depth scale sidecar: " + sidecar.string());
  try {
    const double scale = nlohmann::json::parse(in).at("scale_m_per_unit").get<double>();
    if (!(scale > 0.0) || !std::isfinite(scale)) throw Error("scale_m_per_unit must be positive");
    return scale;
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid depth sidecar " + sidecar.string() + ": " + e.what());
  }
}

/// Loads a depth map in meters. Zero and non-finite pixels are holes.
inline Grid2D load_depth(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error("depth file not found: " + path.string());
  const std::string ext = detail::lower_extension(path);
  Grid2D g;
  if (ext == ".pfm") {
    g = read_pfm(path);
  } else if (ext == ".png") {
    const auto img = detail::read_png(path);
    if (img.channels != 1 || img.bit_depth != 16)
      throw Error("depth PNG must be single-channel 16-bit: " + path.string());
    const double scale = read_depth_scale(path);
    g = Grid2D(img.width, img.height);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = img.samples[i] * scale;
  } else {
    throw Error("unsupported depth format: " + path.string());
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] == 0.0 || !std::isfinite(g[i])) {
      g[i] = 0.0;
      g.set_valid(i, false);
    }
  }
  return g;
}

inline void save_depth(const Grid2D& g, const std::filesystem::path& path) { write_pfm(g, path); }

/// Writes a 16-bit depth PNG plus its `<png>.json` scale sidecar. Holes are 0.
inline void save_depth_png(const Grid2D& g, const std::filesystem::path& path, double scale_m_per_unit) {
  if (!(scale_m_per_unit > 0.0)) throw Error("depth PNG scale must be positive");
  std::vector<std::uint16_t> samples(g.size(), 0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!g.valid(i)) continue;
    const double units = std::round(g[i] / scale_m_per_unit);
    if (units < 1.0 || units > 65535.0) throw Error("depth value out of 16-bit PNG range");
    samples[i] = static_cast<std::uint16_t>(units);
  }
  detail::write_png_gray16(path, g.width(), g.height(), samples);
  std::filesystem::path sidecar = path;
  sidecar += ".json";
  std::ofstream out(sidecar);
  if (!out) throw Error("cannot write depth sidecar: " + sidecar.string());
  out << nlohmann::json{{"scale_m_per_unit", scale_m_per_unit}}.dump() << "\n";
}

/// Loads an IR image normalised to [0,1]: PNG samples are divided by their
/// full-scale value, PFM values are taken as already normalised. Colour
/// inputs are averaged. Non-finite pixels are masked out.
inline Grid2D load_ir(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error("IR file not found: " + path.string());
  const std::string ext = detail::lower_extension(path);
  Grid2D g;
  if (ext == ".pfm") {
    g = read_pfm(path);
  } else if (ext == ".png") {
    const auto img = detail::read_png(path);
    const double full = img.bit_depth == 16 ? 65535.0 : 255.0;
    g = Grid2D(img.width, img.height);
    for (std::size_t i = 0; i < g.size(); ++i) {
      double acc = 0.0;
      for (int k = 0; k < img.channels; ++k) acc += img.samples[i * img.channels + k];
      g[i] = acc / (img.channels * full);
    }
  } else {
    throw Error("unsupported IR format: " + path.string());
  }
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!std::isfinite(g[i])) g.set_valid(i, false);
  return g;
}

/// Writes an intensity image in [0,1] as a 16-bit PNG.
inline void save_ir_png(const Grid2D& g, const std::filesystem::path& path) {
  std::vector<std::uint16_t> samples(g.size(), 0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!g.valid(i)) continue;
    samples[i] = static_cast<std::uint16_t>(std::lround(std::clamp(g[i], 0.0, 1.0) * 65535.0));
  }
  detail::write_png_gray16(path, g.width(), g.height(), samples);
}

}  // namespace irsfs

#endif  // IRSFS_IO_HPP
