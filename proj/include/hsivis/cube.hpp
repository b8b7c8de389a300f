#pragma once

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hsivis/text_format.hpp"

namespace hsivis {

// Band-sequential spectral cube: p bands over an h*w row-major pixel grid.
// Values live in doubles in memory; the on-disk payload is float32, and
// read_cube widens exactly, so a cube that came from disk round-trips
// bit-identically.
struct SpectralCube {
  std::size_t bands = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> data;  // bands * height * width, band-major
  std::optional<std::vector<double>> band_wavelengths;

  std::size_t pixels() const { return height * width; }

  std::size_t pixel_index(std::size_t row, std::size_t col) const {
    return row * width + col;
  }
  std::size_t row_of(std::size_t pixel) const { return pixel / width; }
  std::size_t col_of(std::size_t pixel) const { return pixel % width; }

  double& at(std::size_t band, std::size_t pixel) {
    return data[band * pixels() + pixel];
  }
  double at(std::size_t band, std::size_t pixel) const {
    return data[band * pixels() + pixel];
  }

  void validate() const {
    if (bands < 1) throw std::invalid_argument("cube needs at least one band");
    if (height < 1 || width < 1) {
      throw std::invalid_argument("cube needs a nonempty pixel grid");
    }
    if (data.size() != bands * pixels()) {
      throw std::invalid_argument("cube data size does not match dimensions");
    }
    for (double v : data) {
      if (!std::isfinite(v)) {
        throw std::invalid_argument("cube contains non-finite values");
      }
    }
    if (band_wavelengths && band_wavelengths->size() != bands) {
      throw std::invalid_argument("wavelength list length != band count");
    }
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r'))
    --e;
  return std::string(s.substr(b, e - b));
}

inline std::filesystem::path raw_path_for(const std::filesystem::path& hdr) {
  std::filesystem::path p = hdr;
  p.replace_extension(".raw");
  return p;
}

inline float float_from_le(const unsigned char b[4]) {
  std::uint32_t u = std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
                    (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
  return std::bit_cast<float>(u);
}

inline void float_to_le(float v, unsigned char b[4]) {
  std::uint32_t u = std::bit_cast<std::uint32_t>(v);
  b[0] = static_cast<unsigned char>(u & 0xff);
  b[1] = static_cast<unsigned char>((u >> 8) & 0xff);
  b[2] = static_cast<unsigned char>((u >> 16) & 0xff);
  b[3] = static_cast<unsigned char>((u >> 24) & 0xff);
}

// Pixel-major copy of the cube: signatures[i*p + b] = value of band b at
// pixel i. Distance loops walk contiguous memory this way.
inline std::vector<double> pixel_signatures(const SpectralCube& cube) {
  const std::size_t n = cube.pixels();
  const std::size_t p = cube.bands;
  std::vector<double> sig(n * p);
  for (std::size_t b = 0; b < p; ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      sig[i * p + b] = cube.data[b * n + i];
    }
  }
  return sig;
}

inline double squared_distance(const double* a, const double* b,
                               std::size_t p) {
  double d2 = 0.0;
  for (std::size_t c = 0; c < p; ++c) {
    const double d = a[c] - b[c];
    d2 += d * d;
  }
  return d2;
}

}  // namespace detail

// Header is a text file of `key = value` lines. Required keys: samples,
// lines, bands, data type (must be 4), interleave (must be bsq), byte order
// (must be 0). Anything else is ignored. The raw payload sits next to the
// header with the extension swapped to .raw.
inline SpectralCube read_cube(const std::string& header_path) {
  std::ifstream hdr(header_path);
  if (!hdr) {
    throw std::runtime_error("cannot open cube header: " + header_path);
  }

  std::optional<long long> samples, lines, bands, data_type, byte_order;
  std::optional<std::string> interleave;

  std::string line;
  while (std::getline(hdr, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = detail::trim(std::string_view(line).substr(0, eq));
    std::string value = detail::trim(std::string_view(line).substr(eq + 1));
    if (key == "samples") {
      samples = parse_int(value, "samples");
    } else if (key == "lines") {
      lines = parse_int(value, "lines");
    } else if (key == "bands") {
      bands = parse_int(value, "bands");
    } else if (key == "data type") {
      data_type = parse_int(value, "data type");
    } else if (key == "interleave") {
      interleave = value;
    } else if (key == "byte order") {
      byte_order = parse_int(value, "byte order");
    }
  }

  if (!samples || !lines || !bands || !data_type || !interleave ||
      !byte_order) {
    throw std::runtime_error("cube header missing required keys: " +
                             header_path);
  }
  if (*samples < 1 || *lines < 1 || *bands < 1) {
    throw std::runtime_error("cube header has non-positive dimensions: " +
                             header_path);
  }
  if (*data_type != 4) {
    throw std::runtime_error("unsupported data type " +
                             std::to_string(*data_type) +
                             " (only 4 = float32)");
  }
  if (*interleave != "bsq") {
    throw std::runtime_error("unsupported interleave '" + *interleave +
                             "' (only bsq)");
  }
  if (*byte_order != 0) {
    throw std::runtime_error("unsupported byte order " +
                             std::to_string(*byte_order) +
                             " (only 0 = little-endian)");
  }

  SpectralCube cube;
  cube.bands = static_cast<std::size_t>(*bands);
  cube.height = static_cast<std::size_t>(*lines);
  cube.width = static_cast<std::size_t>(*samples);

  const std::filesystem::path raw = detail::raw_path_for(header_path);
  std::ifstream rf(raw, std::ios::binary);
  if (!rf) {
    throw std::runtime_error("cannot open cube raw file: " + raw.string());
  }
  const std::size_t count = cube.bands * cube.pixels();
  std::vector<unsigned char> bytes(count * 4);
  rf.read(reinterpret_cast<char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(rf.gcount()) != bytes.size()) {
    throw std::runtime_error("cube raw file shorter than header implies: " +
                             raw.string());
  }
  char probe;
  if (rf.read(&probe, 1)) {
    throw std::runtime_error("cube raw file longer than header implies: " +
                             raw.string());
  }

  cube.data.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    cube.data[i] = static_cast<double>(detail::float_from_le(&bytes[i * 4]));
    if (!std::isfinite(cube.data[i])) {
      throw std::runtime_error("cube raw file contains non-finite value at " +
                               std::to_string(i));
    }
  }
  return cube;
}

inline void write_cube(const SpectralCube& cube, const std::string& header_path) {
  cube.validate();

  std::ofstream hdr(header_path, std::ios::trunc);
  if (!hdr) {
    throw std::runtime_error("cannot write cube header: " + header_path);
  }
  hdr << "samples = " << cube.width << "\n";
  hdr << "lines = " << cube.height << "\n";
  hdr << "bands = " << cube.bands << "\n";
  hdr << "data type = 4\n";
  hdr << "interleave = bsq\n";
  hdr << "byte order = 0\n";
  hdr.flush();
  if (!hdr) {
    throw std::runtime_error("failed writing cube header: " + header_path);
  }

  const std::filesystem::path raw = detail::raw_path_for(header_path);
  std::ofstream rf(raw, std::ios::binary | std::ios::trunc);
  if (!rf) {
    throw std::runtime_error("cannot write cube raw file: " + raw.string());
  }
  std::vector<unsigned char> bytes(cube.data.size() * 4);
  for (std::size_t i = 0; i < cube.data.size(); ++i) {
    const float v = static_cast<float>(cube.data[i]);
    if (!std::isfinite(v)) {
      throw std::runtime_error("cube value at " + std::to_string(i) +
                               " does not fit float32");
    }
    detail::float_to_le(v, &bytes[i * 4]);
  }
  rf.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
  rf.flush();
  if (!rf) {
    throw std::runtime_error("failed writing cube raw file: " + raw.string());
  }
}

}  // namespace hsivis
