#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hsivis {

enum class ColorSpace { RGB, Lab };

// 3-channel image, channel-major (all of channel 0, then 1, then 2),
// same row-major pixel order as SpectralCube.
struct ColorImage {
  ColorSpace space = ColorSpace::RGB;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> data;  // 3 * height * width

  std::size_t pixels() const { return height * width; }

  std::size_t pixel_index(std::size_t row, std::size_t col) const {
    return row * width + col;
  }

  double& at(std::size_t channel, std::size_t pixel) {
    return data[channel * pixels() + pixel];
  }
  double at(std::size_t channel, std::size_t pixel) const {
    return data[channel * pixels() + pixel];
  }
};

namespace detail {

// PPM header token reader: skips whitespace and # comments.
inline std::string next_ppm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

inline std::size_t parse_ppm_dim(const std::string& tok, const char* what) {
  if (tok.empty()) throw std::runtime_error(std::string("ppm header truncated before ") + what);
  std::size_t v = 0;
  for (char ch : tok) {
    if (ch < '0' || ch > '9') {
      throw std::runtime_error(std::string("ppm header has non-numeric ") + what);
    }
    v = v * 10 + static_cast<std::size_t>(ch - '0');
  }
  return v;
}

inline const double kRgbToLms[3][3] = {
    {0.3811, 0.5783, 0.0402},
    {0.1967, 0.7244, 0.0782},
    {0.0241, 0.1288, 0.8444},
};

// diag(1/sqrt(3), 1/sqrt(6), 1/sqrt(2)) * [[1,1,1],[1,1,-2],[1,-1,0]].
// Rows are orthonormal, so the inverse is the transpose.
inline void log_lms_to_lab(const double x[3], double out[3]) {
  const double s3 = 1.0 / std::sqrt(3.0);
  const double s6 = 1.0 / std::sqrt(6.0);
  const double s2 = 1.0 / std::sqrt(2.0);
  out[0] = s3 * (x[0] + x[1] + x[2]);
  out[1] = s6 * (x[0] + x[1] - 2.0 * x[2]);
  out[2] = s2 * (x[0] - x[1]);
}

inline void lab_to_log_lms(const double x[3], double out[3]) {
  const double s3 = 1.0 / std::sqrt(3.0);
  const double s6 = 1.0 / std::sqrt(6.0);
  const double s2 = 1.0 / std::sqrt(2.0);
  out[0] = s3 * x[0] + s6 * x[1] + s2 * x[2];
  out[1] = s3 * x[0] + s6 * x[1] - s2 * x[2];
  out[2] = s3 * x[0] - 2.0 * s6 * x[1];
}

inline void mat3_vec(const double m[3][3], const double x[3], double out[3]) {
  for (int r = 0; r < 3; ++r) {
    out[r] = m[r][0] * x[0] + m[r][1] * x[1] + m[r][2] * x[2];
  }
}

inline void mat3_inverse(const double m[3][3], double out[3][3]) {
  const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                     m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  const double inv = 1.0 / det;
  out[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * inv;
  out[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv;
  out[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv;
  out[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * inv;
  out[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv;
  out[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv;
  out[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * inv;
  out[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv;
  out[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv;
}

}  // namespace detail

inline constexpr double kLogFloor = 1e-4;

inline ColorImage read_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open image: " + path);

  std::string magic = detail::next_ppm_token(in);
  if (magic != "P6") {
    throw std::runtime_error("not a binary PPM (P6) file: " + path);
  }
  const std::size_t width = detail::parse_ppm_dim(detail::next_ppm_token(in), "width");
  const std::size_t height = detail::parse_ppm_dim(detail::next_ppm_token(in), "height");
  const std::size_t maxval = detail::parse_ppm_dim(detail::next_ppm_token(in), "maxval");
  if (width < 1 || height < 1) {
    throw std::runtime_error("ppm has empty pixel grid: " + path);
  }
  if (maxval != 255) {
    throw std::runtime_error("ppm maxval must be 255: " + path);
  }

  const std::size_t m = width * height;
  std::vector<unsigned char> bytes(m * 3);
  in.read(reinterpret_cast<char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size()) {
    throw std::runtime_error("ppm payload truncated: " + path);
  }

  ColorImage img;
  img.space = ColorSpace::RGB;
  img.height = height;
  img.width = width;
  img.data.resize(3 * m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      img.data[c * m + i] = static_cast<double>(bytes[i * 3 + c]) / 255.0;
    }
  }
  return img;
}

inline void write_image(const ColorImage& img, const std::string& path) {
  if (img.space != ColorSpace::RGB) {
    throw std::invalid_argument("write_image needs an RGB image");
  }
  const std::size_t m = img.pixels();
  if (m == 0 || img.data.size() != 3 * m) {
    throw std::invalid_argument("image dimensions do not match data");
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write image: " + path);
  out << "P6\n" << img.width << " " << img.height << "\n255\n";

  std::vector<unsigned char> bytes(m * 3);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      double v = img.data[c * m + i];
      if (v < 0.0) v = 0.0;
      if (v > 1.0) v = 1.0;
      bytes[i * 3 + c] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw std::runtime_error("failed writing image: " + path);
}

// RGB -> log-LMS -> decorrelated Lab. Channels are floored at kLogFloor
// before the log so black pixels stay finite.
inline ColorImage rgb_to_lab(const ColorImage& img) {
  if (img.space != ColorSpace::RGB) {
    throw std::invalid_argument("rgb_to_lab needs an RGB image");
  }
  const std::size_t m = img.pixels();
  ColorImage out;
  out.space = ColorSpace::Lab;
  out.height = img.height;
  out.width = img.width;
  out.data.resize(3 * m);
  for (std::size_t i = 0; i < m; ++i) {
    double rgb[3];
    for (std::size_t c = 0; c < 3; ++c) {
      rgb[c] = img.data[c * m + i];
      if (rgb[c] < kLogFloor) rgb[c] = kLogFloor;
    }
    double lms[3];
    detail::mat3_vec(detail::kRgbToLms, rgb, lms);
    double loglms[3];
    for (int c = 0; c < 3; ++c) loglms[c] = std::log10(lms[c]);
    double lab[3];
    detail::log_lms_to_lab(loglms, lab);
    for (std::size_t c = 0; c < 3; ++c) out.data[c * m + i] = lab[c];
  }
  return out;
}

inline ColorImage lab_to_rgb(const ColorImage& img) {
  if (img.space != ColorSpace::Lab) {
    throw std::invalid_argument("lab_to_rgb needs a Lab image");
  }
  double lms_to_rgb[3][3];
  detail::mat3_inverse(detail::kRgbToLms, lms_to_rgb);

  const std::size_t m = img.pixels();
  ColorImage out;
  out.space = ColorSpace::RGB;
  out.height = img.height;
  out.width = img.width;
  out.data.resize(3 * m);
  for (std::size_t i = 0; i < m; ++i) {
    double lab[3];
    for (std::size_t c = 0; c < 3; ++c) lab[c] = img.data[c * m + i];
    double loglms[3];
    detail::lab_to_log_lms(lab, loglms);
    double lms[3];
    for (int c = 0; c < 3; ++c) lms[c] = std::pow(10.0, loglms[c]);
    double rgb[3];
    detail::mat3_vec(lms_to_rgb, lms, rgb);
    for (std::size_t c = 0; c < 3; ++c) {
      double v = rgb[c];
      if (v < 0.0) v = 0.0;
      if (v > 1.0) v = 1.0;
      out.data[c * m + i] = v;
    }
  }
  return out;
}

}  // namespace hsivis
