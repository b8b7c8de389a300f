#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hsivis/text_format.hpp"

namespace hsivis {

// p x 3 linear map from spectral space to the 3-channel color space,
// row-major (weights[band * 3 + channel]).
struct ProjectionMatrix {
  std::size_t source_bands = 0;
  std::vector<double> weights;

  double& at(std::size_t band, std::size_t channel) {
    return weights[band * 3 + channel];
  }
  double at(std::size_t band, std::size_t channel) const {
    return weights[band * 3 + channel];
  }

  void validate() const {
    if (source_bands < 1) {
      throw std::invalid_argument("projection needs at least one band");
    }
    if (weights.size() != source_bands * 3) {
      throw std::invalid_argument("projection weight count != bands * 3");
    }
    for (double v : weights) {
      if (!std::isfinite(v)) {
        throw std::invalid_argument("projection contains non-finite values");
      }
    }
  }
};

// Text format: first line `p 3`, then p lines of 3 floats at full
// round-trip precision.
inline void write_projection(const ProjectionMatrix& proj,
                             const std::string& path) {
  proj.validate();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write projection: " + path);
  out << proj.source_bands << " 3\n";
  for (std::size_t b = 0; b < proj.source_bands; ++b) {
    out << format_sig17(proj.at(b, 0)) << " " << format_sig17(proj.at(b, 1))
        << " " << format_sig17(proj.at(b, 2)) << "\n";
  }
  out.flush();
  if (!out) throw std::runtime_error("failed writing projection: " + path);
}

inline ProjectionMatrix read_projection(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open projection: " + path);

  std::string header;
  if (!std::getline(in, header)) {
    throw std::runtime_error("projection file empty: " + path);
  }
  std::istringstream hs(header);
  long long p = 0, q = 0;
  if (!(hs >> p >> q) || p < 1 || q != 3) {
    throw std::runtime_error("bad projection header '" + header + "' in " +
                             path);
  }

  ProjectionMatrix proj;
  proj.source_bands = static_cast<std::size_t>(p);
  proj.weights.resize(proj.source_bands * 3);
  for (std::size_t b = 0; b < proj.source_bands; ++b) {
    std::string line;
    if (!std::getline(in, line)) {
      throw std::runtime_error("projection file truncated at row " +
                               std::to_string(b) + ": " + path);
    }
    std::istringstream ls(line);
    std::string tok;
    for (std::size_t c = 0; c < 3; ++c) {
      if (!(ls >> tok)) {
        throw std::runtime_error("projection row " + std::to_string(b) +
                                 " needs 3 values: " + path);
      }
      proj.at(b, c) = parse_double(tok, "projection weight");
    }
    if (std::string extra; ls >> extra) {
      throw std::runtime_error("projection row " + std::to_string(b) +
                               " has extra values: " + path);
    }
  }
  proj.validate();
  return proj;
}

}  // namespace hsivis
