#pragma once

#include <charconv>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>

namespace hsivis {

// Shortest decimal string that round-trips to the same double.
inline std::string format_shortest(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) {
    throw std::runtime_error("format_shortest: conversion failed");
  }
  return std::string(buf, ptr);
}

// 17 significant digits, enough for an exact double round trip.
inline std::string format_sig17(double v) {
  char buf[64];
  auto [ptr, ec] =
      std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  if (ec != std::errc()) {
    throw std::runtime_error("format_sig17: conversion failed");
  }
  return std::string(buf, ptr);
}

inline double parse_double(std::string_view text, std::string_view what) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  while (first != last && (*first == ' ' || *first == '\t')) ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc()) {
    throw std::runtime_error("failed to parse " + std::string(what) +
                             " from '" + std::string(text) + "'");
  }
  for (; ptr != last; ++ptr) {
    if (*ptr != ' ' && *ptr != '\t' && *ptr != '\r') {
      throw std::runtime_error("trailing characters after " +
                               std::string(what) + " in '" + std::string(text) +
                               "'");
    }
  }
  return v;
}

inline long long parse_int(std::string_view text, std::string_view what) {
  long long v = 0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  while (first != last && (*first == ' ' || *first == '\t')) ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc()) {
    throw std::runtime_error("failed to parse " + std::string(what) +
                             " from '" + std::string(text) + "'");
  }
  for (; ptr != last; ++ptr) {
    if (*ptr != ' ' && *ptr != '\t' && *ptr != '\r') {
      throw std::runtime_error("trailing characters after " +
                               std::string(what) + " in '" + std::string(text) +
                               "'");
    }
  }
  return v;
}

}  // namespace hsivis
