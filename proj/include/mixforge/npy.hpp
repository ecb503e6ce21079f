#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "mixforge/errors.hpp"

namespace mixforge {

// Minimal NPY (version 1.0) reader/writer for float32/float64 tensors,
// little-endian only. This is the array-interchange format batches and
// checkpoints are stored in.

static_assert(std::endian::native == std::endian::little,
              "tensor interchange assumes a little-endian host");

namespace detail {

inline std::string npy_shape_string(std::span<const std::size_t> shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) s += ", ";
    s += std::to_string(shape[i]);
  }
  if (shape.size() == 1) s += ",";
  s += ")";
  return s;
}

template <typename T>
constexpr const char* npy_descr() {
  if constexpr (sizeof(T) == 4) return "<f4";
  else return "<f8";
}

}  // namespace detail

template <typename T>
void write_npy(const std::filesystem::path& path, std::span<const T> values,
               std::span<const std::size_t> shape) {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  std::size_t count = 1;
  for (std::size_t d : shape) count *= d;
  if (count != values.size()) {
    throw ShapeError("write_npy: shape does not match value count for " + path.string());
  }

  std::string header = "{'descr': '";
  header += detail::npy_descr<T>();
  header += "', 'fortran_order': False, 'shape': ";
  header += detail::npy_shape_string(shape);
  header += ", }";
  // total header (magic + version + len field + dict) padded to 64 bytes
  const std::size_t unpadded = 10 + header.size() + 1;
  const std::size_t padding = (64 - unpadded % 64) % 64;
  header.append(padding, ' ');
  header += '\n';

  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  out.write("\x93NUMPY\x01\x00", 8);
  const auto hlen = static_cast<std::uint16_t>(header.size());
  out.write(reinterpret_cast<const char*>(&hlen), 2);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(T)));
  if (!out) throw FormatError("write failed: " + path.string());
}

struct NpyTensor {
  std::string descr;                // "<f4" or "<f8"
  std::vector<std::size_t> shape;
  std::vector<float> f32;           // populated when descr == "<f4"
  std::vector<double> f64;          // populated when descr == "<f8"

  std::size_t count() const {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
  }
};

inline NpyTensor read_npy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open: " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "\x93NUMPY\x01\x00", 8) != 0) {
    throw FormatError("not an NPY v1.0 file: " + path.string());
  }
  std::uint16_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), 2);
  std::string header(hlen, '\0');
  in.read(header.data(), hlen);
  if (!in) throw FormatError("truncated NPY header: " + path.string());

  NpyTensor t;
  const auto dpos = header.find("'descr':");
  const auto q1 = header.find('\'', dpos + 8);
  const auto q2 = header.find('\'', q1 + 1);
  if (dpos == std::string::npos || q2 == std::string::npos) {
    throw FormatError("malformed NPY header: " + path.string());
  }
  t.descr = header.substr(q1 + 1, q2 - q1 - 1);
  if (t.descr != "<f4" && t.descr != "<f8") {
    throw FormatError("unsupported NPY dtype '" + t.descr + "': " + path.string());
  }
  if (header.find("'fortran_order': False") == std::string::npos) {
    throw FormatError("fortran-order NPY not supported: " + path.string());
  }
  const auto p1 = header.find('(');
  const auto p2 = header.find(')', p1);
  if (p1 == std::string::npos || p2 == std::string::npos) {
    throw FormatError("malformed NPY shape: " + path.string());
  }
  std::string dims = header.substr(p1 + 1, p2 - p1 - 1);
  std::size_t pos = 0;
  while (pos < dims.size()) {
    while (pos < dims.size() && (dims[pos] == ' ' || dims[pos] == ',')) ++pos;
    if (pos >= dims.size()) break;
    std::size_t used = 0;
    t.shape.push_back(std::stoull(dims.substr(pos), &used));
    pos += used;
  }

  const std::size_t n = t.count();
  if (t.descr == "<f4") {
    t.f32.resize(n);
    in.read(reinterpret_cast<char*>(t.f32.data()),
            static_cast<std::streamsize>(n * sizeof(float)));
  } else {
    t.f64.resize(n);
    in.read(reinterpret_cast<char*>(t.f64.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
  }
  if (!in) throw FormatError("truncated NPY payload: " + path.string());
  return t;
}

}  // namespace mixforge
