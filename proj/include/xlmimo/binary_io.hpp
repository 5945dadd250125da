#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <type_traits>

#include "xlmimo/numerics.hpp"

namespace xlmimo::binio {

template <typename T>
T to_little(T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::little || sizeof(T) == 1) {
    return v;
  } else {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    std::memcpy(&v, bytes, sizeof(T));
    return v;
  }
}

class Writer {
 public:
  explicit Writer(const std::string& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing");
  }

  template <typename T>
  void put(T v) {
    v = to_little(v);
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void bytes(const std::string& s) { out_.write(s.data(), static_cast<std::streamsize>(s.size())); }

  void finish() {
    out_.flush();
    if (!out_) throw Error(ErrorKind::Io, "write to '" + path_ + "' failed");
  }

 private:
  std::string path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw Error(ErrorKind::Io, "cannot open '" + path + "' for reading");
  }

  template <typename T>
  T get() {
    T v;
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) throw Error(ErrorKind::Format, "unexpected end of file in '" + path_ + "'");
    return to_little(v);
  }
  std::string bytes(std::size_t n) {
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    if (!in_) throw Error(ErrorKind::Format, "unexpected end of file in '" + path_ + "'");
    return s;
  }
  void expect_magic(const char (&magic)[5]) {
    if (bytes(4) != std::string(magic, 4)) throw Error(ErrorKind::Format, "'" + path_ + "' has the wrong magic");
  }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ifstream in_;
};

/// Interleaved (re, im) float64 pairs in storage (row-major) order.
inline void put_matrix(Writer& w, const ComplexMatrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    w.put(m.data()[i].real());
    w.put(m.data()[i].imag());
  }
}

inline ComplexMatrix get_matrix(Reader& r, Eigen::Index rows, Eigen::Index cols) {
  ComplexMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const double re = r.get<double>();
    const double im = r.get<double>();
    m.data()[i] = cd(re, im);
  }
  return m;
}

}  // namespace xlmimo::binio
