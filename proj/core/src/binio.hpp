// Shared helpers for the versioned little-endian binary file formats.
#pragma once

#include <cstddef>
#include <fstream>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace jaclab::binio {

inline void write_bytes(std::ofstream& f, const void* p, std::size_t len) {
  f.write(static_cast<const char*>(p), static_cast<std::streamsize>(len));
}

template <typename T>
void write_pod(std::ofstream& f, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  write_bytes(f, &v, sizeof(v));
}

inline void read_bytes(std::ifstream& f, void* p, std::size_t len,
                       const char* what) {
  f.read(static_cast<char*>(p), static_cast<std::streamsize>(len));
  if (f.gcount() != static_cast<std::streamsize>(len)) {
    throw std::runtime_error(std::string("truncated file (") + what + ")");
  }
}

template <typename T>
T read_pod(std::ifstream& f, const char* what) {
  T v;
  read_bytes(f, &v, sizeof(v), what);
  return v;
}

inline void expect_eof(std::ifstream& f, const char* what) {
  f.peek();
  if (!f.eof()) {
    throw std::runtime_error(std::string(what) +
                             ": trailing bytes after records");
  }
}

}  // namespace jaclab::binio
