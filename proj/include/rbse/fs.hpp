#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "rbse/errors.hpp"

namespace rbse {

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (!in.good() && !in.eof()) throw IoError("read failure on " + path.string());
  return bytes;
}

inline void write_file_bytes(const std::filesystem::path& path, const std::uint8_t* data,
                             std::size_t n) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(data), std::streamsize(n));
  if (!out) throw IoError("write failure on " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return {bytes.begin(), bytes.end()};
}

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
  write_file_bytes(path, reinterpret_cast<const std::uint8_t*>(text.data()), text.size());
}

}  // namespace rbse
