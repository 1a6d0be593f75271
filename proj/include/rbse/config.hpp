#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace rbse {

// Ordered key=value store backing run configs. Keys match [A-Za-z0-9_.-]+;
// later assignments win, so a file can be layered with command-line
// overrides. Rendering sorts by key, which makes frozen copies canonical.
struct KvConfig {
  std::vector<std::pair<std::string, std::string>> entries;

  bool has(const std::string& key) const noexcept;
  const std::string* find(const std::string& key) const noexcept;
  void set(const std::string& key, std::string value);

  // typed getters throw ValidationError naming the key on absence or bad parse
  std::string get_string(const std::string& key) const;
  std::string get_string_or(const std::string& key, std::string fallback) const;
  std::uint64_t get_u64(const std::string& key) const;
  std::uint64_t get_u64_or(const std::string& key, std::uint64_t fallback) const;
  int get_int(const std::string& key) const;
  int get_int_or(const std::string& key, int fallback) const;
  double get_double(const std::string& key) const;
  double get_double_or(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key) const;  // true|false|1|0
  bool get_bool_or(const std::string& key, bool fallback) const;

  bool operator==(const KvConfig&) const = default;
};

// One "key = value" assignment per line; blank lines and lines starting with
// '#' are skipped; values are trimmed and must not span lines.
KvConfig parse_config(const std::string& text);
KvConfig load_config(const std::filesystem::path& path);

std::string render_config(const KvConfig& cfg);
void save_config(const KvConfig& cfg, const std::filesystem::path& path);

// each definition is "key=value", applied in order on top of cfg
void apply_overrides(KvConfig& cfg, std::span<const std::string> defs);

}  // namespace rbse
