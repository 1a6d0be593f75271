#include "rbse/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <string_view>

#include "rbse/errors.hpp"
#include "rbse/fs.hpp"

namespace rbse {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(std::uint8_t(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(std::uint8_t(s.back()))) s.remove_suffix(1);
  return s;
}

bool valid_key(std::string_view key) {
  if (key.empty()) return false;
  for (char c : key)
    if (!std::isalnum(std::uint8_t(c)) && c != '_' && c != '.' && c != '-') return false;
  return true;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw ValidationError("config key '" + key + "': cannot parse '" + value + "' as " + want);
}

}  // namespace

bool KvConfig::has(const std::string& key) const noexcept { return find(key) != nullptr; }

const std::string* KvConfig::find(const std::string& key) const noexcept {
  for (const auto& [k, v] : entries)
    if (k == key) return &v;
  return nullptr;
}

void KvConfig::set(const std::string& key, std::string value) {
  if (!valid_key(key)) throw ValidationError("config key '" + key + "' is not a valid name");
  if (value.find('\n') != std::string::npos)
    throw ValidationError("config key '" + key + "': value must not span lines");
  for (auto& [k, v] : entries)
    if (k == key) {
      v = std::move(value);
      return;
    }
  entries.emplace_back(key, std::move(value));
}

std::string KvConfig::get_string(const std::string& key) const {
  const std::string* v = find(key);
  if (!v) throw ValidationError("config key '" + key + "' is missing");
  return *v;
}

std::string KvConfig::get_string_or(const std::string& key, std::string fallback) const {
  const std::string* v = find(key);
  return v ? *v : std::move(fallback);
}

std::uint64_t KvConfig::get_u64(const std::string& key) const {
  const std::string v = get_string(key);
  std::uint64_t out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) bad_value(key, v, "an unsigned integer");
  return out;
}

std::uint64_t KvConfig::get_u64_or(const std::string& key, std::uint64_t fallback) const {
  return has(key) ? get_u64(key) : fallback;
}

int KvConfig::get_int(const std::string& key) const {
  const std::string v = get_string(key);
  int out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

int KvConfig::get_int_or(const std::string& key, int fallback) const {
  return has(key) ? get_int(key) : fallback;
}

double KvConfig::get_double(const std::string& key) const {
  const std::string v = get_string(key);
  double out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

double KvConfig::get_double_or(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

bool KvConfig::get_bool(const std::string& key) const {
  const std::string v = get_string(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "a boolean (true|false|1|0)");
}

bool KvConfig::get_bool_or(const std::string& key, bool fallback) const {
  return has(key) ? get_bool(key) : fallback;
}

KvConfig parse_config(const std::string& text) {
  KvConfig cfg;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line{text.data() + pos, (nl == std::string::npos ? text.size() : nl) - pos};
    pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ValidationError("config line " + std::to_string(line_no) +
                            ": expected 'key = value'");
    const std::string key{trim(line.substr(0, eq))};
    if (!valid_key(key))
      throw ValidationError("config line " + std::to_string(line_no) + ": invalid key '" + key +
                            "'");
    cfg.set(key, std::string{trim(line.substr(eq + 1))});
  }
  return cfg;
}

KvConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_text_file(path));
}

std::string render_config(const KvConfig& cfg) {
  auto sorted = cfg.entries;
  std::sort(sorted.begin(), sorted.end());
  std::string out;
  for (const auto& [k, v] : sorted) {
    out += k;
    out += " = ";
    out += v;
    out += '\n';
  }
  return out;
}

void save_config(const KvConfig& cfg, const std::filesystem::path& path) {
  write_text_file(path, render_config(cfg));
}

void apply_overrides(KvConfig& cfg, std::span<const std::string> defs) {
  for (const std::string& def : defs) {
    const std::size_t eq = def.find('=');
    if (eq == std::string::npos)
      throw ValidationError("override '" + def + "': expected key=value");
    cfg.set(std::string{trim(std::string_view{def}.substr(0, eq))},
            std::string{trim(std::string_view{def}.substr(eq + 1))});
  }
}

}  // namespace rbse
