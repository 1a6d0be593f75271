#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rbse/ensemble.hpp"
#include "rbse/rbm.hpp"

namespace rbse {

inline constexpr int kModelFormatVersion = 1;

enum class ModelKind { rbm, rbse_bernoulli, rbse_gaussian };

std::string model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(const std::string& name);

// Training provenance carried inside the model file.
struct Provenance {
  std::string config_sha256;  // hash of the frozen run config; empty when untracked
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  bool operator==(const Provenance&) const = default;
};

// A persisted model. Exactly one of `rbm` / `ensemble` is live, selected by
// `kind`; the other stays default-constructed.
struct ModelFile {
  ModelKind kind = ModelKind::rbm;
  RbmParams rbm;
  EnsembleParams ensemble;
  Provenance provenance;

  std::size_t visible() const noexcept;
  std::size_t hidden() const noexcept;
  void validate() const;  // also checks kind agrees with the ensemble family
  bool operator==(const ModelFile&) const = default;
};

ModelFile model_from_rbm(RbmParams params, Provenance prov = {});
ModelFile model_from_ensemble(EnsembleParams params, Provenance prov = {});

// JSON text with each parameter plane as base64 little-endian float64.
// Encoding is canonical: decode(encode(m)) == m and re-encoding reproduces
// the exact bytes, so saved files survive round trips untouched.
std::string encode_model(const ModelFile& model);
ModelFile decode_model(const std::string& text);  // IoError on malformed or wrong version

void save_model(const ModelFile& model, const std::filesystem::path& path);
ModelFile load_model(const std::filesystem::path& path);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);

}  // namespace rbse
