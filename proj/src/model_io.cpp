#include "rbse/model_io.hpp"

#include <array>
#include <cstring>

#include "json.hpp"
#include "rbse/errors.hpp"
#include "rbse/fs.hpp"

namespace rbse {

std::string model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::rbm: return "rbm";
    case ModelKind::rbse_bernoulli: return "rbse-bernoulli";
    default: return "rbse-gaussian";
  }
}

ModelKind model_kind_from_name(const std::string& name) {
  if (name == "rbm") return ModelKind::rbm;
  if (name == "rbse-bernoulli") return ModelKind::rbse_bernoulli;
  if (name == "rbse-gaussian") return ModelKind::rbse_gaussian;
  throw ValidationError("unknown model kind '" + name + "' (rbm|rbse-bernoulli|rbse-gaussian)");
}

std::size_t ModelFile::visible() const noexcept {
  return kind == ModelKind::rbm ? rbm.visible() : ensemble.visible();
}

std::size_t ModelFile::hidden() const noexcept {
  return kind == ModelKind::rbm ? rbm.hidden() : ensemble.hidden();
}

void ModelFile::validate() const {
  if (kind == ModelKind::rbm) {
    rbm.validate();
    return;
  }
  ensemble.validate();
  const Family want = kind == ModelKind::rbse_bernoulli ? Family::bernoulli : Family::gaussian;
  if (ensemble.family != want)
    throw ValidationError("model file: kind " + model_kind_name(kind) +
                          " does not match the ensemble family");
}

ModelFile model_from_rbm(RbmParams params, Provenance prov) {
  ModelFile m;
  m.kind = ModelKind::rbm;
  m.rbm = std::move(params);
  m.provenance = std::move(prov);
  m.validate();
  return m;
}

ModelFile model_from_ensemble(EnsembleParams params, Provenance prov) {
  ModelFile m;
  m.kind = params.family == Family::bernoulli ? ModelKind::rbse_bernoulli
                                              : ModelKind::rbse_gaussian;
  m.ensemble = std::move(params);
  m.provenance = std::move(prov);
  m.validate();
  return m;
}

namespace {

constexpr char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= bytes.size(); i += 3) {
    const std::uint32_t v = std::uint32_t(bytes[i]) << 16 | std::uint32_t(bytes[i + 1]) << 8 |
                            std::uint32_t(bytes[i + 2]);
    out += kB64Alphabet[v >> 18];
    out += kB64Alphabet[(v >> 12) & 63];
    out += kB64Alphabet[(v >> 6) & 63];
    out += kB64Alphabet[v & 63];
  }
  if (const std::size_t rest = bytes.size() - i) {
    std::uint32_t v = std::uint32_t(bytes[i]) << 16;
    if (rest == 2) v |= std::uint32_t(bytes[i + 1]) << 8;
    out += kB64Alphabet[v >> 18];
    out += kB64Alphabet[(v >> 12) & 63];
    out += rest == 2 ? kB64Alphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  static const auto table = [] {
    std::array<std::int8_t, 256> t;
    t.fill(-1);
    for (int i = 0; i < 64; ++i) t[std::uint8_t(kB64Alphabet[i])] = std::int8_t(i);
    return t;
  }();
  if (text.size() % 4 != 0) throw IoError("base64: length must be a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    const bool last = i + 4 == text.size();
    int pad = 0;
    std::uint32_t v = 0;
    for (int j = 0; j < 4; ++j) {
      const char c = text[i + j];
      if (c == '=') {
        if (!last || j < 2 || (j == 2 && text[i + 3] != '='))
          throw IoError("base64: misplaced padding");
        ++pad;
        v <<= 6;
        continue;
      }
      const std::int8_t d = table[std::uint8_t(c)];
      if (d < 0) throw IoError(std::string("base64: invalid character '") + c + "'");
      v = v << 6 | std::uint32_t(d);
    }
    out.push_back(std::uint8_t(v >> 16));
    if (pad < 2) out.push_back(std::uint8_t(v >> 8));
    if (pad < 1) out.push_back(std::uint8_t(v));
  }
  return out;
}

namespace {

std::string encode_plane(std::span<const double> xs) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(8 * xs.size());
  for (double x : xs) {
    std::uint64_t u;
    std::memcpy(&u, &x, 8);
    for (int i = 0; i < 8; ++i) bytes.push_back(std::uint8_t(u >> (8 * i)));
  }
  return base64_encode(bytes);
}

std::vector<double> decode_plane(const std::string& text, std::size_t want,
                                 const std::string& name) {
  const auto bytes = base64_decode(text);
  if (bytes.size() != 8 * want)
    throw IoError("model file: plane '" + name + "' holds " + std::to_string(bytes.size()) +
                  " bytes, expected " + std::to_string(8 * want));
  std::vector<double> out(want);
  for (std::size_t i = 0; i < want; ++i) {
    std::uint64_t u = 0;
    for (int j = 0; j < 8; ++j) u |= std::uint64_t(bytes[8 * i + j]) << (8 * j);
    std::memcpy(&out[i], &u, 8);
  }
  return out;
}

}  // namespace

std::string encode_model(const ModelFile& model) {
  model.validate();
  nlohmann::ordered_json j;
  j["format"] = "rbse-model";
  j["version"] = kModelFormatVersion;
  j["kind"] = model_kind_name(model.kind);
  j["visible"] = model.visible();
  j["hidden"] = model.hidden();
  j["provenance"]["config_sha256"] = model.provenance.config_sha256;
  j["provenance"]["seed"] = model.provenance.seed;
  j["provenance"]["epochs"] = model.provenance.epochs;
  auto& p = j["params"];
  if (model.kind == ModelKind::rbm) {
    p["w"] = encode_plane(model.rbm.w.a);
    p["b"] = encode_plane(model.rbm.b);
    p["c"] = encode_plane(model.rbm.c);
  } else {
    p["w_value"] = encode_plane(model.ensemble.w_value.a);
    p["w_noise"] = encode_plane(model.ensemble.w_noise.a);
    p["b_value"] = encode_plane(model.ensemble.b_value);
    p["b_noise"] = encode_plane(model.ensemble.b_noise);
    p["c_value"] = encode_plane(model.ensemble.c_value);
    p["c_noise"] = encode_plane(model.ensemble.c_noise);
  }
  return j.dump(2) + "\n";
}

ModelFile decode_model(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("model file: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "rbse-model")
      throw IoError("model file: not an rbse-model document");
    const int version = j.at("version").get<int>();
    if (version != kModelFormatVersion)
      throw IoError("model file: version " + std::to_string(version) + " unsupported (expected " +
                    std::to_string(kModelFormatVersion) + ")");

    ModelFile m;
    m.kind = model_kind_from_name(j.at("kind").get<std::string>());
    const std::size_t d = j.at("visible").get<std::size_t>();
    const std::size_t k = j.at("hidden").get<std::size_t>();
    const auto& prov = j.at("provenance");
    m.provenance.config_sha256 = prov.at("config_sha256").get<std::string>();
    m.provenance.seed = prov.at("seed").get<std::uint64_t>();
    m.provenance.epochs = prov.at("epochs").get<std::size_t>();

    const auto& p = j.at("params");
    auto plane = [&](const char* name, std::size_t want) {
      return decode_plane(p.at(name).get<std::string>(), want, name);
    };
    if (m.kind == ModelKind::rbm) {
      m.rbm.w = Matrix(d, k);
      m.rbm.w.a = plane("w", d * k);
      m.rbm.b = plane("b", d);
      m.rbm.c = plane("c", k);
    } else {
      auto& e = m.ensemble;
      e.family = m.kind == ModelKind::rbse_bernoulli ? Family::bernoulli : Family::gaussian;
      e.w_value = Matrix(d, k);
      e.w_value.a = plane("w_value", d * k);
      e.w_noise = Matrix(d, k);
      e.w_noise.a = plane("w_noise", d * k);
      e.b_value = plane("b_value", d);
      e.b_noise = plane("b_noise", d);
      e.c_value = plane("c_value", k);
      e.c_noise = plane("c_noise", k);
    }
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("model file: ") + e.what());
  }
}

void save_model(const ModelFile& model, const std::filesystem::path& path) {
  write_text_file(path, encode_model(model));
}

ModelFile load_model(const std::filesystem::path& path) {
  return decode_model(read_text_file(path));
}

}  // namespace rbse
