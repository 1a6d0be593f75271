#include "rbse/data.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#ifdef RBSE_HAVE_CURL
#include <curl/curl.h>
#endif

#include "json.hpp"
#include "rbse/errors.hpp"
#include "rbse/fs.hpp"
#include "rbse/rng.hpp"

namespace rbse {

int Dataset::num_classes() const noexcept {
  int c = 0;
  for (int l : labels) c = std::max(c, l + 1);
  return c;
}

void Dataset::validate() const {
  for (double x : examples.a)
    if (!(x >= 0.0 && x <= 1.0)) throw ValidationError("dataset: entries must lie in [0,1]");
  if (!labels.empty()) {
    if (labels.size() != examples.rows)
      throw ValidationError("dataset: label count does not match example count");
    for (int l : labels)
      if (l < 0) throw ValidationError("dataset: negative class id");
  }
}

std::string shape_name(Shape s) {
  switch (s) {
    case Shape::arc: return "arc";
    case Shape::ring: return "ring";
    case Shape::segments: return "segments";
    default: return "cross";
  }
}

Shape shape_from_name(const std::string& name) {
  if (name == "arc") return Shape::arc;
  if (name == "ring") return Shape::ring;
  if (name == "segments") return Shape::segments;
  if (name == "cross") return Shape::cross;
  throw ValidationError("unknown shape '" + name + "' (arc|ring|segments|cross)");
}

Dataset generate_synthetic(Shape shape, std::size_t n, double noise_std, std::uint64_t seed) {
  if (n < 1) throw ValidationError("synthetic: n must be at least 1");
  if (!(noise_std >= 0.0)) throw ValidationError("synthetic: noise_std must be nonnegative");

  constexpr double cx = 0.5, cy = 0.5, radius = 0.35;
  constexpr double pi = 3.14159265358979323846;
  // endpoints keep every stroke inside the unit square with margin
  struct Seg {
    double x0, y0, x1, y1;
  };
  static constexpr Seg kSegments[3] = {
      {0.30, 0.05, 0.95, 0.70}, {0.05, 0.05, 0.95, 0.95}, {0.05, 0.30, 0.70, 0.95}};
  static constexpr Seg kCross[2] = {{0.05, 0.05, 0.95, 0.95}, {0.05, 0.95, 0.95, 0.05}};

  Dataset ds;
  ds.name = shape_name(shape);
  ds.seed = seed;
  ds.examples = Matrix(n, 2);
  Rng rng(derive_seed(seed, {0x5A9E, std::uint64_t(shape)}));
  for (std::size_t i = 0; i < n; ++i) {
    double x, y;
    switch (shape) {
      case Shape::ring: {
        const double a = 2.0 * pi * rng.uniform();
        x = cx + radius * std::cos(a);
        y = cy + radius * std::sin(a);
        break;
      }
      case Shape::arc: {
        const double a = pi * rng.uniform();
        x = cx + radius * std::cos(a);
        y = cy + radius * std::sin(a);
        break;
      }
      case Shape::segments: {
        const Seg s = kSegments[rng.below(3)];
        const double t = rng.uniform();
        x = s.x0 + t * (s.x1 - s.x0);
        y = s.y0 + t * (s.y1 - s.y0);
        break;
      }
      default: {
        const Seg s = kCross[rng.below(2)];
        const double t = rng.uniform();
        x = s.x0 + t * (s.x1 - s.x0);
        y = s.y0 + t * (s.y1 - s.y0);
        break;
      }
    }
    x += rng.normal(0.0, noise_std);
    y += rng.normal(0.0, noise_std);
    ds.examples(i, 0) = std::clamp(x, 0.0, 1.0);
    ds.examples(i, 1) = std::clamp(y, 0.0, 1.0);
  }
  return ds;
}

namespace {

// Sequential big-endian reader that reports the byte offset of any shortfall.
struct IdxReader {
  const std::vector<std::uint8_t>& bytes;
  const std::string path;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > bytes.size())
      throw IoError("idx parse error in " + path + ": truncated at byte " + std::to_string(pos) +
                    " (need " + std::to_string(n) + " more, have " +
                    std::to_string(bytes.size() - pos) + ")");
  }
  std::uint32_t be32() {
    need(4);
    const std::uint32_t v = std::uint32_t(bytes[pos]) << 24 | std::uint32_t(bytes[pos + 1]) << 16 |
                            std::uint32_t(bytes[pos + 2]) << 8 | std::uint32_t(bytes[pos + 3]);
    pos += 4;
    return v;
  }
};

std::string hex32(std::uint32_t v) {
  char buf[11];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path) {
  const auto ibytes = read_file_bytes(images_path);
  IdxReader img{ibytes, images_path.string()};
  const std::uint32_t imagic = img.be32();
  if (imagic != 0x00000803u)
    throw IoError("idx parse error in " + img.path + ": bad image magic " + hex32(imagic) +
                  " at byte 0, expected 0x00000803");
  const std::uint32_t count = img.be32();
  const std::uint32_t rows = img.be32();
  const std::uint32_t cols = img.be32();
  const std::size_t npix = std::size_t(count) * rows * cols;
  img.need(npix);
  if (img.pos + npix != ibytes.size())
    throw IoError("idx parse error in " + img.path + ": " +
                  std::to_string(ibytes.size() - img.pos - npix) + " trailing bytes after pixels");

  const auto lbytes = read_file_bytes(labels_path);
  IdxReader lab{lbytes, labels_path.string()};
  const std::uint32_t lmagic = lab.be32();
  if (lmagic != 0x00000801u)
    throw IoError("idx parse error in " + lab.path + ": bad label magic " + hex32(lmagic) +
                  " at byte 0, expected 0x00000801");
  const std::uint32_t lcount = lab.be32();
  if (lcount != count)
    throw IoError("idx count mismatch: " + img.path + " has " + std::to_string(count) +
                  " items but " + lab.path + " has " + std::to_string(lcount));
  lab.need(lcount);
  if (lab.pos + lcount != lbytes.size())
    throw IoError("idx parse error in " + lab.path + ": " +
                  std::to_string(lbytes.size() - lab.pos - lcount) + " trailing bytes");

  Dataset ds;
  ds.name = images_path.filename().string();
  ds.examples = Matrix(count, std::size_t(rows) * cols);
  for (std::size_t i = 0; i < npix; ++i) ds.examples.a[i] = double(ibytes[img.pos + i]) / 255.0;
  ds.labels.resize(lcount);
  for (std::uint32_t i = 0; i < lcount; ++i) {
    const std::uint8_t l = lbytes[lab.pos + i];
    ds.labels[i] = int(l);
  }
  ds.validate();
  return ds;
}

std::vector<std::uint8_t> pixel_bytes(const Dataset& ds) {
  std::vector<std::uint8_t> bytes(ds.examples.a.size());
  for (std::size_t i = 0; i < bytes.size(); ++i)
    bytes[i] = std::uint8_t(std::lround(ds.examples.a[i] * 255.0));
  return bytes;
}

Dataset binarize(const Dataset& ds, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw ValidationError("binarize: threshold must lie in (0,1)");
  Dataset out = ds;
  for (double& x : out.examples.a) x = x >= threshold ? 1.0 : 0.0;
  return out;
}

void OneShotSplit::validate() const {
  const std::size_t c = train_y.size();
  if (train_x.rows != c || test_x.rows != 99 * c || test_y.size() != 99 * c)
    throw ValidationError("one-shot split: expected 1 train and 99 test examples per class");
}

OneShotSplit one_shot_split(const Dataset& ds, std::uint64_t seed) {
  ds.validate();
  if (!ds.labeled()) throw ValidationError("one-shot split: dataset has no labels");
  const int classes = ds.num_classes();
  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);

  OneShotSplit split;
  split.seed = seed;
  split.train_x = Matrix(classes, ds.dim());
  split.test_x = Matrix(std::size_t(classes) * 99, ds.dim());
  for (int c = 0; c < classes; ++c) {
    auto& pool = by_class[c];
    if (pool.size() < 100)
      throw ValidationError("one-shot split: class " + std::to_string(c) + " has only " +
                            std::to_string(pool.size()) + " examples, need 100");
    Rng rng(derive_seed(seed, {0x0557, std::uint64_t(c)}));
    for (std::size_t t = 0; t < 100; ++t) {
      const std::size_t j = t + rng.below(pool.size() - t);
      std::swap(pool[t], pool[j]);
    }
    std::copy_n(ds.examples.row(pool[0]), ds.dim(), split.train_x.row(c));
    split.train_y.push_back(c);
    for (std::size_t t = 1; t < 100; ++t) {
      const std::size_t dst = std::size_t(c) * 99 + (t - 1);
      std::copy_n(ds.examples.row(pool[t]), ds.dim(), split.test_x.row(dst));
      split.test_y.push_back(c);
    }
  }
  split.validate();
  return split;
}

MnistPools one_shot_pools(const Dataset& train, const Dataset& test) {
  if (train.size() != 60000 || test.size() != 10000)
    throw ValidationError("one-shot pools: expected the 60,000/10,000 row train/test pair");
  if (!train.labeled() || !test.labeled())
    throw ValidationError("one-shot pools: both datasets must carry labels");
  if (train.dim() != test.dim()) throw ValidationError("one-shot pools: dimension mismatch");

  MnistPools pools;
  pools.unlabeled.name = train.name + "-unlabeled";
  pools.unlabeled.examples = Matrix(50000, train.dim());
  std::copy_n(train.examples.a.data(), 50000 * train.dim(), pools.unlabeled.examples.a.data());

  pools.pool.name = train.name + "-pool";
  pools.pool.examples = Matrix(20000, train.dim());
  std::copy_n(train.examples.row(50000), 10000 * train.dim(), pools.pool.examples.a.data());
  std::copy_n(test.examples.a.data(), 10000 * test.dim(), pools.pool.examples.row(10000));
  pools.pool.labels.assign(train.labels.begin() + 50000, train.labels.end());
  pools.pool.labels.insert(pools.pool.labels.end(), test.labels.begin(), test.labels.end());
  return pools;
}

std::string sha256_hex(const std::uint8_t* bytes, std::size_t n) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes, n, md, &len, EVP_sha256(), nullptr);
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) {
    out += digits[md[i] >> 4];
    out += digits[md[i] & 15];
  }
  return out;
}

std::string sha256_hex_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return sha256_hex(bytes.data(), bytes.size());
}

namespace {

void append_u64le(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
}

std::uint64_t read_u64le(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
  return v;
}

}  // namespace

void save_dataset_cache(const Dataset& ds, const std::filesystem::path& base) {
  ds.validate();
  std::vector<std::uint8_t> bin;
  bin.reserve(ds.examples.a.size() * 8 + ds.labels.size() * 8);
  for (double x : ds.examples.a) {
    std::uint64_t u;
    std::memcpy(&u, &x, 8);
    append_u64le(bin, u);
  }
  for (int l : ds.labels) append_u64le(bin, std::uint64_t(std::int64_t(l)));
  auto bin_path = base;
  bin_path += ".bin";
  write_file_bytes(bin_path, bin.data(), bin.size());

  nlohmann::ordered_json side;
  side["name"] = ds.name;
  side["dim"] = ds.dim();
  side["count"] = ds.size();
  side["seed"] = ds.seed;
  side["labeled"] = ds.labeled();
  side["checksum"] = sha256_hex(bin.data(), bin.size());
  auto json_path = base;
  json_path += ".json";
  const std::string text = side.dump(2) + "\n";
  write_file_bytes(json_path, reinterpret_cast<const std::uint8_t*>(text.data()), text.size());
}

Dataset load_dataset_cache(const std::filesystem::path& base) {
  auto json_path = base;
  json_path += ".json";
  const auto jbytes = read_file_bytes(json_path);
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(jbytes.begin(), jbytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw IoError("dataset sidecar " + json_path.string() + ": " + e.what());
  }

  auto bin_path = base;
  bin_path += ".bin";
  const auto bin = read_file_bytes(bin_path);
  try {
    if (side.at("checksum").get<std::string>() != sha256_hex(bin.data(), bin.size()))
      throw IoError("dataset cache " + bin_path.string() + ": checksum mismatch");

    Dataset ds;
    ds.name = side.at("name").get<std::string>();
    ds.seed = side.at("seed").get<std::uint64_t>();
    const std::size_t dim = side.at("dim").get<std::size_t>();
    const std::size_t count = side.at("count").get<std::size_t>();
    const bool labeled = side.at("labeled").get<bool>();
    const std::size_t want = count * dim * 8 + (labeled ? count * 8 : 0);
    if (bin.size() != want)
      throw IoError("dataset cache " + bin_path.string() + ": payload is " +
                    std::to_string(bin.size()) + " bytes, sidecar implies " +
                    std::to_string(want));
    ds.examples = Matrix(count, dim);
    for (std::size_t i = 0; i < count * dim; ++i) {
      const std::uint64_t u = read_u64le(bin.data() + 8 * i);
      std::memcpy(&ds.examples.a[i], &u, 8);
    }
    if (labeled) {
      ds.labels.resize(count);
      const std::uint8_t* lp = bin.data() + count * dim * 8;
      for (std::size_t i = 0; i < count; ++i)
        ds.labels[i] = int(std::int64_t(read_u64le(lp + 8 * i)));
    }
    ds.validate();
    return ds;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("dataset sidecar " + json_path.string() + ": " + e.what());
  }
}

bool fetch_supported() noexcept {
#ifdef RBSE_HAVE_CURL
  return true;
#else
  return false;
#endif
}

#ifdef RBSE_HAVE_CURL
namespace {
std::size_t curl_sink(char* data, std::size_t size, std::size_t nmemb, void* user) {
  auto* buf = static_cast<std::vector<std::uint8_t>*>(user);
  buf->insert(buf->end(), data, data + size * nmemb);
  return size * nmemb;
}
}  // namespace

void fetch_file(const std::string& url, const std::filesystem::path& out_path,
                const std::string& sha256_expected) {
  CURL* curl = curl_easy_init();
  if (!curl) throw IoError("fetch: could not initialize curl");
  std::vector<std::uint8_t> body;
  curl_easy_setopt(curl, CURLOPT_URL, url.c_str());
  curl_easy_setopt(curl, CURLOPT_FOLLOWLOCATION, 1L);
  curl_easy_setopt(curl, CURLOPT_WRITEFUNCTION, curl_sink);
  curl_easy_setopt(curl, CURLOPT_WRITEDATA, &body);
  curl_easy_setopt(curl, CURLOPT_FAILONERROR, 1L);
  const CURLcode rc = curl_easy_perform(curl);
  long status = 0;
  curl_easy_getinfo(curl, CURLINFO_RESPONSE_CODE, &status);
  curl_easy_cleanup(curl);
  if (rc != CURLE_OK)
    throw IoError("fetch: " + url + ": " + curl_easy_strerror(rc) +
                  (status ? " (http " + std::to_string(status) + ")" : ""));

  std::string got = sha256_hex(body.data(), body.size());
  std::string want = sha256_expected;
  std::transform(want.begin(), want.end(), want.begin(),
                 [](unsigned char c) { return char(std::tolower(c)); });
  if (got != want)
    throw IoError("fetch: " + url + ": sha256 mismatch (got " + got + ", expected " + want + ")");
  write_file_bytes(out_path, body.data(), body.size());
}
#else
void fetch_file(const std::string&, const std::filesystem::path&, const std::string&) {
  throw IoError("fetch: built without libcurl support");
}
#endif

}  // namespace rbse
