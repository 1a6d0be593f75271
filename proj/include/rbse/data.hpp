#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rbse/matrix.hpp"

namespace rbse {

// Visible examples with optional class labels. Entries always lie in [0,1].
struct Dataset {
  std::string name;
  Matrix examples;
  std::vector<int> labels;  // empty means unlabeled
  std::uint64_t seed = 0;   // generation seed; 0 for loaded data

  std::size_t size() const noexcept { return examples.rows; }
  std::size_t dim() const noexcept { return examples.cols; }
  bool labeled() const noexcept { return !labels.empty(); }
  int num_classes() const noexcept;  // max label + 1, 0 when unlabeled
  void validate() const;
  bool operator==(const Dataset&) const = default;
};

enum class Shape { arc, ring, segments, cross };

std::string shape_name(Shape s);
Shape shape_from_name(const std::string& name);

// n seeded points on a 2D manifold, Gaussian jitter, clipped to [0,1]^2.
Dataset generate_synthetic(Shape shape, std::size_t n, double noise_std, std::uint64_t seed);

// IDX image/label pair (big-endian, standard magics), pixels scaled by /255.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path);

// Pixel bytes recovered from a loaded dataset; inverts the /255 scaling
// exactly, which is what makes load_idx bit-faithful.
std::vector<std::uint8_t> pixel_bytes(const Dataset& ds);

// Entries mapped to {0,1} by x >= threshold; labels and metadata carried over.
Dataset binarize(const Dataset& ds, double threshold);

// One training example per class, 99 test examples per class.
struct OneShotSplit {
  Matrix train_x;
  std::vector<int> train_y;
  Matrix test_x;
  std::vector<int> test_y;
  std::uint64_t seed = 0;

  void validate() const;
};

// Per class: 100 distinct examples sampled without replacement, the first one
// becomes the training example and the other 99 the test examples.
OneShotSplit one_shot_split(const Dataset& ds, std::uint64_t seed);

// The unlabeled training pool (first 50,000 rows of the 60,000-row train set)
// and the labeled one-shot pool (last 10,000 train rows + the 10,000 test
// rows).
struct MnistPools {
  Dataset unlabeled;
  Dataset pool;
};

MnistPools one_shot_pools(const Dataset& train, const Dataset& test);

// ---- persistence -----------------------------------------------------------

std::string sha256_hex(const std::uint8_t* bytes, std::size_t n);
std::string sha256_hex_file(const std::filesystem::path& path);

// base + ".bin" holds the flat little-endian payload, base + ".json" the
// sidecar (name, dim, count, seed, labels flag, checksum of the .bin).
void save_dataset_cache(const Dataset& ds, const std::filesystem::path& base);
Dataset load_dataset_cache(const std::filesystem::path& base);

// Downloads url to out_path and verifies the SHA-256 of the payload first.
// Only available when built with libcurl.
void fetch_file(const std::string& url, const std::filesystem::path& out_path,
                const std::string& sha256_expected);
bool fetch_supported() noexcept;

}  // namespace rbse
