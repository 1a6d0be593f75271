#pragma once

#include <cstddef>
#include <cstring>
#include <span>
#include <unordered_map>
#include <vector>

#include "rbse/rng.hpp"

namespace rbse {

// Dense row-major matrix of doubles. Just enough linear-algebra surface for
// this library; everything heavy is written as explicit loops at the use site.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), a(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) noexcept { return a[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return a[i * cols + j]; }

  double* row(std::size_t i) noexcept { return a.data() + i * cols; }
  const double* row(std::size_t i) const noexcept { return a.data() + i * cols; }

  bool same_shape(const Matrix& o) const noexcept { return rows == o.rows && cols == o.cols; }
  bool operator==(const Matrix&) const = default;
};

struct WeightedRow {
  std::size_t row;  // first occurrence in the batch
  double weight;    // multiplicity / batch size
};

// Collapses repeated batch rows (bit-identical content) into weights. Means
// computed over this grouping are bitwise invariant under duplicating the
// whole batch: fl(2c/2n) == fl(c/n), and the accumulation order is unchanged.
inline std::vector<WeightedRow> unique_weighted_rows(const Matrix& m,
                                                     std::span<const std::size_t> rows) {
  std::vector<WeightedRow> out;
  std::vector<std::size_t> counts;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
  for (std::size_t r : rows) {
    const std::uint64_t h = content_hash({m.row(r), m.cols});
    auto& bucket = buckets[h];
    std::size_t hit = out.size();
    for (std::size_t idx : bucket)
      if (std::memcmp(m.row(out[idx].row), m.row(r), m.cols * sizeof(double)) == 0) {
        hit = idx;
        break;
      }
    if (hit == out.size()) {
      bucket.push_back(out.size());
      out.push_back({r, 0.0});
      counts.push_back(1);
    } else {
      ++counts[hit];
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i].weight = double(counts[i]) / double(rows.size());
  return out;
}

}  // namespace rbse
