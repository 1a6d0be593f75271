#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rbse/ensemble.hpp"
#include "rbse/matrix.hpp"
#include "rbse/rbm.hpp"

namespace rbse {

enum class RepKind { deterministic, rbse, dropconnect };

std::string rep_kind_name(RepKind kind);

// A visible state together with the hidden-space vectors generated for it.
struct RepresentationSet {
  State source;
  std::vector<std::vector<double>> reps;  // length-K vectors
  RepKind kind = RepKind::deterministic;

  // deterministic sets carry exactly one rep; every entry lies in [0,1]
  void validate() const;
};

// Mean-field hidden activations P(h|v) under a fixed model.
std::vector<double> deterministic_representation(const RbmParams& params,
                                                 std::span<const double> v);

RepresentationSet deterministic_set(const RbmParams& params, std::span<const double> v);

// m_rep independent draws of theta ~ P(theta|v) via the clamped chain
// (burn_in + 1 alternation rounds); each rep is the mean-field hidden vector
// under its sampled model. Draw streams are keyed by (seed, content of v,
// rep index), so results are independent of call order and thread count.
RepresentationSet stochastic_representations(const EnsembleParams& ens, std::span<const double> v,
                                             std::size_t m_rep, int burn_in, std::uint64_t seed,
                                             int threads = 1);

// m_rep reps under independently masked weights: every W entry is kept with
// probability drop_keep (biases untouched), then mean-field as usual.
RepresentationSet dropconnect_representations(const RbmParams& params, double drop_keep,
                                              std::span<const double> v, std::size_t m_rep,
                                              std::uint64_t seed, int threads = 1);

// Visible mean vector from a mean-field hidden input.
std::vector<double> reconstruct(const RbmParams& params, std::span<const double> h_rep);

struct RoundTripCloud {
  State source;
  std::vector<State> points;  // reconstructed visible means, one per rep
};

// Stochastic reps for every test point, each mapped back through the mean
// model of the ensemble.
std::vector<RoundTripCloud> roundtrip_cloud(const EnsembleParams& ens, const Matrix& test_points,
                                            std::size_t m_rep, int burn_in, std::uint64_t seed,
                                            int threads = 1);

// 2D clouds as "x,y,source,kind" rows (kind: source | cloud) for plotting.
std::string cloud_csv(const std::vector<RoundTripCloud>& clouds);

}  // namespace rbse
