#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "rbse/matrix.hpp"
#include "rbse/rng.hpp"

namespace rbse {

// Unit states are plain vectors with entries in [0,1]; a "hard" state is 0/1
// valued. Real-valued entries are treated as Bernoulli means.
using State = std::vector<double>;

bool is_hard(std::span<const double> s) noexcept;
bool in_unit_range(std::span<const double> s) noexcept;

// Numerically stable logistic, branch-free.
inline double logistic(double x) noexcept { return 0.5 + 0.5 * std::tanh(0.5 * x); }

// log(1 + e^x) without overflow.
inline double softplus(double x) noexcept {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

struct RbmParams {
  Matrix w;               // visible x hidden
  std::vector<double> b;  // visible biases
  std::vector<double> c;  // hidden biases

  std::size_t visible() const noexcept { return b.size(); }
  std::size_t hidden() const noexcept { return c.size(); }
  void validate() const;  // shape consistency and finiteness
  bool operator==(const RbmParams&) const = default;
};

// Weights ~ N(0, 0.01), biases zero.
RbmParams init_rbm(std::size_t visible, std::size_t hidden, std::uint64_t seed);

// -(v'Wh + b'v + c'h)
double energy(std::span<const double> v, std::span<const double> h, const RbmParams& params);

// P(h_j = 1 | v) = logistic(c_j + sum_i v_i W_ij)
std::vector<double> hidden_conditional(std::span<const double> v, const RbmParams& params);

// P(v_i = 1 | h) = logistic(b_i + sum_j W_ij h_j)
std::vector<double> visible_conditional(std::span<const double> h, const RbmParams& params);

// Independent Bernoulli draw per unit.
State sample_state(std::span<const double> probs, Rng& rng);

// -b'v - sum_j softplus(c_j + sum_i v_i W_ij)
double rbm_free_energy(std::span<const double> v, const RbmParams& params);

struct RbmGrad {
  Matrix w;
  std::vector<double> b, c;

  explicit RbmGrad(std::size_t visible = 0, std::size_t hidden = 0)
      : w(visible, hidden), b(visible, 0.0), c(hidden, 0.0) {}
  void axpy(double alpha, const RbmGrad& g);
  bool operator==(const RbmGrad&) const = default;
};

struct CdTerms {
  RbmGrad data;   // v (x) P(h|v) moments of the clamped data
  RbmGrad recon;  // hard-state moments after the Gibbs rounds
};

// CD-k gradient, mean over the batch, ascent direction: data minus
// reconstruction moments. Each example runs its own chain, seeded from
// (step_seed, content hash of v), so duplicated examples replicate chains and
// the batch mean is invariant under duplication. The chain performs k+1
// rounds of (v|h, v-first after a data-driven h0) to line up with the
// ensemble sampler's loop bound; recon statistics use the final hard pair.
// Records the first-round mean-field reconstruction error in *recon_sq_err
// (batch-weighted mean of per-example mean squared deviation) when non-null.
RbmGrad cd_k_rbm(const RbmParams& params, const Matrix& data, std::span<const std::size_t> rows,
                 int k, std::uint64_t step_seed, double* recon_sq_err = nullptr);

// Same, with the two moment terms exposed separately.
CdTerms cd_k_rbm_terms(const RbmParams& params, const Matrix& data,
                       std::span<const std::size_t> rows, int k, std::uint64_t step_seed,
                       double* recon_sq_err = nullptr);

// Chain-seed derivation shared with the ensemble sampler so the deterministic
// limit can be compared draw for draw.
std::uint64_t model_chain_seed(std::uint64_t step_seed, std::span<const double> v, int mc_index) noexcept;
std::uint64_t clamped_chain_seed(std::uint64_t step_seed, std::span<const double> v, int mc_index) noexcept;

}  // namespace rbse
