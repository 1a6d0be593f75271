#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rbse/matrix.hpp"
#include "rbse/rbm.hpp"
#include "rbse/rng.hpp"

namespace rbse {

enum class Family { bernoulli, gaussian };

std::string family_name(Family f);
Family family_from_name(const std::string& name);

// Distribution over RBM parameters, one independent component per scalar.
// Two planes per parameter group: `value` is the Bernoulli atom (the nonzero
// point of the two-point prior) or the Gaussian mean; `noise` is the Bernoulli
// atom probability p or the Gaussian standard deviation.
struct EnsembleParams {
  Family family = Family::bernoulli;
  Matrix w_value, w_noise;
  std::vector<double> b_value, b_noise, c_value, c_noise;

  std::size_t visible() const noexcept { return b_value.size(); }
  std::size_t hidden() const noexcept { return c_value.size(); }
  // Every component contributes two tunable scalars.
  std::size_t parameter_count() const noexcept {
    return 2 * (w_value.a.size() + b_value.size() + c_value.size());
  }
  void validate_shapes() const;  // shapes and finiteness only
  void validate() const;         // plus probability / stddev ranges
  bool operator==(const EnsembleParams&) const = default;
};

// Bernoulli: p = 0.5 everywhere, weight atoms ~ N(0, 0.01), bias atoms 0.
// Gaussian: means ~ N(0, 0.01) for weights, 0 for biases, all stddevs 0.1.
EnsembleParams init_ensemble(Family family, std::size_t visible, std::size_t hidden,
                             std::uint64_t seed);

// Gradient (or update direction) over all ensemble parameters; planes mirror
// EnsembleParams.
struct EnsembleGrad {
  Matrix w_value, w_noise;
  std::vector<double> b_value, b_noise, c_value, c_noise;

  explicit EnsembleGrad(std::size_t visible = 0, std::size_t hidden = 0)
      : w_value(visible, hidden),
        w_noise(visible, hidden),
        b_value(visible, 0.0),
        b_noise(visible, 0.0),
        c_value(hidden, 0.0),
        c_noise(hidden, 0.0) {}
  void axpy(double alpha, const EnsembleGrad& g);
  void scale(double alpha);
  bool operator==(const EnsembleGrad&) const = default;
};

// ---- per-component closed forms -------------------------------------------
// `a` is the energy coefficient of the component: v_i*h_j for a weight,
// v_i for a visible bias, h_j for a hidden bias.

// log of the prior moment log E[e^{a theta}]; zero at a = 0.
double log_moment(Family f, double value, double noise, double a) noexcept;

// Posterior probability of the nonzero atom given coefficient a,
// p e^{a value} / (1 - p + p e^{a value}). Exact 0/1 at p = 0/1.
double posterior_bernoulli(double value, double prob, double a) noexcept;

// Posterior mean given coefficient a; the stddev is unchanged.
double posterior_gaussian_mean(double mean, double std, double a) noexcept;

// Conditional expectations, given the coefficient, of the per-component
// log-likelihood ascent contributions (the negated phi-derivatives of the
// CD-form gradient). Both vanish at a = 0.
double score_value(Family f, double value, double noise, double a) noexcept;
double score_noise(Family f, double value, double noise, double a) noexcept;

// Single component draw from the posterior tilted by coefficient a (a = 0 is
// the prior). Bernoulli consumes one uniform, Gaussian one normal, always.
double draw_component(Family f, double value, double noise, double a, Rng& rng) noexcept;

// ---- whole-model operations ------------------------------------------------

// Independent draw of every component from its prior.
RbmParams sample_theta_prior(const EnsembleParams& ens, Rng& rng);

// Independent draw of every component from its posterior given hard (v, h).
RbmParams sample_theta_posterior(const EnsembleParams& ens, std::span<const double> v,
                                 std::span<const double> h, Rng& rng);

// Same without the hardness requirement; representation paths feed mean-field
// visible values here.
RbmParams draw_theta(const EnsembleParams& ens, std::span<const double> v,
                     std::span<const double> h, Rng& rng);

// E[theta] per component: p*value for Bernoulli, the mean for Gaussian.
RbmParams mean_model(const EnsembleParams& ens);

// E[d phi / d alpha | v, h] per component, the conditional expected
// phi-derivatives of the CD-form gradient (sign convention: the negated
// scores above).
EnsembleGrad expected_phi_grad(const EnsembleParams& ens, std::span<const double> v,
                               std::span<const double> h);

// Free energy of the ensemble joint with parameters integrated out and hidden
// units summed analytically:
//   F(v) = -sum_i log m_{b_i}(v_i) - sum_j softplus(log m_{c_j}(1) + sum_i log m_{W_ij}(v_i))
double ensemble_free_energy(const EnsembleParams& ens, std::span<const double> v);

}  // namespace rbse
