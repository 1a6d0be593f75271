#pragma once

#include <span>
#include <vector>

#include "rbse/ensemble.hpp"
#include "rbse/matrix.hpp"
#include "rbse/rbm.hpp"

// Brute-force ground truth on tiny models. Everything here favors the most
// literal enumeration over clever algebra so it can arbitrate disputes with
// the production formulas; keep it that way.
namespace rbse {

// sum of e^{-energy} over all hard (v, h); visible + hidden <= 20
double exact_partition_rbm(const RbmParams& params);

// integral of e^{a theta} over one component's parameter distribution
double theta_marginal_factor(Family family, double value, double noise, double a);

// partition function of the flat joint, theta integrated out analytically
// per component and (v, h) enumerated; visible + hidden <= 16
double exact_zeta(const EnsembleParams& ens);

// same quantity by enumerating the finite Bernoulli parameter support,
// as prior-weighted RBM partitions; component count <= 10
double exact_zeta_support(const EnsembleParams& ens);

// -log sum_h of the per-component marginal factors at coefficients a(v, h)
double exact_free_energy_flat(const EnsembleParams& ens, std::span<const double> v);

double exact_loglik_flat(const EnsembleParams& ens, std::span<const double> v);

// exact ascent gradient of exact_loglik_flat, both expectations enumerated
EnsembleGrad exact_expected_grad(const EnsembleParams& ens, std::span<const double> v);

// central differences of exact_loglik_flat over every scalar; probability
// and scale ranges are deliberately not enforced on the perturbed copies
EnsembleGrad finite_diff_grad(const EnsembleParams& ens, std::span<const double> v, double delta);

struct ExactEvaluation {
  double zeta = 0.0;
  std::vector<double> loglik;       // one per row of the evaluated states
  std::vector<double> free_energy;  // same order
  EnsembleGrad gradient;            // mean ascent gradient over the rows
};

ExactEvaluation evaluate_exact(const EnsembleParams& ens, const Matrix& states);

// Decomposition under the mixture reading of the model, where each theta draw
// carries its own normalized RBM: loglik splits into the expected conditional
// log-likelihood minus the posterior-prior KL. Bernoulli only.
struct MixtureDecomposition {
  double loglik = 0.0;
  double expected_conditional_loglik = 0.0;
  double kl_divergence = 0.0;
};

MixtureDecomposition mixture_decomposition(const EnsembleParams& ens, const Matrix& dataset);

}  // namespace rbse
