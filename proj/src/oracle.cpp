#include "rbse/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>

#include "rbse/errors.hpp"

namespace rbse {

namespace {

void check_cap(const char* what, std::size_t n, std::size_t cap) {
  if (n > cap)
    throw ValidationError(std::string(what) + ": model too large for exhaustive enumeration");
}

// Plain textbook forms, written independently of the stabilized variants in
// the ensemble module so the two can arbitrate each other. No range checks:
// finite-difference probes step slightly outside [0,1] and below 0 on purpose.
double factor(Family f, double value, double noise, double a) {
  if (f == Family::gaussian) return std::exp(a * value + 0.5 * a * a * noise * noise);
  return 1.0 - noise + noise * std::exp(a * value);
}

double dlog_factor_dvalue(Family f, double value, double noise, double a) {
  if (f == Family::gaussian) return a;
  return noise * a * std::exp(a * value) / factor(f, value, noise, a);
}

double dlog_factor_dnoise(Family f, double value, double noise, double a) {
  if (f == Family::gaussian) return a * a * noise;
  return (std::exp(a * value) - 1.0) / factor(f, value, noise, a);
}

void check_visible(const EnsembleParams& ens, std::span<const double> v, const char* what) {
  if (v.size() != ens.visible())
    throw ValidationError(std::string(what) + ": visible dimension mismatch");
  if (!in_unit_range(v))
    throw ValidationError(std::string(what) + ": visible values must lie in [0,1]");
}

// product over i of the W_ij factors at h_j = 1, times the c_j factor
std::vector<double> hidden_unit_factors(const EnsembleParams& ens, std::span<const double> v) {
  const std::size_t d = ens.visible(), k = ens.hidden();
  std::vector<double> fj(k);
  for (std::size_t j = 0; j < k; ++j)
    fj[j] = factor(ens.family, ens.c_value[j], ens.c_noise[j], 1.0);
  for (std::size_t i = 0; i < d; ++i) {
    const double* val = ens.w_value.row(i);
    const double* noi = ens.w_noise.row(i);
    for (std::size_t j = 0; j < k; ++j) fj[j] *= factor(ens.family, val[j], noi[j], v[i]);
  }
  return fj;
}

}  // namespace

double exact_partition_rbm(const RbmParams& params) {
  params.validate();
  const std::size_t d = params.visible(), k = params.hidden();
  check_cap("exact_partition_rbm", d + k, 20);
  std::vector<double> v(d), h(k);
  double z = 0.0;
  for (std::uint64_t vc = 0; vc < (1ull << d); ++vc) {
    for (std::size_t i = 0; i < d; ++i) v[i] = double((vc >> i) & 1);
    for (std::uint64_t hc = 0; hc < (1ull << k); ++hc) {
      for (std::size_t j = 0; j < k; ++j) h[j] = double((hc >> j) & 1);
      z += std::exp(-energy(v, h, params));
    }
  }
  return z;
}

double theta_marginal_factor(Family family, double value, double noise, double a) {
  if (!std::isfinite(a)) throw ValidationError("theta_marginal_factor: non-finite coefficient");
  return factor(family, value, noise, a);
}

double exact_zeta(const EnsembleParams& ens) {
  ens.validate_shapes();
  const std::size_t d = ens.visible(), k = ens.hidden();
  check_cap("exact_zeta", d + k, 16);
  Matrix fw(d, k);
  std::vector<double> fb(d), fc(k);
  for (std::size_t i = 0; i < d; ++i) {
    fb[i] = factor(ens.family, ens.b_value[i], ens.b_noise[i], 1.0);
    for (std::size_t j = 0; j < k; ++j)
      fw(i, j) = factor(ens.family, ens.w_value(i, j), ens.w_noise(i, j), 1.0);
  }
  for (std::size_t j = 0; j < k; ++j)
    fc[j] = factor(ens.family, ens.c_value[j], ens.c_noise[j], 1.0);

  double z = 0.0;
  for (std::uint64_t vc = 0; vc < (1ull << d); ++vc) {
    for (std::uint64_t hc = 0; hc < (1ull << k); ++hc) {
      double prod = 1.0;
      for (std::size_t i = 0; i < d; ++i)
        if ((vc >> i) & 1) prod *= fb[i];
      for (std::size_t j = 0; j < k; ++j) {
        if (!((hc >> j) & 1)) continue;
        prod *= fc[j];
        for (std::size_t i = 0; i < d; ++i)
          if ((vc >> i) & 1) prod *= fw(i, j);
      }
      z += prod;
    }
  }
  return z;
}

double exact_free_energy_flat(const EnsembleParams& ens, std::span<const double> v) {
  ens.validate_shapes();
  const std::size_t d = ens.visible(), k = ens.hidden();
  check_cap("exact_free_energy_flat", d + k, 16);
  check_visible(ens, v, "exact_free_energy_flat");
  double bprod = 1.0;
  for (std::size_t i = 0; i < d; ++i)
    bprod *= factor(ens.family, ens.b_value[i], ens.b_noise[i], v[i]);
  const std::vector<double> fj = hidden_unit_factors(ens, v);
  double s = 0.0;
  for (std::uint64_t hc = 0; hc < (1ull << k); ++hc) {
    double prod = 1.0;
    for (std::size_t j = 0; j < k; ++j)
      if ((hc >> j) & 1) prod *= fj[j];
    s += prod;
  }
  return -(std::log(bprod) + std::log(s));
}

double exact_loglik_flat(const EnsembleParams& ens, std::span<const double> v) {
  return -exact_free_energy_flat(ens, v) - std::log(exact_zeta(ens));
}

EnsembleGrad exact_expected_grad(const EnsembleParams& ens, std::span<const double> v) {
  ens.validate_shapes();
  const std::size_t d = ens.visible(), k = ens.hidden();
  check_cap("exact_expected_grad", d + k, 16);
  check_visible(ens, v, "exact_expected_grad");
  const Family f = ens.family;

  // clamped side: hidden marginals under P(h | v)
  const std::vector<double> fj = hidden_unit_factors(ens, v);
  std::vector<double> pi(k, 0.0);
  double s = 0.0;
  for (std::uint64_t hc = 0; hc < (1ull << k); ++hc) {
    double prod = 1.0;
    for (std::size_t j = 0; j < k; ++j)
      if ((hc >> j) & 1) prod *= fj[j];
    s += prod;
    for (std::size_t j = 0; j < k; ++j)
      if ((hc >> j) & 1) pi[j] += prod;
  }
  for (auto& x : pi) x /= s;

  // model side: first and pair moments under the flat joint
  Matrix fw(d, k);
  std::vector<double> fb(d), fc(k);
  for (std::size_t i = 0; i < d; ++i) {
    fb[i] = factor(f, ens.b_value[i], ens.b_noise[i], 1.0);
    for (std::size_t j = 0; j < k; ++j)
      fw(i, j) = factor(f, ens.w_value(i, j), ens.w_noise(i, j), 1.0);
  }
  for (std::size_t j = 0; j < k; ++j) fc[j] = factor(f, ens.c_value[j], ens.c_noise[j], 1.0);

  Matrix mw(d, k);
  std::vector<double> mv(d, 0.0), mh(k, 0.0);
  double z = 0.0;
  for (std::uint64_t vc = 0; vc < (1ull << d); ++vc) {
    for (std::uint64_t hc = 0; hc < (1ull << k); ++hc) {
      double prod = 1.0;
      for (std::size_t i = 0; i < d; ++i)
        if ((vc >> i) & 1) prod *= fb[i];
      for (std::size_t j = 0; j < k; ++j) {
        if (!((hc >> j) & 1)) continue;
        prod *= fc[j];
        for (std::size_t i = 0; i < d; ++i)
          if ((vc >> i) & 1) prod *= fw(i, j);
      }
      z += prod;
      for (std::size_t i = 0; i < d; ++i) {
        if (!((vc >> i) & 1)) continue;
        mv[i] += prod;
        double* row = mw.row(i);
        for (std::size_t j = 0; j < k; ++j)
          if ((hc >> j) & 1) row[j] += prod;
      }
      for (std::size_t j = 0; j < k; ++j)
        if ((hc >> j) & 1) mh[j] += prod;
    }
  }
  for (auto& x : mw.a) x /= z;
  for (auto& x : mv) x /= z;
  for (auto& x : mh) x /= z;

  // ascent gradient, clamped minus model; binary model states mean the model
  // expectation only needs the derivative at coefficient 1
  EnsembleGrad g(d, k);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double wv = ens.w_value(i, j), wn = ens.w_noise(i, j);
      g.w_value(i, j) =
          pi[j] * dlog_factor_dvalue(f, wv, wn, v[i]) - mw(i, j) * dlog_factor_dvalue(f, wv, wn, 1.0);
      g.w_noise(i, j) =
          pi[j] * dlog_factor_dnoise(f, wv, wn, v[i]) - mw(i, j) * dlog_factor_dnoise(f, wv, wn, 1.0);
    }
    const double bv = ens.b_value[i], bn = ens.b_noise[i];
    g.b_value[i] = dlog_factor_dvalue(f, bv, bn, v[i]) - mv[i] * dlog_factor_dvalue(f, bv, bn, 1.0);
    g.b_noise[i] = dlog_factor_dnoise(f, bv, bn, v[i]) - mv[i] * dlog_factor_dnoise(f, bv, bn, 1.0);
  }
  for (std::size_t j = 0; j < k; ++j) {
    const double cv = ens.c_value[j], cn = ens.c_noise[j];
    g.c_value[j] = (pi[j] - mh[j]) * dlog_factor_dvalue(f, cv, cn, 1.0);
    g.c_noise[j] = (pi[j] - mh[j]) * dlog_factor_dnoise(f, cv, cn, 1.0);
  }
  return g;
}

EnsembleGrad finite_diff_grad(const EnsembleParams& ens, std::span<const double> v, double delta) {
  if (!(delta > 0.0)) throw ValidationError("finite_diff_grad: delta must be positive");
  ens.validate_shapes();
  check_visible(ens, v, "finite_diff_grad");
  EnsembleParams work = ens;
  EnsembleGrad g(ens.visible(), ens.hidden());
  std::vector<double>* src[] = {&work.w_value.a, &work.w_noise.a, &work.b_value,
                                &work.b_noise,   &work.c_value,   &work.c_noise};
  std::vector<double>* dst[] = {&g.w_value.a, &g.w_noise.a, &g.b_value,
                                &g.b_noise,   &g.c_value,   &g.c_noise};
  for (int t = 0; t < 6; ++t) {
    for (std::size_t idx = 0; idx < src[t]->size(); ++idx) {
      double& x = (*src[t])[idx];
      const double orig = x;
      x = orig + delta;
      const double hi = exact_loglik_flat(work, v);
      x = orig - delta;
      const double lo = exact_loglik_flat(work, v);
      x = orig;
      (*dst[t])[idx] = (hi - lo) / (2.0 * delta);
    }
  }
  return g;
}

ExactEvaluation evaluate_exact(const EnsembleParams& ens, const Matrix& states) {
  if (states.rows == 0) throw ValidationError("evaluate_exact: no states given");
  ExactEvaluation out;
  out.zeta = exact_zeta(ens);
  const double logz = std::log(out.zeta);
  out.loglik.reserve(states.rows);
  out.free_energy.reserve(states.rows);
  out.gradient = EnsembleGrad(ens.visible(), ens.hidden());
  for (std::size_t r = 0; r < states.rows; ++r) {
    const std::span<const double> v{states.row(r), states.cols};
    const double fe = exact_free_energy_flat(ens, v);
    out.free_energy.push_back(fe);
    out.loglik.push_back(-fe - logz);
    out.gradient.axpy(1.0, exact_expected_grad(ens, v));
  }
  out.gradient.scale(1.0 / double(states.rows));
  return out;
}

namespace {

std::size_t checked_support_bits(const EnsembleParams& ens, const char* what) {
  ens.validate();
  if (ens.family != Family::bernoulli)
    throw ValidationError(std::string(what) + ": only the Bernoulli family has a finite support");
  const std::size_t m = ens.w_value.a.size() + ens.visible() + ens.hidden();
  check_cap(what, m, 10);
  return m;
}

// all parameter-support configurations with nonzero prior mass
std::vector<std::pair<double, RbmParams>> support_configs(const EnsembleParams& ens,
                                                          std::size_t m) {
  const std::size_t d = ens.visible(), k = ens.hidden();
  std::vector<double> val, prob;
  val.reserve(m);
  prob.reserve(m);
  val.insert(val.end(), ens.w_value.a.begin(), ens.w_value.a.end());
  val.insert(val.end(), ens.b_value.begin(), ens.b_value.end());
  val.insert(val.end(), ens.c_value.begin(), ens.c_value.end());
  prob.insert(prob.end(), ens.w_noise.a.begin(), ens.w_noise.a.end());
  prob.insert(prob.end(), ens.b_noise.begin(), ens.b_noise.end());
  prob.insert(prob.end(), ens.c_noise.begin(), ens.c_noise.end());

  std::vector<std::pair<double, RbmParams>> out;
  for (std::uint64_t bits = 0; bits < (1ull << m); ++bits) {
    double logprior = 0.0;
    bool possible = true;
    for (std::size_t t = 0; t < m && possible; ++t) {
      const double p = prob[t];
      if ((bits >> t) & 1) {
        if (p <= 0.0) possible = false;
        else logprior += std::log(p);
      } else {
        if (p >= 1.0) possible = false;
        else logprior += std::log1p(-p);
      }
    }
    if (!possible) continue;
    RbmParams theta{Matrix(d, k), std::vector<double>(d), std::vector<double>(k)};
    for (std::size_t t = 0; t < d * k; ++t) theta.w.a[t] = ((bits >> t) & 1) ? val[t] : 0.0;
    for (std::size_t i = 0; i < d; ++i)
      theta.b[i] = ((bits >> (d * k + i)) & 1) ? val[d * k + i] : 0.0;
    for (std::size_t j = 0; j < k; ++j)
      theta.c[j] = ((bits >> (d * k + d + j)) & 1) ? val[d * k + d + j] : 0.0;
    out.emplace_back(logprior, std::move(theta));
  }
  return out;
}

}  // namespace

double exact_zeta_support(const EnsembleParams& ens) {
  const std::size_t m = checked_support_bits(ens, "exact_zeta_support");
  double z = 0.0;
  for (const auto& [logprior, theta] : support_configs(ens, m))
    z += std::exp(logprior) * exact_partition_rbm(theta);
  return z;
}

MixtureDecomposition mixture_decomposition(const EnsembleParams& ens, const Matrix& dataset) {
  const std::size_t m = checked_support_bits(ens, "mixture_decomposition");
  if (dataset.rows == 0) throw ValidationError("mixture_decomposition: empty dataset");
  if (dataset.cols != ens.visible())
    throw ValidationError("mixture_decomposition: dataset width mismatch");
  for (std::size_t r = 0; r < dataset.rows; ++r)
    if (!in_unit_range({dataset.row(r), dataset.cols}))
      throw ValidationError("mixture_decomposition: data values must lie in [0,1]");

  const std::size_t k = ens.hidden();
  const auto configs = support_configs(ens, m);
  std::vector<double> logprior(configs.size()), cond(configs.size());
  std::vector<double> h(k);
  for (std::size_t c = 0; c < configs.size(); ++c) {
    logprior[c] = configs[c].first;
    const RbmParams& theta = configs[c].second;
    const double logzt = std::log(exact_partition_rbm(theta));
    double total = 0.0;
    for (std::size_t r = 0; r < dataset.rows; ++r) {
      const std::span<const double> v{dataset.row(r), dataset.cols};
      double sum = 0.0;
      for (std::uint64_t hc = 0; hc < (1ull << k); ++hc) {
        for (std::size_t j = 0; j < k; ++j) h[j] = double((hc >> j) & 1);
        sum += std::exp(-energy(v, h, theta));
      }
      total += std::log(sum) - logzt;
    }
    cond[c] = total;
  }

  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < configs.size(); ++c)
    best = std::max(best, logprior[c] + cond[c]);
  double acc = 0.0;
  for (std::size_t c = 0; c < configs.size(); ++c)
    acc += std::exp(logprior[c] + cond[c] - best);

  MixtureDecomposition out;
  out.loglik = best + std::log(acc);
  for (std::size_t c = 0; c < configs.size(); ++c) {
    const double pc = std::exp(logprior[c] + cond[c] - out.loglik);
    if (pc == 0.0) continue;
    out.expected_conditional_loglik += pc * cond[c];
    out.kl_divergence += pc * (cond[c] - out.loglik);
  }
  return out;
}

}  // namespace rbse
