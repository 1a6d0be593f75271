#include "rbse/ensemble.hpp"

#include <cmath>

#include "rbse/errors.hpp"

namespace rbse {

std::string family_name(Family f) {
  return f == Family::bernoulli ? "bernoulli" : "gaussian";
}

Family family_from_name(const std::string& name) {
  if (name == "bernoulli") return Family::bernoulli;
  if (name == "gaussian") return Family::gaussian;
  throw ValidationError("unknown ensemble family '" + name + "'");
}

void EnsembleParams::validate_shapes() const {
  if (b_value.empty() || c_value.empty()) throw ValidationError("ensemble: dimensions must be at least 1");
  const std::size_t d = b_value.size(), k = c_value.size();
  if (w_value.rows != d || w_value.cols != k || !w_value.same_shape(w_noise))
    throw ValidationError("ensemble: weight plane shapes inconsistent");
  if (b_noise.size() != d || c_noise.size() != k)
    throw ValidationError("ensemble: bias plane lengths inconsistent");
  for (const auto* plane : {&w_value.a, &w_noise.a, &b_value, &b_noise, &c_value, &c_noise})
    for (double x : *plane)
      if (!std::isfinite(x)) throw ValidationError("ensemble: non-finite parameter");
}

void EnsembleParams::validate() const {
  validate_shapes();
  for (const auto* plane : {&w_noise.a, &b_noise, &c_noise})
    for (double x : *plane) {
      if (family == Family::bernoulli && !(x >= 0.0 && x <= 1.0))
        throw ValidationError("ensemble: atom probability outside [0,1]");
      if (family == Family::gaussian && !(x >= 0.0))
        throw ValidationError("ensemble: negative stddev");
    }
}

EnsembleParams init_ensemble(Family family, std::size_t visible, std::size_t hidden,
                             std::uint64_t seed) {
  EnsembleParams e;
  e.family = family;
  e.w_value = Matrix(visible, hidden);
  e.b_value.assign(visible, 0.0);
  e.c_value.assign(hidden, 0.0);
  const double noise0 = family == Family::bernoulli ? 0.5 : 0.1;
  e.w_noise = Matrix(visible, hidden, noise0);
  e.b_noise.assign(visible, noise0);
  e.c_noise.assign(hidden, noise0);
  Rng rng(derive_seed(seed, {0x1218}));
  for (auto& x : e.w_value.a) x = rng.normal(0.0, 0.01);
  return e;
}

void EnsembleGrad::axpy(double alpha, const EnsembleGrad& g) {
  for (std::size_t i = 0; i < w_value.a.size(); ++i) w_value.a[i] += alpha * g.w_value.a[i];
  for (std::size_t i = 0; i < w_noise.a.size(); ++i) w_noise.a[i] += alpha * g.w_noise.a[i];
  for (std::size_t i = 0; i < b_value.size(); ++i) b_value[i] += alpha * g.b_value[i];
  for (std::size_t i = 0; i < b_noise.size(); ++i) b_noise[i] += alpha * g.b_noise[i];
  for (std::size_t i = 0; i < c_value.size(); ++i) c_value[i] += alpha * g.c_value[i];
  for (std::size_t i = 0; i < c_noise.size(); ++i) c_noise[i] += alpha * g.c_noise[i];
}

void EnsembleGrad::scale(double alpha) {
  for (auto* plane : {&w_value.a, &w_noise.a})
    for (auto& x : *plane) x *= alpha;
  for (auto* plane : {&b_value, &b_noise, &c_value, &c_noise})
    for (auto& x : *plane) x *= alpha;
}

double log_moment(Family f, double value, double noise, double a) noexcept {
  if (f == Family::gaussian) return a * value + 0.5 * a * a * noise * noise;
  const double x = a * value;
  if (x > 0.0) return x + std::log1p((1.0 - noise) * std::expm1(-x));
  return std::log1p(noise * std::expm1(x));
}

double posterior_bernoulli(double value, double prob, double a) noexcept {
  if (prob >= 1.0) return 1.0;
  if (prob <= 0.0) return 0.0;
  const double x = a * value;
  if (x > 0.0) return prob / (prob + (1.0 - prob) * std::exp(-x));
  return prob * std::exp(x) / (1.0 + prob * std::expm1(x));
}

double posterior_gaussian_mean(double mean, double std, double a) noexcept {
  return mean + a * std * std;
}

double score_value(Family f, double value, double noise, double a) noexcept {
  if (f == Family::gaussian) return a;
  return a * posterior_bernoulli(value, noise, a);
}

double score_noise(Family f, double value, double noise, double a) noexcept {
  if (f == Family::gaussian) return a * a * noise;
  const double x = a * value;
  if (x > 0.0) return (1.0 - std::exp(-x)) / ((1.0 - noise) * std::exp(-x) + noise);
  return std::expm1(x) / (1.0 + noise * std::expm1(x));
}

double draw_component(Family f, double value, double noise, double a, Rng& rng) noexcept {
  // a = 0 collapses to the prior; skipping the tilt arithmetic matters because
  // sparse states zero out most coefficients. Same draws, same word counts.
  if (f == Family::gaussian)
    return rng.normal(a == 0.0 ? value : posterior_gaussian_mean(value, noise, a), noise);
  return rng.bernoulli(a == 0.0 ? noise : posterior_bernoulli(value, noise, a)) ? value : 0.0;
}

static RbmParams draw_all(const EnsembleParams& ens, const double* v, const double* h, Rng& rng) {
  const std::size_t d = ens.visible(), k = ens.hidden();
  RbmParams theta{Matrix(d, k), std::vector<double>(d), std::vector<double>(k)};
  const Family f = ens.family;
  for (std::size_t i = 0; i < d; ++i) {
    const double vi = v ? v[i] : 0.0;
    const double* val = ens.w_value.row(i);
    const double* noi = ens.w_noise.row(i);
    double* out = theta.w.row(i);
    for (std::size_t j = 0; j < k; ++j)
      out[j] = draw_component(f, val[j], noi[j], vi * (h ? h[j] : 0.0), rng);
  }
  for (std::size_t i = 0; i < d; ++i)
    theta.b[i] = draw_component(f, ens.b_value[i], ens.b_noise[i], v ? v[i] : 0.0, rng);
  for (std::size_t j = 0; j < k; ++j)
    theta.c[j] = draw_component(f, ens.c_value[j], ens.c_noise[j], h ? h[j] : 0.0, rng);
  return theta;
}

RbmParams sample_theta_prior(const EnsembleParams& ens, Rng& rng) {
  ens.validate();
  return draw_all(ens, nullptr, nullptr, rng);
}

RbmParams draw_theta(const EnsembleParams& ens, std::span<const double> v,
                     std::span<const double> h, Rng& rng) {
  if (v.size() != ens.visible() || h.size() != ens.hidden())
    throw ValidationError("ensemble: state dimensions do not match");
  return draw_all(ens, v.data(), h.data(), rng);
}

RbmParams sample_theta_posterior(const EnsembleParams& ens, std::span<const double> v,
                                 std::span<const double> h, Rng& rng) {
  if (!is_hard(v) || !is_hard(h))
    throw ValidationError("sample_theta_posterior: states must be hard 0/1 vectors");
  return draw_theta(ens, v, h, rng);
}

RbmParams mean_model(const EnsembleParams& ens) {
  const std::size_t d = ens.visible(), k = ens.hidden();
  RbmParams m{Matrix(d, k), std::vector<double>(d), std::vector<double>(k)};
  if (ens.family == Family::gaussian) {
    m.w = ens.w_value;
    m.b = ens.b_value;
    m.c = ens.c_value;
    return m;
  }
  for (std::size_t i = 0; i < m.w.a.size(); ++i) m.w.a[i] = ens.w_value.a[i] * ens.w_noise.a[i];
  for (std::size_t i = 0; i < d; ++i) m.b[i] = ens.b_value[i] * ens.b_noise[i];
  for (std::size_t j = 0; j < k; ++j) m.c[j] = ens.c_value[j] * ens.c_noise[j];
  return m;
}

EnsembleGrad expected_phi_grad(const EnsembleParams& ens, std::span<const double> v,
                               std::span<const double> h) {
  if (v.size() != ens.visible() || h.size() != ens.hidden())
    throw ValidationError("expected_phi_grad: state dimensions do not match");
  if (!is_hard(v) || !is_hard(h))
    throw ValidationError("expected_phi_grad: states must be hard 0/1 vectors");
  const std::size_t d = ens.visible(), k = ens.hidden();
  const Family f = ens.family;
  EnsembleGrad g(d, k);
  for (std::size_t i = 0; i < d; ++i) {
    const double vi = v[i];
    const double* val = ens.w_value.row(i);
    const double* noi = ens.w_noise.row(i);
    double* gv = g.w_value.row(i);
    double* gn = g.w_noise.row(i);
    for (std::size_t j = 0; j < k; ++j) {
      const double a = vi * h[j];
      gv[j] = -score_value(f, val[j], noi[j], a);
      gn[j] = -score_noise(f, val[j], noi[j], a);
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    g.b_value[i] = -score_value(f, ens.b_value[i], ens.b_noise[i], v[i]);
    g.b_noise[i] = -score_noise(f, ens.b_value[i], ens.b_noise[i], v[i]);
  }
  for (std::size_t j = 0; j < k; ++j) {
    g.c_value[j] = -score_value(f, ens.c_value[j], ens.c_noise[j], h[j]);
    g.c_noise[j] = -score_noise(f, ens.c_value[j], ens.c_noise[j], h[j]);
  }
  return g;
}

double ensemble_free_energy(const EnsembleParams& ens, std::span<const double> v) {
  if (v.size() != ens.visible()) throw ValidationError("ensemble_free_energy: dimension mismatch");
  const std::size_t d = ens.visible(), k = ens.hidden();
  const Family f = ens.family;
  double fe = 0.0;
  for (std::size_t i = 0; i < d; ++i) fe += log_moment(f, ens.b_value[i], ens.b_noise[i], v[i]);
  std::vector<double> s(k);
  for (std::size_t j = 0; j < k; ++j) s[j] = log_moment(f, ens.c_value[j], ens.c_noise[j], 1.0);
  for (std::size_t i = 0; i < d; ++i) {
    const double vi = v[i];
    if (vi == 0.0) continue;
    const double* val = ens.w_value.row(i);
    const double* noi = ens.w_noise.row(i);
    for (std::size_t j = 0; j < k; ++j) s[j] += log_moment(f, val[j], noi[j], vi);
  }
  for (double x : s) fe += softplus(x);
  return -fe;
}

}  // namespace rbse
