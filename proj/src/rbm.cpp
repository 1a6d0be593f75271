#include "rbse/rbm.hpp"

#include <cmath>

#include "rbse/errors.hpp"

namespace rbse {

bool is_hard(std::span<const double> s) noexcept {
  for (double x : s)
    if (x != 0.0 && x != 1.0) return false;
  return true;
}

bool in_unit_range(std::span<const double> s) noexcept {
  for (double x : s)
    if (!(x >= 0.0 && x <= 1.0)) return false;
  return true;
}

void RbmParams::validate() const {
  if (b.empty() || c.empty()) throw ValidationError("rbm: dimensions must be at least 1");
  if (w.rows != b.size() || w.cols != c.size())
    throw ValidationError("rbm: weight shape does not match bias lengths");
  for (double x : w.a)
    if (!std::isfinite(x)) throw ValidationError("rbm: non-finite weight");
  for (double x : b)
    if (!std::isfinite(x)) throw ValidationError("rbm: non-finite visible bias");
  for (double x : c)
    if (!std::isfinite(x)) throw ValidationError("rbm: non-finite hidden bias");
}

RbmParams init_rbm(std::size_t visible, std::size_t hidden, std::uint64_t seed) {
  RbmParams p{Matrix(visible, hidden), std::vector<double>(visible, 0.0),
              std::vector<double>(hidden, 0.0)};
  Rng rng(derive_seed(seed, {0x1217}));
  for (auto& x : p.w.a) x = rng.normal(0.0, 0.01);
  return p;
}

static void check_dims(std::size_t got, std::size_t want, const char* what) {
  if (got != want) throw ValidationError(std::string("rbm: ") + what + " length mismatch");
}

double energy(std::span<const double> v, std::span<const double> h, const RbmParams& params) {
  check_dims(v.size(), params.visible(), "visible");
  check_dims(h.size(), params.hidden(), "hidden");
  double e = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) e += params.b[i] * v[i];
  for (std::size_t j = 0; j < h.size(); ++j) e += params.c[j] * h[j];
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double vi = v[i];
    if (vi == 0.0) continue;
    const double* wrow = params.w.row(i);
    for (std::size_t j = 0; j < h.size(); ++j) e += vi * wrow[j] * h[j];
  }
  return -e;
}

std::vector<double> hidden_conditional(std::span<const double> v, const RbmParams& params) {
  check_dims(v.size(), params.visible(), "visible");
  std::vector<double> act(params.c.begin(), params.c.end());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double vi = v[i];
    if (vi == 0.0) continue;
    const double* wrow = params.w.row(i);
    for (std::size_t j = 0; j < act.size(); ++j) act[j] += vi * wrow[j];
  }
  for (auto& x : act) x = logistic(x);
  return act;
}

std::vector<double> visible_conditional(std::span<const double> h, const RbmParams& params) {
  check_dims(h.size(), params.hidden(), "hidden");
  std::vector<double> act(params.b.begin(), params.b.end());
  for (std::size_t i = 0; i < act.size(); ++i) {
    const double* wrow = params.w.row(i);
    double acc = act[i];
    for (std::size_t j = 0; j < h.size(); ++j) acc += wrow[j] * h[j];
    act[i] = logistic(acc);
  }
  return act;
}

State sample_state(std::span<const double> probs, Rng& rng) {
  State s(probs.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = rng.bernoulli(probs[i]) ? 1.0 : 0.0;
  return s;
}

double rbm_free_energy(std::span<const double> v, const RbmParams& params) {
  check_dims(v.size(), params.visible(), "visible");
  double f = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) f += params.b[i] * v[i];
  std::vector<double> act(params.c.begin(), params.c.end());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double vi = v[i];
    if (vi == 0.0) continue;
    const double* wrow = params.w.row(i);
    for (std::size_t j = 0; j < act.size(); ++j) act[j] += vi * wrow[j];
  }
  for (double x : act) f += softplus(x);
  return -f;
}

void RbmGrad::axpy(double alpha, const RbmGrad& g) {
  for (std::size_t i = 0; i < w.a.size(); ++i) w.a[i] += alpha * g.w.a[i];
  for (std::size_t i = 0; i < b.size(); ++i) b[i] += alpha * g.b[i];
  for (std::size_t i = 0; i < c.size(); ++i) c[i] += alpha * g.c[i];
}

std::uint64_t model_chain_seed(std::uint64_t step_seed, std::span<const double> v,
                               int mc_index) noexcept {
  return derive_seed(step_seed, {0xC0DE0001ull, content_hash(v), std::uint64_t(mc_index)});
}

std::uint64_t clamped_chain_seed(std::uint64_t step_seed, std::span<const double> v,
                                 int mc_index) noexcept {
  return derive_seed(step_seed, {0xC0DE0002ull, content_hash(v), std::uint64_t(mc_index)});
}

CdTerms cd_k_rbm_terms(const RbmParams& params, const Matrix& data,
                       std::span<const std::size_t> rows, int k, std::uint64_t step_seed,
                       double* recon_sq_err) {
  params.validate();
  if (rows.empty()) throw ValidationError("cd_k_rbm: empty batch");
  if (k < 1) throw ValidationError("cd_k_rbm: k must be at least 1");
  const std::size_t d = params.visible(), kk = params.hidden();
  if (data.cols != d) throw ValidationError("cd_k_rbm: data width does not match model");

  CdTerms terms{RbmGrad(d, kk), RbmGrad(d, kk)};
  double err_sum = 0.0;
  for (const WeightedRow wr : unique_weighted_rows(data, rows)) {
    const std::span<const double> v{data.row(wr.row), d};
    ChainRng rng(model_chain_seed(step_seed, v, 0));
    // real-valued rows are Bernoulli means: they enter pre-activations as-is
    // and their chain propagates means on both layers instead of sampling
    // hard states
    const bool soft = !is_hard(v);

    const std::vector<double> ph0 = hidden_conditional(v, params);
    for (std::size_t i = 0; i < d; ++i) {
      const double vi = wr.weight * v[i];
      terms.data.b[i] += vi;
      if (vi == 0.0) continue;
      double* wrow = terms.data.w.row(i);
      for (std::size_t j = 0; j < kk; ++j) wrow[j] += vi * ph0[j];
    }
    for (std::size_t j = 0; j < kk; ++j) terms.data.c[j] += wr.weight * ph0[j];

    State h = soft ? ph0 : sample_state(ph0, rng.state);
    State vk;
    for (int t = 0; t <= k; ++t) {
      const std::vector<double> pv = visible_conditional(h, params);
      if (t == 0) {
        double e = 0.0;
        for (std::size_t i = 0; i < d; ++i) e += (v[i] - pv[i]) * (v[i] - pv[i]);
        err_sum += wr.weight * e / double(d);
      }
      vk = soft ? pv : sample_state(pv, rng.state);
      const std::vector<double> ph = hidden_conditional(vk, params);
      h = soft ? ph : sample_state(ph, rng.state);
    }

    for (std::size_t i = 0; i < d; ++i) {
      const double vi = wr.weight * vk[i];
      terms.recon.b[i] += vi;
      if (vi == 0.0) continue;
      double* wrow = terms.recon.w.row(i);
      for (std::size_t j = 0; j < kk; ++j) wrow[j] += vi * h[j];
    }
    for (std::size_t j = 0; j < kk; ++j) terms.recon.c[j] += wr.weight * h[j];
  }

  if (recon_sq_err) *recon_sq_err = err_sum;
  return terms;
}

RbmGrad cd_k_rbm(const RbmParams& params, const Matrix& data, std::span<const std::size_t> rows,
                 int k, std::uint64_t step_seed, double* recon_sq_err) {
  CdTerms t = cd_k_rbm_terms(params, data, rows, k, step_seed, recon_sq_err);
  t.data.axpy(-1.0, t.recon);
  return t.data;
}

}  // namespace rbse
