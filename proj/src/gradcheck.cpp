#include "rbse/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iterator>
#include <utility>

#include "json.hpp"
#include "rbse/errors.hpp"
#include "rbse/oracle.hpp"

namespace rbse {

void GradCheckConfig::validate() const {
  if (trials < 1) throw ValidationError("gradcheck: trials must be at least 1");
}

std::string GradCheckReport::to_json() const {
  nlohmann::ordered_json j;
  j["pass"] = pass;
  j["seed"] = seed;
  j["trials"] = trials;
  j["checks"] = nlohmann::ordered_json::array();
  for (const CheckOutcome& c : checks) {
    nlohmann::ordered_json cj;
    cj["name"] = c.name;
    cj["cases"] = c.cases;
    cj["worst"] = c.worst;
    cj["threshold"] = c.threshold;
    cj["pass"] = c.pass;
    j["checks"].push_back(std::move(cj));
  }
  return j.dump(2) + "\n";
}

namespace {

// sizes kept inside the support-enumeration budget (dk + d + k <= 10)
constexpr std::pair<std::size_t, std::size_t> kSmallDims[] = {{1, 1}, {1, 2}, {2, 1},
                                                              {1, 3}, {3, 1}, {2, 2}};

EnsembleParams sample_ensemble(Family f, std::size_t d, std::size_t k, Rng& rng) {
  EnsembleParams e;
  e.family = f;
  e.w_value = Matrix(d, k);
  e.w_noise = Matrix(d, k);
  e.b_value.resize(d);
  e.b_noise.resize(d);
  e.c_value.resize(k);
  e.c_noise.resize(k);
  auto atom = [&] { return -2.0 + 4.0 * rng.uniform(); };
  auto noise = [&] {
    return f == Family::bernoulli ? 0.1 + 0.8 * rng.uniform() : 0.3 + 1.2 * rng.uniform();
  };
  for (auto& x : e.w_value.a) x = atom();
  for (auto& x : e.b_value) x = atom();
  for (auto& x : e.c_value) x = atom();
  for (auto& x : e.w_noise.a) x = noise();
  for (auto& x : e.b_noise) x = noise();
  for (auto& x : e.c_noise) x = noise();
  return e;
}

std::vector<double> random_hard(std::size_t d, Rng& rng) {
  std::vector<double> v(d);
  for (auto& x : v) x = rng.bernoulli(0.5) ? 1.0 : 0.0;
  return v;
}

// relative disagreement, sliding into absolute terms below magnitude 1e-3
double grad_disagreement(const EnsembleGrad& got, const EnsembleGrad& want) {
  const std::vector<double>* ga[] = {&got.w_value.a, &got.w_noise.a, &got.b_value,
                                     &got.b_noise,   &got.c_value,   &got.c_noise};
  const std::vector<double>* wa[] = {&want.w_value.a, &want.w_noise.a, &want.b_value,
                                     &want.b_noise,   &want.c_value,   &want.c_noise};
  double worst = 0.0;
  for (int t = 0; t < 6; ++t)
    for (std::size_t i = 0; i < ga[t]->size(); ++i) {
      const double w = (*wa[t])[i];
      worst = std::max(worst, std::abs((*ga[t])[i] - w) / std::max(std::abs(w), 1e-3));
    }
  return worst;
}

CheckOutcome gradient_fd_check(Family f, std::size_t trials, std::uint64_t seed, bool corrupt) {
  Rng rng(derive_seed(seed, {0x66FD, std::uint64_t(f)}));
  CheckOutcome out;
  out.name = std::string("gradient-fd-") + family_name(f);
  out.cases = trials;
  out.threshold = 1e-4;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t d = 1 + rng.below(3), k = 1 + rng.below(3);
    const EnsembleParams e = sample_ensemble(f, d, k, rng);
    const std::vector<double> v = random_hard(d, rng);
    EnsembleGrad exact = exact_expected_grad(e, v);
    if (corrupt) exact.w_value.a[0] += 1e-2;
    out.worst = std::max(out.worst, grad_disagreement(finite_diff_grad(e, v, 1e-5), exact));
  }
  out.pass = out.worst <= out.threshold;
  return out;
}

// enumerated joint posterior over the finite parameter support vs the product
// of per-component posteriors
CheckOutcome factorization_check(std::size_t trials, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0xFAC1}));
  CheckOutcome out;
  out.name = "posterior-factorization";
  out.cases = trials;
  out.threshold = 1e-10;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto [d, k] = kSmallDims[rng.below(std::size(kSmallDims))];
    const EnsembleParams e = sample_ensemble(Family::bernoulli, d, k, rng);
    const std::vector<double> v = random_hard(d, rng);
    const std::vector<double> h = random_hard(k, rng);

    // flatten the components with their energy coefficients
    std::vector<double> value, p, a;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < k; ++j) {
        value.push_back(e.w_value(i, j));
        p.push_back(e.w_noise(i, j));
        a.push_back(v[i] * h[j]);
      }
    for (std::size_t i = 0; i < d; ++i) {
      value.push_back(e.b_value[i]);
      p.push_back(e.b_noise[i]);
      a.push_back(v[i]);
    }
    for (std::size_t j = 0; j < k; ++j) {
      value.push_back(e.c_value[j]);
      p.push_back(e.c_noise[j]);
      a.push_back(h[j]);
    }

    const std::size_t n = value.size();
    std::vector<double> mass(std::size_t(1) << n);
    double total = 0.0;
    for (std::size_t m = 0; m < mass.size(); ++m) {
      double q = 1.0;
      for (std::size_t c = 0; c < n; ++c)
        q *= (m >> c) & 1 ? p[c] * std::exp(a[c] * value[c]) : 1.0 - p[c];
      mass[m] = q;
      total += q;
    }
    for (std::size_t m = 0; m < mass.size(); ++m) {
      double prod = 1.0;
      for (std::size_t c = 0; c < n; ++c) {
        const double r = posterior_bernoulli(value[c], p[c], a[c]);
        prod *= (m >> c) & 1 ? r : 1.0 - r;
      }
      out.worst = std::max(out.worst, std::abs(mass[m] / total - prod));
    }
  }
  out.pass = out.worst <= out.threshold;
  return out;
}

// sum over every hard visible state of exp(loglik) must be one; this pits the
// analytic free-energy product against the enumerated partition function
CheckOutcome normalization_check(std::size_t trials, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0x0501}));
  CheckOutcome out;
  out.name = "state-normalization";
  out.cases = 2 * trials;
  out.threshold = 1e-10;
  for (const Family f : {Family::bernoulli, Family::gaussian})
    for (std::size_t t = 0; t < trials; ++t) {
      const EnsembleParams e = sample_ensemble(f, 3, 3, rng);
      double sum = 0.0;
      for (std::size_t m = 0; m < 8; ++m) {
        const std::vector<double> v{double(m & 1), double((m >> 1) & 1), double((m >> 2) & 1)};
        sum += std::exp(exact_loglik_flat(e, v));
      }
      out.worst = std::max(out.worst, std::abs(sum - 1.0));
    }
  out.pass = out.worst <= out.threshold;
  return out;
}

CheckOutcome zeta_route_check(std::size_t trials, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0x2E7A}));
  CheckOutcome out;
  out.name = "zeta-support-route";
  out.cases = trials;
  out.threshold = 1e-10;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto [d, k] = kSmallDims[rng.below(std::size(kSmallDims))];
    const EnsembleParams e = sample_ensemble(Family::bernoulli, d, k, rng);
    const double za = exact_zeta(e);
    const double zb = exact_zeta_support(e);
    out.worst = std::max(out.worst, std::abs(za - zb) / za);
  }
  out.pass = out.worst <= out.threshold;
  return out;
}

void mixture_checks(std::size_t trials, std::uint64_t seed, CheckOutcome& identity,
                    CheckOutcome& nonneg) {
  Rng rng(derive_seed(seed, {0x313C}));
  const std::size_t cases = std::max<std::size_t>(trials, 20);
  identity.name = "mixture-identity";
  identity.cases = cases;
  identity.threshold = 1e-8;
  nonneg.name = "mixture-kl-nonnegative";
  nonneg.cases = cases;
  nonneg.threshold = 0.0;
  for (std::size_t t = 0; t < cases; ++t) {
    const EnsembleParams e = sample_ensemble(Family::bernoulli, 2, 2, rng);
    Matrix data(3, 2);
    for (auto& x : data.a) x = rng.bernoulli(0.5) ? 1.0 : 0.0;
    const MixtureDecomposition mix = mixture_decomposition(e, data);
    identity.worst =
        std::max(identity.worst,
                 std::abs(mix.loglik - (mix.expected_conditional_loglik - mix.kl_divergence)));
    nonneg.worst = std::max(nonneg.worst, -mix.kl_divergence);
  }
  identity.pass = identity.worst <= identity.threshold;
  nonneg.pass = nonneg.worst <= nonneg.threshold;
}

}  // namespace

GradCheckReport run_gradcheck(const GradCheckConfig& cfg) {
  cfg.validate();
  const bool corrupt = std::getenv("RBSE_GRADCHECK_CORRUPT") != nullptr;

  GradCheckReport report;
  report.seed = cfg.seed;
  report.trials = cfg.trials;
  report.checks.push_back(gradient_fd_check(Family::bernoulli, cfg.trials, cfg.seed, corrupt));
  report.checks.push_back(gradient_fd_check(Family::gaussian, cfg.trials, cfg.seed, corrupt));
  report.checks.push_back(factorization_check(cfg.trials, cfg.seed));
  report.checks.push_back(normalization_check(cfg.trials, cfg.seed));
  report.checks.push_back(zeta_route_check(cfg.trials, cfg.seed));
  CheckOutcome identity, nonneg;
  mixture_checks(cfg.trials, cfg.seed, identity, nonneg);
  report.checks.push_back(std::move(identity));
  report.checks.push_back(std::move(nonneg));

  report.pass = std::all_of(report.checks.begin(), report.checks.end(),
                            [](const CheckOutcome& c) { return c.pass; });
  return report;
}

}  // namespace rbse
