#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "doctest.h"
#include "rbse/errors.hpp"
#include "rbse/oracle.hpp"
#include "rbse/training.hpp"

using namespace rbse;

namespace {

EnsembleParams zero_bernoulli(std::size_t d, std::size_t k) {
  EnsembleParams ens = init_ensemble(Family::bernoulli, d, k, 1);
  for (auto& x : ens.w_value.a) x = 0.0;
  return ens;
}

EnsembleParams random_ensemble(Family f, std::size_t d, std::size_t k, std::uint64_t seed) {
  EnsembleParams ens = init_ensemble(f, d, k, seed);
  Rng rng(derive_seed(seed, {0xF00D}));
  auto planes = {&ens.w_value.a, &ens.b_value, &ens.c_value};
  for (auto* plane : planes)
    for (auto& x : *plane) x = rng.normal(0.0, 0.8);
  auto noises = {&ens.w_noise.a, &ens.b_noise, &ens.c_noise};
  for (auto* plane : noises)
    for (auto& x : *plane)
      x = f == Family::bernoulli ? 0.1 + 0.8 * rng.uniform() : 0.3 + 1.2 * rng.uniform();
  return ens;
}

Matrix random_hard(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Matrix m(rows, cols);
  Rng rng(seed);
  for (auto& x : m.a) x = rng.bernoulli(0.5) ? 1.0 : 0.0;
  return m;
}

TrainConfig basic_config() {
  TrainConfig cfg;
  cfg.k = 1;
  cfg.learning_rate = 0.05;
  cfg.batch_size = 4;
  cfg.epochs = 2;
  cfg.seed = 99;
  return cfg;
}

std::array<const std::vector<double>*, 6> grad_planes(const EnsembleGrad& g) {
  return {&g.w_value.a, &g.w_noise.a, &g.b_value, &g.b_noise, &g.c_value, &g.c_noise};
}

}  // namespace

TEST_SUITE("training") {
  TEST_CASE("config validation rejects out-of-range fields") {
    TrainConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    auto broken = [&](auto&& mutate) {
      TrainConfig c = cfg;
      mutate(c);
      CHECK_THROWS_AS(c.validate(), ValidationError);
    };
    broken([](TrainConfig& c) { c.k = 0; });
    broken([](TrainConfig& c) { c.learning_rate = 0.0; });
    broken([](TrainConfig& c) { c.learning_rate = -1.0; });
    broken([](TrainConfig& c) { c.batch_size = 0; });
    broken([](TrainConfig& c) { c.epsilon = 0.0; });
    broken([](TrainConfig& c) { c.epsilon = 0.5; });
    broken([](TrainConfig& c) { c.sigma_min = 0.0; });
    broken([](TrainConfig& c) { c.mc_samples = 0; });
    broken([](TrainConfig& c) { c.threads = 0; });
  }

  TEST_CASE("model chain validates inputs") {
    const EnsembleParams ens = zero_bernoulli(2, 2);
    ChainRng rng(1);
    CHECK_THROWS_AS(gibbs_model_chain(ens, {0.5, 0.0}, {0.0, 1.0}, 1, rng), ValidationError);
    CHECK_THROWS_AS(gibbs_model_chain(ens, {0.0, 1.0}, {0.0}, 1, rng), ValidationError);
    CHECK_THROWS_AS(gibbs_model_chain(ens, {0.0, 1.0}, {0.0, 1.0}, 0, rng), ValidationError);
  }

  TEST_CASE("zero ensemble: joint chain states are uniform") {
    const EnsembleParams ens = zero_bernoulli(2, 2);
    ChainRng rng(404);
    State v{0.0, 0.0}, h{0.0, 0.0};
    const int n = 20000;
    std::vector<int> counts(16, 0);
    for (int t = 0; t < n; ++t) {
      std::tie(v, h) = gibbs_model_chain(ens, std::move(v), std::move(h), 1, rng);
      const int code = int(v[0]) | int(v[1]) << 1 | int(h[0]) << 2 | int(h[1]) << 3;
      ++counts[code];
    }
    // all parameters are zero, so every sweep resamples (v, h) uniformly
    const double expect = n / 16.0;
    const double sigma = std::sqrt(n * (1.0 / 16.0) * (15.0 / 16.0));
    for (int c : counts) CHECK(std::abs(c - expect) < 3.0 * sigma);
  }

  TEST_CASE("model chain is deterministic under a fixed seed") {
    const EnsembleParams ens = random_ensemble(Family::bernoulli, 3, 2, 7);
    ChainRng a(55), b(55);
    const auto ra = gibbs_model_chain(ens, {1.0, 0.0, 1.0}, {0.0, 1.0}, 5, a);
    const auto rb = gibbs_model_chain(ens, {1.0, 0.0, 1.0}, {0.0, 1.0}, 5, b);
    CHECK(ra.first == rb.first);
    CHECK(ra.second == rb.second);
  }

  TEST_CASE("degenerate bernoulli ensemble replays a plain rbm chain bit for bit") {
    // p = 1 pins every component at its atom, so the parameter draws are
    // deterministic and the state stream must match a hand-rolled RBM chain
    // consuming the same words.
    const std::size_t d = 3, k = 2;
    RbmParams rbm = init_rbm(d, k, 11);
    Rng fill(1212);
    for (auto& x : rbm.b) x = fill.normal(0.0, 0.7);
    for (auto& x : rbm.c) x = fill.normal(0.0, 0.7);

    EnsembleParams ens;
    ens.family = Family::bernoulli;
    ens.w_value = rbm.w;
    ens.w_noise = Matrix(d, k, 1.0);
    ens.b_value = rbm.b;
    ens.b_noise.assign(d, 1.0);
    ens.c_value = rbm.c;
    ens.c_noise.assign(k, 1.0);

    const State v0{1.0, 0.0, 1.0};
    const State h0{0.0, 1.0};
    const int rounds = 3;

    ChainRng ens_rng(321);
    const auto [ve, he] = gibbs_model_chain(ens, v0, h0, rounds, ens_rng);

    ChainRng raw(321);
    State v = v0, h = h0;
    for (int t = 0; t <= rounds; ++t) {
      v = sample_state(visible_conditional(h, rbm), raw.state);
      h = sample_state(hidden_conditional(v, rbm), raw.state);
    }
    CHECK(ve == v);
    CHECK(he == h);
  }

  TEST_CASE("clamped chain holds v fixed and tracks saturated hidden biases") {
    EnsembleParams ens = zero_bernoulli(2, 1);
    for (auto& x : ens.w_noise.a) x = 1.0;
    ens.b_noise.assign(2, 1.0);
    ens.c_noise.assign(1, 1.0);
    ens.c_value[0] = 10.0;

    const State v{1.0, 0.0};
    int ones = 0;
    const int n = 10000;
    for (int t = 0; t < n; ++t) {
      ChainRng rng(derive_seed(77, {std::uint64_t(t)}));
      const State h = gibbs_clamped_chain(ens, v, {0.0}, 2, rng);
      ones += h[0] == 1.0;
    }
    CHECK(double(ones) / n > 0.9999);
  }

  TEST_CASE("clamped chain accepts mean-field v but rejects soft h") {
    const EnsembleParams ens = random_ensemble(Family::gaussian, 2, 2, 3);
    ChainRng rng(9);
    const std::vector<double> soft{0.3, 0.7};
    CHECK_NOTHROW(gibbs_clamped_draw(ens, soft, {0.0, 1.0}, 1, rng));
    CHECK_THROWS_AS(gibbs_clamped_draw(ens, soft, {0.5, 1.0}, 1, rng), ValidationError);
    CHECK_THROWS_AS(gibbs_clamped_chain(ens, soft, {0.0, 1.0}, 1, rng), ValidationError);
  }

  TEST_CASE("em step: clamped coefficients vanish where v is zero") {
    const EnsembleParams ens = zero_bernoulli(3, 2);
    Matrix data(1, 3, 0.0);
    const std::size_t rows[] = {0};
    TrainConfig cfg = basic_config();
    // with v = 0 the clamped term cannot touch W or b, so the only possible
    // contributions are the model term's, which are 0 or -score(1) = -0.5 here
    const EnsembleGrad g = em_cd_k_step(ens, data, rows, cfg, 123);
    for (double x : g.w_value.a) CHECK((x == 0.0 || x == -0.5));
    for (double x : g.b_value) CHECK((x == 0.0 || x == -0.5));
  }

  TEST_CASE("em step: gradient is invariant under batch duplication") {
    const EnsembleParams ens = random_ensemble(Family::bernoulli, 4, 3, 21);
    const Matrix data = random_hard(3, 4, 22);
    const std::size_t once[] = {0, 1, 2};
    const std::size_t twice[] = {0, 1, 2, 0, 1, 2};
    TrainConfig cfg = basic_config();
    cfg.k = 2;
    double r1 = 0.0, r2 = 0.0;
    const EnsembleGrad g1 = em_cd_k_step(ens, data, once, cfg, 55, &r1);
    const EnsembleGrad g2 = em_cd_k_step(ens, data, twice, cfg, 55, &r2);
    CHECK(g1 == g2);
    CHECK(r1 == r2);
  }

  TEST_CASE("em step: input validation") {
    const EnsembleParams ens = random_ensemble(Family::bernoulli, 2, 2, 5);
    Matrix data(1, 2);
    data(0, 0) = 0.4;
    const std::size_t rows[] = {0};
    TrainConfig cfg = basic_config();
    CHECK_THROWS_AS(em_cd_k_step(ens, data, rows, cfg, 1), ValidationError);
    data(0, 0) = 1.0;
    CHECK_THROWS_AS(em_cd_k_step(ens, data, {}, cfg, 1), ValidationError);
    const std::size_t bad[] = {3};
    CHECK_THROWS_AS(em_cd_k_step(ens, data, bad, cfg, 1), ValidationError);
    cfg.chain_init = ChainInit::persistent;
    CHECK_THROWS_AS(em_cd_k_step(ens, data, rows, cfg, 1), ValidationError);
  }

  TEST_CASE("em step matches the oracle gradient within monte carlo error") {
    for (const Family f : {Family::bernoulli, Family::gaussian}) {
      CAPTURE(family_name(f));
      const EnsembleParams ens = random_ensemble(f, 2, 2, 31);
      Matrix data(1, 2);
      data(0, 0) = 1.0;
      const std::size_t rows[] = {0};
      TrainConfig cfg = basic_config();
      cfg.k = 50;

      const EnsembleGrad want = evaluate_exact(ens, data).gradient;
      const int n = 4000;
      EnsembleGrad sum(2, 2);
      EnsembleGrad sumsq(2, 2);
      for (int t = 0; t < n; ++t) {
        EnsembleGrad g =
            em_cd_k_step(ens, data, rows, cfg, derive_seed(606, {std::uint64_t(t)}));
        sum.axpy(1.0, g);
        for (auto* plane : {&g.w_value.a, &g.w_noise.a, &g.b_value, &g.b_noise, &g.c_value,
                            &g.c_noise})
          for (double& x : *plane) x *= x;
        sumsq.axpy(1.0, g);
      }
      const auto s1 = grad_planes(sum);
      const auto s2 = grad_planes(sumsq);
      const auto ws = grad_planes(want);
      for (int p = 0; p < 6; ++p) {
        for (std::size_t i = 0; i < s1[p]->size(); ++i) {
          const double mean = (*s1[p])[i] / n;
          const double var = std::max(0.0, (*s2[p])[i] / n - mean * mean);
          const double se = std::sqrt(var / n);
          CAPTURE(p);
          CAPTURE(i);
          CHECK(std::abs(mean - (*ws[p])[i]) <= 3.0 * se + 1e-12);
        }
      }
    }
  }

  TEST_CASE("em step collapses to plain cd when gaussian noise is zero") {
    const std::size_t d = 4, k = 3;
    RbmParams rbm = init_rbm(d, k, 17);
    Rng fill(888);
    for (auto& x : rbm.w.a) x = fill.normal(0.0, 0.6);
    for (auto& x : rbm.b) x = fill.normal(0.0, 0.4);
    for (auto& x : rbm.c) x = fill.normal(0.0, 0.4);

    EnsembleParams ens;
    ens.family = Family::gaussian;
    ens.w_value = rbm.w;
    ens.w_noise = Matrix(d, k, 0.0);
    ens.b_value = rbm.b;
    ens.b_noise.assign(d, 0.0);
    ens.c_value = rbm.c;
    ens.c_noise.assign(k, 0.0);

    const Matrix data = random_hard(2, d, 19);
    const std::size_t rows[] = {0, 1};
    TrainConfig cfg = basic_config();
    cfg.k = 2;

    double rc = 0.0, re = 0.0;
    const RbmGrad cd = cd_k_rbm(rbm, data, rows, cfg.k, 771, &rc);
    const EnsembleGrad em = em_cd_k_step(ens, data, rows, cfg, 771, &re);

    for (std::size_t i = 0; i < cd.w.a.size(); ++i)
      CHECK(std::abs(em.w_value.a[i] - cd.w.a[i]) <= 1e-8);
    for (std::size_t i = 0; i < d; ++i)
      CHECK(std::abs(em.b_value[i] - cd.b[i]) <= 1e-8);
    for (std::size_t j = 0; j < k; ++j)
      CHECK(std::abs(em.c_value[j] - cd.c[j]) <= 1e-8);
    for (double x : em.w_noise.a) CHECK(x == 0.0);
    for (double x : em.b_noise) CHECK(x == 0.0);
    for (double x : em.c_noise) CHECK(x == 0.0);
    CHECK(std::abs(rc - re) <= 1e-12);
  }

  TEST_CASE("em step: persistent chains carry hidden state between steps") {
    const EnsembleParams ens = random_ensemble(Family::bernoulli, 3, 3, 41);
    const Matrix data = random_hard(2, 3, 42);
    const std::size_t rows[] = {0, 1};
    TrainConfig cfg = basic_config();
    cfg.chain_init = ChainInit::persistent;
    cfg.mc_samples = 2;

    PersistentChains store;
    em_cd_k_step(ens, data, rows, cfg, 900, nullptr, &store);
    REQUIRE(store.hidden.size() == 2);
    for (const auto& [slot, kept] : store.hidden) {
      CHECK(slot < 2);
      REQUIRE(kept.size() == 2);
      for (const State& h : kept) {
        REQUIRE(h.size() == 3);
        CHECK(is_hard(h));
      }
    }

    // same seeds, fresh store: first step reproduces exactly
    PersistentChains store2;
    const EnsembleGrad a = em_cd_k_step(ens, data, rows, cfg, 901, nullptr, &store);
    const EnsembleGrad b = [&] {
      PersistentChains s;
      em_cd_k_step(ens, data, rows, cfg, 900, nullptr, &s);
      return em_cd_k_step(ens, data, rows, cfg, 901, nullptr, &s);
    }();
    CHECK(a == b);

    // a cold store at the same step seed starts its chains differently
    const EnsembleGrad cold = em_cd_k_step(ens, data, rows, cfg, 901, nullptr, &store2);
    CHECK(a != cold);

    const std::size_t dup[] = {0, 0};
    CHECK_THROWS_AS(em_cd_k_step(ens, data, dup, cfg, 902, nullptr, &store), ValidationError);
  }

  TEST_CASE("apply_update scales by the learning rate and clamps noise planes") {
    EnsembleParams ens = zero_bernoulli(2, 2);
    ens.w_value(0, 0) = 0.2;
    TrainConfig cfg = basic_config();
    cfg.learning_rate = 1.0;

    EnsembleGrad g(2, 2);
    g.w_value(0, 0) = 0.3;
    g.w_noise(0, 0) = 0.5;  // pushes p = 0.5 over the upper clamp
    g.b_noise[0] = -1.0;
    const EnsembleParams out = apply_update(ens, g, cfg);
    CHECK(out.w_value(0, 0) == doctest::Approx(0.5));
    CHECK(out.w_noise(0, 0) == doctest::Approx(1.0 - cfg.epsilon));
    CHECK(out.b_noise[0] == doctest::Approx(cfg.epsilon));
    CHECK(out.w_noise(1, 1) == 0.5);

    // zero step still legalizes out-of-range noise
    EnsembleParams dirty = ens;
    dirty.c_noise[0] = 0.999;
    dirty.c_noise[1] = 1e-6;
    const EnsembleParams fixed = apply_update(dirty, EnsembleGrad(2, 2), cfg);
    CHECK(fixed.c_noise[0] == doctest::Approx(0.99));
    CHECK(fixed.c_noise[1] == doctest::Approx(0.01));

    EnsembleParams gauss = random_ensemble(Family::gaussian, 2, 2, 1);
    gauss.b_noise[0] = 1e-5;
    const EnsembleParams gfixed = apply_update(gauss, EnsembleGrad(2, 2), cfg);
    CHECK(gfixed.b_noise[0] == doctest::Approx(cfg.sigma_min));

    CHECK_THROWS_AS(apply_update(ens, EnsembleGrad(3, 2), cfg), ValidationError);
  }

  TEST_CASE("train: zero epochs is a no-op with an empty history") {
    const EnsembleParams ens = random_ensemble(Family::bernoulli, 3, 2, 61);
    const Matrix data = random_hard(4, 3, 62);
    TrainConfig cfg = basic_config();
    cfg.epochs = 0;
    const auto [out, hist] = train(ens, data, cfg);
    CHECK(out == ens);
    CHECK(hist.epochs.empty());
  }

  TEST_CASE("train: fixed seed reproduces parameters and history exactly") {
    const EnsembleParams ens = random_ensemble(Family::bernoulli, 3, 2, 63);
    const Matrix data = random_hard(6, 3, 64);
    TrainConfig cfg = basic_config();
    const auto [p1, h1] = train(ens, data, cfg);
    const auto [p2, h2] = train(ens, data, cfg);
    CHECK(p1 == p2);
    CHECK(h1.to_csv() == h2.to_csv());
    REQUIRE(h1.epochs.size() == cfg.epochs);
    CHECK(h1.group_names.size() == 6);
    CHECK(h1.epochs[0].group_norms.size() == 6);

    TrainConfig other = cfg;
    other.seed = 65;
    const auto [p3, h3] = train(ens, data, other);
    CHECK(p1 != p3);
  }

  TEST_CASE("train: thread count does not change the result") {
    const EnsembleParams ens = random_ensemble(Family::bernoulli, 4, 3, 66);
    const Matrix data = random_hard(8, 4, 67);
    TrainConfig cfg = basic_config();
    cfg.mc_samples = 2;
    const auto [p1, h1] = train(ens, data, cfg);
    TrainConfig threaded = cfg;
    threaded.threads = 4;
    const auto [p2, h2] = train(ens, data, threaded);
    CHECK(p1 == p2);
    CHECK(h1.to_csv() == h2.to_csv());
  }

  TEST_CASE("train: soft rows are resampled per step, deterministically") {
    const EnsembleParams ens = random_ensemble(Family::bernoulli, 3, 2, 71);
    Matrix data(3, 3, 0.0);
    data(0, 0) = 0.3;
    data(0, 1) = 0.9;
    data(1, 1) = 1.0;
    data(2, 2) = 0.5;
    TrainConfig cfg = basic_config();
    cfg.batch_size = 2;
    const auto [p1, h1] = train(ens, data, cfg);
    const auto [p2, h2] = train(ens, data, cfg);
    CHECK(p1 == p2);
    CHECK(h1.to_csv() == h2.to_csv());
  }

  TEST_CASE("train: exact gradients climb the oracle log-likelihood") {
    EnsembleParams ens = random_ensemble(Family::bernoulli, 2, 2, 81);
    Matrix data(1, 2);
    data(0, 0) = 1.0;
    TrainConfig cfg = basic_config();
    cfg.epochs = 1;
    cfg.learning_rate = 0.02;
    cfg.batch_size = 1;

    double prev = evaluate_exact(ens, data).loglik[0];
    for (int round = 0; round < 40; ++round) {
      ens = train(std::move(ens), data, cfg, GradientMode::exact).first;
      const double cur = evaluate_exact(ens, data).loglik[0];
      CHECK(cur >= prev - 1e-10);
      prev = cur;
    }
  }

  TEST_CASE("train_rbm: deterministic and shaped like its history") {
    const RbmParams rbm = init_rbm(3, 2, 91);
    const Matrix data = random_hard(6, 3, 92);
    TrainConfig cfg = basic_config();
    const auto [p1, h1] = train_rbm(rbm, data, cfg);
    const auto [p2, h2] = train_rbm(rbm, data, cfg);
    CHECK(p1 == p2);
    CHECK(h1.to_csv() == h2.to_csv());
    REQUIRE(h1.epochs.size() == cfg.epochs);
    CHECK(h1.group_names == std::vector<std::string>{"w", "b", "c"});
    CHECK(p1 != rbm);

    // soft rows feed the chain as mean-field values directly
    Matrix soft(2, 3, 0.4);
    CHECK_NOTHROW(train_rbm(rbm, soft, cfg));
  }

  TEST_CASE("history csv carries one row per epoch and no wall-clock column") {
    TrainHistory hist;
    hist.group_names = {"w", "b"};
    hist.epochs.push_back({0.25, {1.5, 0.5}, 12.34});
    hist.epochs.push_back({0.125, {0.75, 0.25}, 56.78});
    CHECK(hist.to_csv() ==
          "epoch,recon_error,w,b\n"
          "1,0.25,1.5,0.5\n"
          "2,0.125,0.75,0.25\n");
  }
}
