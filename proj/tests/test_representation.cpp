#include <cmath>
#include <cstddef>
#include <vector>

#include "doctest.h"
#include "rbse/errors.hpp"
#include "rbse/representation.hpp"

using namespace rbse;

namespace {

RbmParams zero_rbm(std::size_t d, std::size_t k) {
  return {Matrix(d, k), std::vector<double>(d, 0.0), std::vector<double>(k, 0.0)};
}

EnsembleParams pinned_ensemble(const RbmParams& atoms) {
  EnsembleParams ens;
  ens.family = Family::bernoulli;
  ens.w_value = atoms.w;
  ens.w_noise = Matrix(atoms.visible(), atoms.hidden(), 1.0);
  ens.b_value = atoms.b;
  ens.b_noise.assign(atoms.visible(), 1.0);
  ens.c_value = atoms.c;
  ens.c_noise.assign(atoms.hidden(), 1.0);
  return ens;
}

RbmParams random_rbm(std::size_t d, std::size_t k, std::uint64_t seed) {
  RbmParams p = init_rbm(d, k, seed);
  Rng rng(derive_seed(seed, {0xAB}));
  for (auto& x : p.w.a) x = rng.normal(0.0, 0.8);
  for (auto& x : p.b) x = rng.normal(0.0, 0.4);
  for (auto& x : p.c) x = rng.normal(0.0, 0.4);
  return p;
}

}  // namespace

TEST_SUITE("representation") {
  TEST_CASE("deterministic representation is the hidden mean field") {
    const RbmParams zero = zero_rbm(3, 2);
    const std::vector<double> v{1.0, 0.0, 1.0};
    const auto rep = deterministic_representation(zero, v);
    REQUIRE(rep.size() == 2);
    for (double x : rep) CHECK(x == 0.5);

    RbmParams unit = zero_rbm(1, 1);
    unit.w(0, 0) = 1.0;
    const auto one = deterministic_representation(unit, std::vector<double>{1.0});
    CHECK(one[0] == doctest::Approx(0.7310585786).epsilon(1e-9));

    CHECK(deterministic_representation(zero, v) == rep);
    CHECK_THROWS_AS(deterministic_representation(zero, std::vector<double>{1.0}),
                    ValidationError);
    CHECK_THROWS_AS(deterministic_representation(zero, std::vector<double>{1.0, 0.0, 1.5}),
                    ValidationError);

    const RepresentationSet set = deterministic_set(zero, v);
    CHECK(set.kind == RepKind::deterministic);
    CHECK(set.source == State(v));
    REQUIRE(set.reps.size() == 1);
    CHECK_NOTHROW(set.validate());
  }

  TEST_CASE("representation set validation") {
    RepresentationSet set;
    set.kind = RepKind::deterministic;
    CHECK_THROWS_AS(set.validate(), ValidationError);
    set.reps = {{0.5, 0.5}, {0.2, 0.8}};
    CHECK_THROWS_AS(set.validate(), ValidationError);
    set.kind = RepKind::rbse;
    CHECK_NOTHROW(set.validate());
    set.reps.push_back({0.1});
    CHECK_THROWS_AS(set.validate(), ValidationError);
    set.reps.back() = {0.1, 1.5};
    CHECK_THROWS_AS(set.validate(), ValidationError);
  }

  TEST_CASE("degenerate ensembles collapse to the deterministic representation") {
    const RbmParams atoms = random_rbm(3, 2, 5);
    const EnsembleParams ens = pinned_ensemble(atoms);
    const std::vector<double> v{1.0, 1.0, 0.0};
    const auto want = deterministic_representation(atoms, v);
    const RepresentationSet set = stochastic_representations(ens, v, 8, 2, 99);
    CHECK(set.kind == RepKind::rbse);
    REQUIRE(set.reps.size() == 8);
    for (const auto& rep : set.reps) CHECK(rep == want);

    EnsembleParams gauss;
    gauss.family = Family::gaussian;
    gauss.w_value = atoms.w;
    gauss.w_noise = Matrix(3, 2, 0.0);
    gauss.b_value = atoms.b;
    gauss.b_noise.assign(3, 0.0);
    gauss.c_value = atoms.c;
    gauss.c_noise.assign(2, 0.0);
    const RepresentationSet gset = stochastic_representations(gauss, v, 4, 1, 7);
    for (const auto& rep : gset.reps) CHECK(rep == want);
  }

  TEST_CASE("non-degenerate ensembles spread their representations") {
    const EnsembleParams ens = init_ensemble(Family::bernoulli, 3, 2, 11);
    const std::vector<double> v{1.0, 0.0, 1.0};
    const RepresentationSet set = stochastic_representations(ens, v, 100, 1, 31);
    set.validate();
    double total_var = 0.0;
    for (std::size_t j = 0; j < 2; ++j) {
      double mean = 0.0, sq = 0.0;
      for (const auto& rep : set.reps) {
        mean += rep[j];
        sq += rep[j] * rep[j];
      }
      mean /= double(set.reps.size());
      total_var += sq / double(set.reps.size()) - mean * mean;
    }
    CHECK(total_var > 0.0);
  }

  TEST_CASE("stochastic representations are content-keyed and thread-invariant") {
    const EnsembleParams ens = init_ensemble(Family::gaussian, 2, 3, 13);
    const std::vector<double> soft{0.3, 0.7};  // mean-field visible input
    const RepresentationSet a = stochastic_representations(ens, soft, 6, 2, 17, 1);
    const RepresentationSet b = stochastic_representations(ens, soft, 6, 2, 17, 4);
    CHECK(a.reps == b.reps);
    const RepresentationSet c = stochastic_representations(ens, soft, 6, 2, 18);
    CHECK(a.reps != c.reps);

    CHECK_THROWS_AS(stochastic_representations(ens, soft, 0, 2, 17), ValidationError);
    CHECK_THROWS_AS(stochastic_representations(ens, soft, 2, -1, 17), ValidationError);
    CHECK_THROWS_AS(stochastic_representations(ens, std::vector<double>{0.3}, 2, 1, 17),
                    ValidationError);
  }

  TEST_CASE("dropconnect keeps weights at the configured rate") {
    // v = 1 on the single visible unit reads the mask straight off: a kept
    // weight gives logistic(1), a dropped one logistic(0)
    const std::size_t k = 10000;
    RbmParams p = zero_rbm(1, k);
    for (auto& x : p.w.a) x = 1.0;
    const std::vector<double> v{1.0};
    const double keep = 0.7;
    const RepresentationSet set = dropconnect_representations(p, keep, v, 1, 23);
    set.validate();
    std::size_t kept = 0;
    for (double x : set.reps[0]) kept += x > 0.6;
    CHECK(std::abs(double(kept) / double(k) - keep) < 0.02);
    CHECK(set.kind == RepKind::dropconnect);
  }

  TEST_CASE("dropconnect edge rates and validation") {
    const RbmParams p = random_rbm(3, 2, 41);
    const std::vector<double> v{1.0, 0.0, 1.0};
    const RepresentationSet full = dropconnect_representations(p, 1.0, v, 3, 5);
    const auto want = deterministic_representation(p, v);
    for (const auto& rep : full.reps) CHECK(rep == want);

    const RbmParams zero = zero_rbm(2, 2);
    const RepresentationSet z =
        dropconnect_representations(zero, 0.5, std::vector<double>{1.0, 1.0}, 4, 6);
    for (const auto& rep : z.reps)
      for (double x : rep) CHECK(x == 0.5);

    CHECK_THROWS_AS(dropconnect_representations(p, 0.0, v, 2, 5), ValidationError);
    CHECK_THROWS_AS(dropconnect_representations(p, 1.2, v, 2, 5), ValidationError);
    CHECK_THROWS_AS(dropconnect_representations(p, 0.5, v, 0, 5), ValidationError);
  }

  TEST_CASE("reconstruct maps mean-field hidden vectors back to visible means") {
    const RbmParams zero = zero_rbm(3, 2);
    const auto back = reconstruct(zero, std::vector<double>{0.2, 0.9});
    REQUIRE(back.size() == 3);
    for (double x : back) CHECK(x == 0.5);

    CHECK_THROWS_AS(reconstruct(zero, std::vector<double>{0.2}), ValidationError);
    CHECK_THROWS_AS(reconstruct(zero, std::vector<double>{0.2, 1.0001}), ValidationError);

    // degenerate-ensemble round trip equals the plain RBM round trip
    const RbmParams atoms = random_rbm(3, 2, 43);
    const EnsembleParams ens = pinned_ensemble(atoms);
    const std::vector<double> v{0.0, 1.0, 1.0};
    const auto rep = deterministic_representation(atoms, v);
    CHECK(mean_model(ens) == atoms);
    CHECK(reconstruct(mean_model(ens), rep) == reconstruct(atoms, rep));
  }

  TEST_CASE("roundtrip clouds carry m_rep points per source") {
    const RbmParams atoms = random_rbm(2, 3, 47);
    const EnsembleParams pinned = pinned_ensemble(atoms);
    Matrix pts(2, 2);
    pts(0, 0) = 0.2;
    pts(0, 1) = 0.8;
    pts(1, 0) = 1.0;
    const auto clouds = roundtrip_cloud(pinned, pts, 5, 1, 61);
    REQUIRE(clouds.size() == 2);
    for (const auto& c : clouds) {
      REQUIRE(c.points.size() == 5);
      // deterministic ensemble: the cloud collapses to one point
      for (const auto& p : c.points) CHECK(p == c.points.front());
    }
    CHECK(clouds[0].source == State{0.2, 0.8});

    const EnsembleParams noisy = init_ensemble(Family::bernoulli, 2, 3, 48);
    const auto c1 = roundtrip_cloud(noisy, pts, 4, 1, 62, 1);
    const auto c2 = roundtrip_cloud(noisy, pts, 4, 1, 62, 3);
    for (std::size_t i = 0; i < c1.size(); ++i) {
      CHECK(c1[i].source == c2[i].source);
      CHECK(c1[i].points == c2[i].points);
    }

    CHECK_THROWS_AS(roundtrip_cloud(noisy, Matrix(0, 2), 4, 1, 62), ValidationError);
    CHECK_THROWS_AS(roundtrip_cloud(noisy, Matrix(1, 3), 4, 1, 62), ValidationError);
  }

  TEST_CASE("cloud csv lists sources and cloud points with ids") {
    RoundTripCloud c;
    c.source = {0.25, 0.5};
    c.points = {{0.5, 0.5}, {0.75, 1.0}};
    const std::string csv = cloud_csv({c});
    CHECK(csv ==
          "x,y,source,kind\n"
          "0.25,0.5,0,source\n"
          "0.5,0.5,0,cloud\n"
          "0.75,1,0,cloud\n");
    RoundTripCloud bad;
    bad.source = {0.1, 0.2, 0.3};
    CHECK_THROWS_AS(cloud_csv({bad}), ValidationError);
  }
}
