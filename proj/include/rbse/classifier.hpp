#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rbse/data.hpp"
#include "rbse/ensemble.hpp"
#include "rbse/matrix.hpp"
#include "rbse/rbm.hpp"

namespace rbse {

struct LogRegConfig {
  std::size_t max_iters = 5000;
  double step = 0.1;
  double tol = 1e-6;  // on the gradient infinity norm
  void validate() const;
};

// Multinomial logistic regression, no regularization.
struct LogRegModel {
  Matrix weights;  // classes x features
  std::vector<double> biases;
  bool converged = false;  // gradient reached tol before the iteration cap
  std::size_t iters = 0;

  std::size_t classes() const noexcept { return biases.size(); }
  std::size_t features() const noexcept { return weights.cols; }
  bool operator==(const LogRegModel&) const = default;
};

// Full-batch gradient descent on mean softmax cross-entropy from zero
// initialization. Rows are grouped by (content, label), so duplicated
// training sets reproduce the single-copy iterates bit for bit.
LogRegModel fit(const Matrix& features, const std::vector<int>& labels,
                const LogRegConfig& cfg = {});

// Argmax of affine scores; ties go to the lowest class id.
std::vector<int> predict(const LogRegModel& model, const Matrix& features);

double accuracy(const LogRegModel& model, const Matrix& features, const std::vector<int>& labels);

// ---- one-shot evaluation harness -------------------------------------------

enum class Pipeline { pixels, rbm, dropconnect, rbse };
inline constexpr std::array<Pipeline, 4> kPipelines{Pipeline::pixels, Pipeline::rbm,
                                                    Pipeline::dropconnect, Pipeline::rbse};

std::string pipeline_name(Pipeline p);

struct OneShotConfig {
  std::size_t m_rep = 10;   // stochastic representations per labeled example
  double drop_keep = 0.5;
  int burn_in = 10;
  LogRegConfig logreg;
  std::uint64_t seed = 0;
  int threads = 1;
  // test examples normally use the deterministic representation; this switch
  // averages m_rep stochastic representations instead
  bool stochastic_test_features = false;
  void validate() const;
};

struct OneShotResult {
  std::vector<std::uint64_t> split_seeds;
  std::array<std::vector<double>, 4> accuracies;  // indexed by Pipeline order

  const std::vector<double>& of(Pipeline p) const { return accuracies[std::size_t(p)]; }
  double mean(Pipeline p) const;
  double stddev(Pipeline p) const;  // sample standard deviation
  void validate() const;
  std::string to_csv() const;
  std::string to_json() const;
};

// Repeated one-shot splits of the pool; per split, the four pipelines build
// their training features (stochastic pipelines contribute m_rep labeled
// vectors per example), fit a classifier each, and score the test set.
OneShotResult run_one_shot(const EnsembleParams& ens, const RbmParams& rbm_params,
                           const Dataset& pool, std::size_t splits, const OneShotConfig& cfg);

}  // namespace rbse
