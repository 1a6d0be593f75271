#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rbse/ensemble.hpp"
#include "rbse/matrix.hpp"
#include "rbse/rbm.hpp"

namespace rbse {

enum class ChainInit { data_driven, persistent };

struct TrainConfig {
  int k = 1;                  // CD steps; every chain runs k+1 sampling rounds
  double learning_rate = 0.05;
  std::size_t batch_size = 32;
  std::size_t epochs = 1;
  double epsilon = 0.01;      // keeps atom probabilities inside [eps, 1-eps]
  double sigma_min = 0.01;    // stddev floor
  ChainInit chain_init = ChainInit::data_driven;
  int mc_samples = 1;         // chains averaged per example per step
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

struct EpochRecord {
  double recon_error = 0.0;          // mean first-round reconstruction error
  std::vector<double> group_norms;   // mean per-step L2 norm per parameter group
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<std::string> group_names;
  std::vector<EpochRecord> epochs;
  // deterministic export; wall-clock stays out of it on purpose
  std::string to_csv() const;
};

using ProgressFn = std::function<void(std::size_t epoch, const EpochRecord&)>;

// Model-chain hidden states carried across steps in persistent mode, keyed by
// dataset row; one state per Monte Carlo chain. Empty states mean "not yet
// initialized" and get the usual data-driven draw on first use.
struct PersistentChains {
  std::unordered_map<std::size_t, std::vector<State>> hidden;
};

// One full sweep: theta | (v,h), then v | (h,theta), then h | (v,theta),
// repeated k+1 times. States must be hard.
std::pair<State, State> gibbs_model_chain(const EnsembleParams& ens, State v, State h, int k,
                                          ChainRng& rng);

struct ClampedDraw {
  RbmParams theta;  // last parameter draw, conditioning the final h
  State h;
};

// Clamped-v counterpart: theta | (v,h), then h | (v,theta), k+1 rounds.
// v may be mean-field; the representation module relies on that.
ClampedDraw gibbs_clamped_draw(const EnsembleParams& ens, std::span<const double> v, State h,
                               int k, ChainRng& rng);

State gibbs_clamped_chain(const EnsembleParams& ens, std::span<const double> v, State h, int k,
                          ChainRng& rng);

// One EM-CD step: batch and chain average of the model-minus-clamped expected
// phi-derivatives, returned as an ascent direction on the data log-likelihood.
// The clamped contribution is averaged analytically over the final hidden
// draw given the last theta, which cuts variance and makes the degenerate
// (noise -> 0) limit land exactly on cd_k_rbm's data term.
EnsembleGrad em_cd_k_step(const EnsembleParams& ens, const Matrix& data,
                          std::span<const std::size_t> rows, const TrainConfig& cfg,
                          std::uint64_t step_seed, double* recon_sq_err = nullptr,
                          PersistentChains* persistent = nullptr,
                          std::span<const std::size_t> slots = {});

// ens + learning_rate * step, then probability / stddev clamps
EnsembleParams apply_update(const EnsembleParams& ens, const EnsembleGrad& step,
                            const TrainConfig& cfg);

enum class GradientMode { monte_carlo, exact };

// Shuffled-minibatch driver. GradientMode::exact swaps the Monte Carlo step
// for the oracle's enumerated gradient (tiny models only).
std::pair<EnsembleParams, TrainHistory> train(EnsembleParams ens, const Matrix& dataset,
                                              const TrainConfig& cfg,
                                              GradientMode mode = GradientMode::monte_carlo,
                                              const ProgressFn& progress = {});

// Plain-RBM driver with the same epoch plumbing; chain_init is ignored since
// cd_k_rbm chains always start from the data.
std::pair<RbmParams, TrainHistory> train_rbm(RbmParams params, const Matrix& dataset,
                                             const TrainConfig& cfg,
                                             const ProgressFn& progress = {});

}  // namespace rbse
