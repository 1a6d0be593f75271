#include "rbse/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <utility>

#include "rbse/errors.hpp"
#include "rbse/oracle.hpp"
#include "rbse/parallel.hpp"
#include "rbse/text.hpp"

namespace rbse {

void TrainConfig::validate() const {
  if (k < 1) throw ValidationError("train config: k must be at least 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ValidationError("train config: learning rate must be positive and finite");
  if (batch_size < 1) throw ValidationError("train config: batch size must be at least 1");
  if (!(epsilon > 0.0 && epsilon < 0.5))
    throw ValidationError("train config: epsilon must lie in (0, 0.5)");
  if (!(sigma_min > 0.0)) throw ValidationError("train config: sigma floor must be positive");
  if (mc_samples < 1) throw ValidationError("train config: mc samples must be at least 1");
  if (threads < 1) throw ValidationError("train config: thread count must be at least 1");
}

std::string TrainHistory::to_csv() const {
  std::string out = "epoch,recon_error";
  for (const auto& name : group_names) {
    out += ',';
    out += name;
  }
  out += '\n';
  for (std::size_t e = 0; e < epochs.size(); ++e) {
    out += std::to_string(e + 1);
    out += ',';
    out += format_double(epochs[e].recon_error);
    for (double n : epochs[e].group_norms) {
      out += ',';
      out += format_double(n);
    }
    out += '\n';
  }
  return out;
}

namespace {

double mean_sq_diff(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / double(a.size());
}

// One CD-style alternation round: theta | (v,h), then v | (h,theta), then
// h | (v,theta).  Runs t = 0..k, so k+1 theta draws.  recon0, when asked for,
// is the squared reconstruction error of the t=0 visible conditional against
// the starting v.
std::pair<State, State> model_rounds(const EnsembleParams& ens, State v, State h, int k,
                                     ChainRng& rng, double* recon0) {
  for (int t = 0; t <= k; ++t) {
    const RbmParams theta = draw_theta(ens, v, h, rng.theta);
    const auto pv = visible_conditional(h, theta);
    if (t == 0 && recon0) *recon0 = mean_sq_diff(v, pv);
    v = sample_state(pv, rng.state);
    h = sample_state(hidden_conditional(v, theta), rng.state);
  }
  return {std::move(v), std::move(h)};
}

// Clamped counterpart: v never moves, and the visible round is skipped
// entirely so the state stream sees only the h draws.
ClampedDraw clamped_rounds(const EnsembleParams& ens, std::span<const double> v, State h, int k,
                           ChainRng& rng) {
  ClampedDraw out;
  for (int t = 0; t <= k; ++t) {
    out.theta = draw_theta(ens, v, h, rng.theta);
    h = sample_state(hidden_conditional(v, out.theta), rng.state);
  }
  out.h = std::move(h);
  return out;
}

}  // namespace

std::pair<State, State> gibbs_model_chain(const EnsembleParams& ens, State v, State h, int k,
                                          ChainRng& rng) {
  ens.validate();
  if (k < 1) throw ValidationError("gibbs_model_chain: k must be at least 1");
  if (v.size() != ens.visible() || h.size() != ens.hidden())
    throw ValidationError("gibbs_model_chain: state dimensions do not match the ensemble");
  if (!is_hard(v) || !is_hard(h))
    throw ValidationError("gibbs_model_chain: states must be hard 0/1 vectors");
  return model_rounds(ens, std::move(v), std::move(h), k, rng, nullptr);
}

ClampedDraw gibbs_clamped_draw(const EnsembleParams& ens, std::span<const double> v, State h,
                               int k, ChainRng& rng) {
  ens.validate();
  if (k < 1) throw ValidationError("gibbs_clamped_draw: k must be at least 1");
  if (v.size() != ens.visible() || h.size() != ens.hidden())
    throw ValidationError("gibbs_clamped_draw: state dimensions do not match the ensemble");
  if (!in_unit_range(v)) throw ValidationError("gibbs_clamped_draw: v must lie in [0,1]");
  if (!is_hard(h)) throw ValidationError("gibbs_clamped_draw: h must be a hard 0/1 vector");
  return clamped_rounds(ens, v, std::move(h), k, rng);
}

State gibbs_clamped_chain(const EnsembleParams& ens, std::span<const double> v, State h, int k,
                          ChainRng& rng) {
  if (!is_hard(v)) throw ValidationError("gibbs_clamped_chain: v must be a hard 0/1 vector");
  return gibbs_clamped_draw(ens, v, std::move(h), k, rng).h;
}

EnsembleGrad em_cd_k_step(const EnsembleParams& ens, const Matrix& data,
                          std::span<const std::size_t> rows, const TrainConfig& cfg,
                          std::uint64_t step_seed, double* recon_sq_err,
                          PersistentChains* persistent, std::span<const std::size_t> slots) {
  cfg.validate();
  ens.validate();
  const std::size_t d = ens.visible();
  const std::size_t kk = ens.hidden();
  if (rows.empty()) throw ValidationError("em_cd_k_step: empty batch");
  if (data.cols != d)
    throw ValidationError("em_cd_k_step: data width does not match the ensemble");
  for (std::size_t r : rows) {
    if (r >= data.rows) throw ValidationError("em_cd_k_step: batch row index out of range");
    if (!is_hard({data.row(r), d}))
      throw ValidationError("em_cd_k_step: batch rows must be hard 0/1 states");
  }
  if (!slots.empty() && slots.size() != rows.size())
    throw ValidationError("em_cd_k_step: slot list length does not match the batch");

  const bool persist = cfg.chain_init == ChainInit::persistent;
  if (persist && persistent == nullptr)
    throw ValidationError("em_cd_k_step: persistent mode needs a chain store");

  struct Item {
    std::size_t row;
    std::size_t slot;
    double weight;  // batch weight folded together with the 1/M sample average
  };
  const std::size_t m = std::size_t(cfg.mc_samples);
  std::vector<Item> items;
  if (persist) {
    items.reserve(rows.size());
    const double w = 1.0 / double(rows.size()) / double(m);
    for (std::size_t t = 0; t < rows.size(); ++t)
      items.push_back({rows[t], slots.empty() ? rows[t] : slots[t], w});
    for (std::size_t a = 0; a < items.size(); ++a)
      for (std::size_t b = a + 1; b < items.size(); ++b)
        if (items[a].slot == items[b].slot)
          throw ValidationError("em_cd_k_step: a persistent slot appears twice in one batch");
    for (const Item& it : items) {
      auto& kept = persistent->hidden[it.slot];
      if (kept.size() != m) kept.resize(m);
    }
  } else {
    for (const WeightedRow wr : unique_weighted_rows(data, rows))
      items.push_back({wr.row, wr.row, wr.weight / double(m)});
  }

  const RbmParams mm = mean_model(ens);

  struct ChainOut {
    State vk, hk;
    std::vector<double> pi;  // hidden marginals under the final clamped theta
    double recon0 = 0.0;
  };
  std::vector<ChainOut> outs(items.size() * m);

  parallel_for(outs.size(), cfg.threads, [&](std::size_t idx) {
    const Item& it = items[idx / m];
    const std::uint64_t mc = idx % m;
    const std::span<const double> v{data.row(it.row), d};
    ChainOut& out = outs[idx];

    ChainRng mrng(persist ? derive_seed(step_seed, {0xC0DE0003ull, it.slot, mc})
                          : model_chain_seed(step_seed, v, int(mc)));
    State h;
    if (persist) {
      const State& kept = persistent->hidden.find(it.slot)->second[mc];
      h = kept.empty() ? sample_state(hidden_conditional(v, mm), mrng.state) : kept;
    } else {
      h = sample_state(hidden_conditional(v, mm), mrng.state);
    }
    auto [vk, hk] = model_rounds(ens, State(v.begin(), v.end()), std::move(h), cfg.k, mrng,
                                 &out.recon0);
    if (persist) persistent->hidden.find(it.slot)->second[mc] = hk;
    out.vk = std::move(vk);
    out.hk = std::move(hk);

    ChainRng crng(persist ? derive_seed(step_seed, {0xC0DE0004ull, it.slot, mc})
                          : clamped_chain_seed(step_seed, v, int(mc)));
    State h0 = sample_state(hidden_conditional(v, mm), crng.state);
    const ClampedDraw draw = clamped_rounds(ens, v, std::move(h0), cfg.k, crng);
    out.pi = hidden_conditional(v, draw.theta);
  });

  // Scores only ever get evaluated at coefficient 1 (states are 0/1 and the
  // a = 0 score is identically zero), so one table per plane covers every
  // chain.  Accumulation is sequential in chain order: results are identical
  // for every thread count, and duplicated batches reproduce the single-copy
  // gradient bit for bit through the weighted unique rows.
  const Family f = ens.family;
  Matrix swv(d, kk), swn(d, kk);
  std::vector<double> sbv(d), sbn(d), scv(kk), scn(kk);
  for (std::size_t i = 0; i < d; ++i) {
    sbv[i] = score_value(f, ens.b_value[i], ens.b_noise[i], 1.0);
    sbn[i] = score_noise(f, ens.b_value[i], ens.b_noise[i], 1.0);
    for (std::size_t j = 0; j < kk; ++j) {
      swv(i, j) = score_value(f, ens.w_value(i, j), ens.w_noise(i, j), 1.0);
      swn(i, j) = score_noise(f, ens.w_value(i, j), ens.w_noise(i, j), 1.0);
    }
  }
  for (std::size_t j = 0; j < kk; ++j) {
    scv[j] = score_value(f, ens.c_value[j], ens.c_noise[j], 1.0);
    scn[j] = score_noise(f, ens.c_value[j], ens.c_noise[j], 1.0);
  }

  EnsembleGrad g(d, kk);
  double err = 0.0;
  for (std::size_t idx = 0; idx < outs.size(); ++idx) {
    const Item& it = items[idx / m];
    const ChainOut& out = outs[idx];
    const double wt = it.weight;
    err += wt * out.recon0;

    // clamped term, hidden units averaged out analytically
    const double* v = data.row(it.row);
    for (std::size_t i = 0; i < d; ++i) {
      if (v[i] == 0.0) continue;
      const double* tv = swv.row(i);
      const double* tn = swn.row(i);
      double* gv = g.w_value.row(i);
      double* gn = g.w_noise.row(i);
      for (std::size_t j = 0; j < kk; ++j) {
        const double pj = wt * out.pi[j];
        gv[j] += pj * tv[j];
        gn[j] += pj * tn[j];
      }
      g.b_value[i] += wt * sbv[i];
      g.b_noise[i] += wt * sbn[i];
    }
    for (std::size_t j = 0; j < kk; ++j) {
      const double pj = wt * out.pi[j];
      g.c_value[j] += pj * scv[j];
      g.c_noise[j] += pj * scn[j];
    }

    // model term from the chain endpoint
    for (std::size_t i = 0; i < d; ++i) {
      if (out.vk[i] == 0.0) continue;
      const double* tv = swv.row(i);
      const double* tn = swn.row(i);
      double* gv = g.w_value.row(i);
      double* gn = g.w_noise.row(i);
      for (std::size_t j = 0; j < kk; ++j) {
        if (out.hk[j] == 0.0) continue;
        gv[j] -= wt * tv[j];
        gn[j] -= wt * tn[j];
      }
      g.b_value[i] -= wt * sbv[i];
      g.b_noise[i] -= wt * sbn[i];
    }
    for (std::size_t j = 0; j < kk; ++j) {
      if (out.hk[j] == 0.0) continue;
      g.c_value[j] -= wt * scv[j];
      g.c_noise[j] -= wt * scn[j];
    }
  }
  if (recon_sq_err) *recon_sq_err = err;
  return g;
}

EnsembleParams apply_update(const EnsembleParams& ens, const EnsembleGrad& step,
                            const TrainConfig& cfg) {
  cfg.validate();
  ens.validate_shapes();
  if (!step.w_value.same_shape(ens.w_value) || !step.w_noise.same_shape(ens.w_noise) ||
      step.b_value.size() != ens.visible() || step.b_noise.size() != ens.visible() ||
      step.c_value.size() != ens.hidden() || step.c_noise.size() != ens.hidden())
    throw ValidationError("apply_update: gradient shape does not match the ensemble");

  EnsembleParams out = ens;
  const double lr = cfg.learning_rate;
  auto axpy = [lr](std::vector<double>& dst, const std::vector<double>& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += lr * src[i];
  };
  axpy(out.w_value.a, step.w_value.a);
  axpy(out.w_noise.a, step.w_noise.a);
  axpy(out.b_value, step.b_value);
  axpy(out.b_noise, step.b_noise);
  axpy(out.c_value, step.c_value);
  axpy(out.c_noise, step.c_noise);

  // The clamp runs unconditionally, so out-of-range inputs come back legal
  // even under a zero step.
  if (out.family == Family::bernoulli) {
    const double lo = cfg.epsilon;
    const double hi = 1.0 - cfg.epsilon;
    for (auto* plane : {&out.w_noise.a, &out.b_noise, &out.c_noise})
      for (double& x : *plane) x = std::clamp(x, lo, hi);
  } else {
    for (auto* plane : {&out.w_noise.a, &out.b_noise, &out.c_noise})
      for (double& x : *plane) x = std::max(x, cfg.sigma_min);
  }
  return out;
}

namespace {

std::vector<double> grad_group_norms(const EnsembleGrad& g) {
  auto l2 = [](const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x * x;
    return std::sqrt(s);
  };
  return {l2(g.w_value.a), l2(g.w_noise.a), l2(g.b_value),
          l2(g.b_noise),   l2(g.c_value),   l2(g.c_noise)};
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  return idx;
}

void check_dataset(const Matrix& dataset, std::size_t width, const char* who) {
  if (dataset.rows == 0) throw ValidationError(std::string(who) + ": empty dataset");
  if (dataset.cols != width)
    throw ValidationError(std::string(who) + ": data width does not match the model");
  for (std::size_t r = 0; r < dataset.rows; ++r)
    if (!in_unit_range({dataset.row(r), dataset.cols}))
      throw ValidationError(std::string(who) + ": data values must lie in [0,1]");
}

constexpr std::uint64_t kShuffleTag = 0x0EAB;
constexpr std::uint64_t kStepTag = 0x57E9;
constexpr std::uint64_t kSoftTag = 0x0B17;

}  // namespace

std::pair<EnsembleParams, TrainHistory> train(EnsembleParams ens, const Matrix& dataset,
                                              const TrainConfig& cfg, GradientMode mode,
                                              const ProgressFn& progress) {
  cfg.validate();
  ens.validate();
  check_dataset(dataset, ens.visible(), "train");

  bool all_hard = true;
  for (std::size_t r = 0; r < dataset.rows && all_hard; ++r)
    all_hard = is_hard({dataset.row(r), dataset.cols});

  TrainHistory hist;
  hist.group_names = {"w_value", "w_noise", "b_value", "b_noise", "c_value", "c_noise"};
  PersistentChains chains;
  PersistentChains* store = cfg.chain_init == ChainInit::persistent ? &chains : nullptr;
  std::uint64_t step_counter = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto order = shuffled_indices(dataset.rows, derive_seed(cfg.seed, {kShuffleTag, epoch}));
    EpochRecord rec;
    rec.group_norms.assign(hist.group_names.size(), 0.0);
    std::size_t steps = 0;

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> rows{order.data() + start, stop - start};
      const std::uint64_t step_seed = derive_seed(cfg.seed, {kStepTag, step_counter});
      double recon = 0.0;
      EnsembleGrad g;
      if (mode == GradientMode::exact) {
        Matrix batch(rows.size(), dataset.cols);
        for (std::size_t t = 0; t < rows.size(); ++t)
          std::copy_n(dataset.row(rows[t]), dataset.cols, batch.row(t));
        g = evaluate_exact(ens, batch).gradient;
      } else if (all_hard) {
        g = em_cd_k_step(ens, dataset, rows, cfg, step_seed, &recon, store);
      } else {
        // Soft rows are resampled to hard states per step, keyed by content so
        // the draw does not depend on the row's position in the shuffle.
        Matrix batch(rows.size(), dataset.cols);
        std::vector<std::size_t> brows(rows.size());
        for (std::size_t t = 0; t < rows.size(); ++t) {
          const std::span<const double> src{dataset.row(rows[t]), dataset.cols};
          double* dst = batch.row(t);
          if (is_hard(src)) {
            std::copy(src.begin(), src.end(), dst);
          } else {
            Rng sr(derive_seed(step_seed, {kSoftTag, content_hash(src)}));
            for (std::size_t i = 0; i < src.size(); ++i)
              dst[i] = sr.bernoulli(src[i]) ? 1.0 : 0.0;
          }
          brows[t] = t;
        }
        g = em_cd_k_step(ens, batch, brows, cfg, step_seed, &recon, store, rows);
      }
      ens = apply_update(ens, g, cfg);

      const auto norms = grad_group_norms(g);
      for (std::size_t t = 0; t < norms.size(); ++t) rec.group_norms[t] += norms[t];
      rec.recon_error += recon;
      ++steps;
      ++step_counter;
    }

    rec.recon_error /= double(steps);
    for (double& x : rec.group_norms) x /= double(steps);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    hist.epochs.push_back(std::move(rec));
    if (progress) progress(epoch, hist.epochs.back());
  }
  return {std::move(ens), std::move(hist)};
}

std::pair<RbmParams, TrainHistory> train_rbm(RbmParams params, const Matrix& dataset,
                                             const TrainConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  params.validate();
  check_dataset(dataset, params.visible(), "train_rbm");

  TrainHistory hist;
  hist.group_names = {"w", "b", "c"};
  const double lr = cfg.learning_rate;
  std::uint64_t step_counter = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto order = shuffled_indices(dataset.rows, derive_seed(cfg.seed, {kShuffleTag, epoch}));
    EpochRecord rec;
    rec.group_norms.assign(hist.group_names.size(), 0.0);
    std::size_t steps = 0;

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> rows{order.data() + start, stop - start};
      const std::uint64_t step_seed = derive_seed(cfg.seed, {kStepTag, step_counter});
      double recon = 0.0;
      const RbmGrad g = cd_k_rbm(params, dataset, rows, cfg.k, step_seed, &recon);
      for (std::size_t i = 0; i < params.w.a.size(); ++i) params.w.a[i] += lr * g.w.a[i];
      for (std::size_t i = 0; i < params.b.size(); ++i) params.b[i] += lr * g.b[i];
      for (std::size_t j = 0; j < params.c.size(); ++j) params.c[j] += lr * g.c[j];

      double sw = 0.0, sb = 0.0, sc = 0.0;
      for (double x : g.w.a) sw += x * x;
      for (double x : g.b) sb += x * x;
      for (double x : g.c) sc += x * x;
      rec.group_norms[0] += std::sqrt(sw);
      rec.group_norms[1] += std::sqrt(sb);
      rec.group_norms[2] += std::sqrt(sc);
      rec.recon_error += recon;
      ++steps;
      ++step_counter;
    }

    rec.recon_error /= double(steps);
    for (double& x : rec.group_norms) x /= double(steps);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    hist.epochs.push_back(std::move(rec));
    if (progress) progress(epoch, hist.epochs.back());
  }
  return {std::move(params), std::move(hist)};
}

}  // namespace rbse
