#include "rbse/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <unordered_map>

#include "json.hpp"
#include "rbse/errors.hpp"
#include "rbse/parallel.hpp"
#include "rbse/representation.hpp"
#include "rbse/text.hpp"

namespace rbse {

void LogRegConfig::validate() const {
  if (max_iters < 1) throw ValidationError("logreg: max_iters must be at least 1");
  if (!(step > 0.0)) throw ValidationError("logreg: step must be positive");
  if (!(tol >= 0.0)) throw ValidationError("logreg: tol must be nonnegative");
}

namespace {

struct LabeledRow {
  std::size_t row;
  int label;
  double weight;
};

// (content, label) grouping; identical features with different labels stay
// separate. First-occurrence order keeps the accumulation sequence stable, so
// duplicated training sets yield bitwise-equal mean gradients.
std::vector<LabeledRow> unique_labeled_rows(const Matrix& m, const std::vector<int>& labels) {
  std::vector<LabeledRow> out;
  std::vector<std::size_t> counts;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
  for (std::size_t r = 0; r < m.rows; ++r) {
    const std::uint64_t h =
        derive_seed(content_hash({m.row(r), m.cols}), {std::uint64_t(labels[r])});
    auto& bucket = buckets[h];
    std::size_t hit = out.size();
    for (std::size_t idx : bucket)
      if (out[idx].label == labels[r] &&
          std::memcmp(m.row(out[idx].row), m.row(r), m.cols * sizeof(double)) == 0) {
        hit = idx;
        break;
      }
    if (hit == out.size()) {
      bucket.push_back(out.size());
      out.push_back({r, labels[r], 0.0});
      counts.push_back(1);
    } else {
      ++counts[hit];
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i].weight = double(counts[i]) / double(m.rows);
  return out;
}

void softmax_scores(const LogRegModel& model, const double* x, std::vector<double>& p) {
  const std::size_t c = model.classes(), f = model.features();
  for (std::size_t k = 0; k < c; ++k) {
    const double* w = model.weights.row(k);
    double s = model.biases[k];
    for (std::size_t j = 0; j < f; ++j) s += w[j] * x[j];
    p[k] = s;
  }
  const double m = *std::max_element(p.begin(), p.end());
  double z = 0.0;
  for (double& v : p) z += v = std::exp(v - m);
  for (double& v : p) v /= z;
}

}  // namespace

LogRegModel fit(const Matrix& features, const std::vector<int>& labels, const LogRegConfig& cfg) {
  cfg.validate();
  if (features.rows == 0) throw ValidationError("logreg: no training examples");
  if (labels.size() != features.rows)
    throw ValidationError("logreg: label count does not match feature rows");
  int classes = 0;
  for (int l : labels) {
    if (l < 0) throw ValidationError("logreg: negative class id");
    classes = std::max(classes, l + 1);
  }
  if (classes < 2) throw ValidationError("logreg: need at least 2 classes");
  for (double x : features.a)
    if (!std::isfinite(x)) throw ValidationError("logreg: non-finite feature");

  const std::size_t c = std::size_t(classes), f = features.cols;
  const auto rows = unique_labeled_rows(features, labels);

  LogRegModel model;
  model.weights = Matrix(c, f);
  model.biases.assign(c, 0.0);

  Matrix gw(c, f);
  std::vector<double> gb(c), p(c);
  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    std::fill(gw.a.begin(), gw.a.end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    for (const LabeledRow& lr : rows) {
      const double* x = features.row(lr.row);
      softmax_scores(model, x, p);
      for (std::size_t k = 0; k < c; ++k) {
        const double d = lr.weight * (p[k] - (int(k) == lr.label ? 1.0 : 0.0));
        if (d == 0.0) continue;
        double* g = gw.row(k);
        for (std::size_t j = 0; j < f; ++j) g[j] += d * x[j];
        gb[k] += d;
      }
    }
    double inf = 0.0;
    for (double x : gw.a) inf = std::max(inf, std::abs(x));
    for (double x : gb) inf = std::max(inf, std::abs(x));
    model.iters = it + 1;
    if (inf <= cfg.tol) {
      model.converged = true;
      break;
    }
    for (std::size_t i = 0; i < gw.a.size(); ++i) model.weights.a[i] -= cfg.step * gw.a[i];
    for (std::size_t k = 0; k < c; ++k) model.biases[k] -= cfg.step * gb[k];
  }
  return model;
}

std::vector<int> predict(const LogRegModel& model, const Matrix& features) {
  if (features.cols != model.features())
    throw ValidationError("logreg: feature width does not match the model");
  std::vector<int> out(features.rows);
  std::vector<double> p(model.classes());
  for (std::size_t r = 0; r < features.rows; ++r) {
    const double* x = features.row(r);
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < model.classes(); ++k) {
      const double* w = model.weights.row(k);
      double s = model.biases[k];
      for (std::size_t j = 0; j < features.cols; ++j) s += w[j] * x[j];
      if (s > best_score) {
        best_score = s;
        best = int(k);
      }
    }
    out[r] = best;
  }
  return out;
}

double accuracy(const LogRegModel& model, const Matrix& features, const std::vector<int>& labels) {
  if (labels.size() != features.rows)
    throw ValidationError("logreg: label count does not match feature rows");
  if (features.rows == 0) throw ValidationError("logreg: no examples to score");
  const auto pred = predict(model, features);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == labels[i];
  return double(hits) / double(pred.size());
}

std::string pipeline_name(Pipeline p) {
  switch (p) {
    case Pipeline::pixels: return "pixels";
    case Pipeline::rbm: return "rbm";
    case Pipeline::dropconnect: return "dropconnect";
    default: return "rbse";
  }
}

void OneShotConfig::validate() const {
  if (m_rep < 1) throw ValidationError("one-shot: m_rep must be at least 1");
  if (!(drop_keep > 0.0 && drop_keep <= 1.0))
    throw ValidationError("one-shot: drop_keep must lie in (0,1]");
  if (burn_in < 0) throw ValidationError("one-shot: burn_in must be nonnegative");
  if (threads < 1) throw ValidationError("one-shot: thread count must be at least 1");
  logreg.validate();
}

double OneShotResult::mean(Pipeline p) const {
  const auto& xs = of(p);
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / double(xs.size());
}

double OneShotResult::stddev(Pipeline p) const {
  const auto& xs = of(p);
  if (xs.size() < 2) return 0.0;
  const double m = mean(p);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / double(xs.size() - 1));
}

void OneShotResult::validate() const {
  for (const auto& xs : accuracies) {
    if (xs.size() != accuracies[0].size())
      throw ValidationError("one-shot result: unequal split counts across pipelines");
    for (double a : xs)
      if (!(a >= 0.0 && a <= 1.0))
        throw ValidationError("one-shot result: accuracy outside [0,1]");
  }
  if (split_seeds.size() != accuracies[0].size())
    throw ValidationError("one-shot result: seed list does not match split count");
}

std::string OneShotResult::to_csv() const {
  std::string out = "split";
  for (const Pipeline p : kPipelines) {
    out += ',';
    out += pipeline_name(p);
  }
  out += '\n';
  for (std::size_t s = 0; s < split_seeds.size(); ++s) {
    out += std::to_string(s + 1);
    for (const Pipeline p : kPipelines) {
      out += ',';
      out += format_double(of(p)[s]);
    }
    out += '\n';
  }
  return out;
}

std::string OneShotResult::to_json() const {
  nlohmann::ordered_json j;
  j["splits"] = split_seeds.size();
  j["split_seeds"] = split_seeds;
  for (const Pipeline p : kPipelines) {
    nlohmann::ordered_json pj;
    pj["mean"] = mean(p);
    pj["std"] = stddev(p);
    pj["accuracies"] = of(p);
    j["pipelines"][pipeline_name(p)] = pj;
  }
  return j.dump(2) + "\n";
}

namespace {

constexpr std::uint64_t kSplitTag = 0x0515;
constexpr std::uint64_t kRepSeedTag = 0x4EED;

Matrix deterministic_features(const RbmParams& params, const Matrix& x) {
  Matrix out(x.rows, params.hidden());
  for (std::size_t r = 0; r < x.rows; ++r) {
    const auto rep = deterministic_representation(params, {x.row(r), x.cols});
    std::copy(rep.begin(), rep.end(), out.row(r));
  }
  return out;
}

Matrix averaged_set_features(const std::vector<RepresentationSet>& sets) {
  Matrix out(sets.size(), sets[0].reps[0].size());
  for (std::size_t r = 0; r < sets.size(); ++r) {
    double* dst = out.row(r);
    for (const auto& rep : sets[r].reps)
      for (std::size_t j = 0; j < rep.size(); ++j) dst[j] += rep[j];
    for (std::size_t j = 0; j < out.cols; ++j) dst[j] /= double(sets[r].reps.size());
  }
  return out;
}

struct FeaturePair {
  Matrix train_x;
  std::vector<int> train_y;
  Matrix test_x;
};

FeaturePair pipeline_features(Pipeline p, const EnsembleParams& ens, const RbmParams& rbm_params,
                              const OneShotSplit& split, const OneShotConfig& cfg,
                              std::uint64_t rep_seed) {
  FeaturePair fp;
  const Matrix& tr = split.train_x;
  switch (p) {
    case Pipeline::pixels:
      fp.train_x = tr;
      fp.train_y = split.train_y;
      fp.test_x = split.test_x;
      return fp;
    case Pipeline::rbm:
      fp.train_x = deterministic_features(rbm_params, tr);
      fp.train_y = split.train_y;
      fp.test_x = deterministic_features(rbm_params, split.test_x);
      return fp;
    case Pipeline::dropconnect: {
      std::vector<RepresentationSet> sets;
      for (std::size_t r = 0; r < tr.rows; ++r)
        sets.push_back(dropconnect_representations(rbm_params, cfg.drop_keep, {tr.row(r), tr.cols},
                                                   cfg.m_rep, rep_seed));
      fp.train_x = Matrix(tr.rows * cfg.m_rep, rbm_params.hidden());
      for (std::size_t r = 0; r < tr.rows; ++r)
        for (std::size_t m = 0; m < cfg.m_rep; ++m) {
          std::copy(sets[r].reps[m].begin(), sets[r].reps[m].end(),
                    fp.train_x.row(r * cfg.m_rep + m));
          fp.train_y.push_back(split.train_y[r]);
        }
      if (cfg.stochastic_test_features) {
        std::vector<RepresentationSet> tsets;
        for (std::size_t r = 0; r < split.test_x.rows; ++r)
          tsets.push_back(dropconnect_representations(
              rbm_params, cfg.drop_keep, {split.test_x.row(r), split.test_x.cols}, cfg.m_rep,
              rep_seed));
        fp.test_x = averaged_set_features(tsets);
      } else {
        fp.test_x = deterministic_features(rbm_params, split.test_x);
      }
      return fp;
    }
    default: {
      std::vector<RepresentationSet> sets;
      for (std::size_t r = 0; r < tr.rows; ++r)
        sets.push_back(
            stochastic_representations(ens, {tr.row(r), tr.cols}, cfg.m_rep, cfg.burn_in,
                                       rep_seed));
      fp.train_x = Matrix(tr.rows * cfg.m_rep, ens.hidden());
      for (std::size_t r = 0; r < tr.rows; ++r)
        for (std::size_t m = 0; m < cfg.m_rep; ++m) {
          std::copy(sets[r].reps[m].begin(), sets[r].reps[m].end(),
                    fp.train_x.row(r * cfg.m_rep + m));
          fp.train_y.push_back(split.train_y[r]);
        }
      const RbmParams mm = mean_model(ens);
      if (cfg.stochastic_test_features) {
        std::vector<RepresentationSet> tsets;
        for (std::size_t r = 0; r < split.test_x.rows; ++r)
          tsets.push_back(stochastic_representations(ens, {split.test_x.row(r), split.test_x.cols},
                                                     cfg.m_rep, cfg.burn_in, rep_seed));
        fp.test_x = averaged_set_features(tsets);
      } else {
        fp.test_x = deterministic_features(mm, split.test_x);
      }
      return fp;
    }
  }
}

}  // namespace

OneShotResult run_one_shot(const EnsembleParams& ens, const RbmParams& rbm_params,
                           const Dataset& pool, std::size_t splits, const OneShotConfig& cfg) {
  cfg.validate();
  ens.validate();
  rbm_params.validate();
  pool.validate();
  if (splits < 1) throw ValidationError("one-shot: need at least one split");
  if (pool.dim() != ens.visible() || pool.dim() != rbm_params.visible())
    throw ValidationError("one-shot: pool dimension does not match the models");
  if (!pool.labeled()) throw ValidationError("one-shot: pool has no labels");
  if (pool.num_classes() < 2) throw ValidationError("one-shot: pool needs at least 2 classes");
  // splitting and fitting run on worker threads, so anything they could
  // reject has to be caught here
  std::vector<std::size_t> per_class(pool.num_classes(), 0);
  for (int l : pool.labels) ++per_class[l];
  for (std::size_t c = 0; c < per_class.size(); ++c)
    if (per_class[c] < 100)
      throw ValidationError("one-shot: class " + std::to_string(c) + " has only " +
                            std::to_string(per_class[c]) + " examples, need 100");

  OneShotResult result;
  result.split_seeds.resize(splits);
  for (auto& xs : result.accuracies) xs.resize(splits);
  for (std::size_t s = 0; s < splits; ++s)
    result.split_seeds[s] = derive_seed(cfg.seed, {kSplitTag, s});

  parallel_for(splits, cfg.threads, [&](std::size_t s) {
    const OneShotSplit split = one_shot_split(pool, result.split_seeds[s]);
    for (const Pipeline p : kPipelines) {
      const std::uint64_t rep_seed =
          derive_seed(result.split_seeds[s], {kRepSeedTag, std::uint64_t(p)});
      const FeaturePair fp = pipeline_features(p, ens, rbm_params, split, cfg, rep_seed);
      const LogRegModel model = fit(fp.train_x, fp.train_y, cfg.logreg);
      result.accuracies[std::size_t(p)][s] = accuracy(model, fp.test_x, split.test_y);
    }
  });
  result.validate();
  return result;
}

}  // namespace rbse
