#include "rbse/representation.hpp"

#include "rbse/errors.hpp"
#include "rbse/parallel.hpp"
#include "rbse/text.hpp"
#include "rbse/training.hpp"

namespace rbse {

std::string rep_kind_name(RepKind kind) {
  switch (kind) {
    case RepKind::deterministic: return "deterministic";
    case RepKind::rbse: return "rbse";
    default: return "dropconnect";
  }
}

void RepresentationSet::validate() const {
  if (kind == RepKind::deterministic && reps.size() != 1)
    throw ValidationError("representation set: deterministic sets carry exactly one rep");
  if (reps.empty()) throw ValidationError("representation set: no representations");
  for (const auto& r : reps) {
    if (r.size() != reps.front().size())
      throw ValidationError("representation set: ragged representation lengths");
    if (!in_unit_range(r))
      throw ValidationError("representation set: entries must lie in [0,1]");
  }
}

std::vector<double> deterministic_representation(const RbmParams& params,
                                                 std::span<const double> v) {
  if (!in_unit_range(v)) throw ValidationError("representation: v must lie in [0,1]");
  return hidden_conditional(v, params);
}

RepresentationSet deterministic_set(const RbmParams& params, std::span<const double> v) {
  RepresentationSet set;
  set.source.assign(v.begin(), v.end());
  set.reps.push_back(deterministic_representation(params, v));
  set.kind = RepKind::deterministic;
  return set;
}

namespace {

constexpr std::uint64_t kRbseRepTag = 0x4E60;
constexpr std::uint64_t kDropTag = 0xD60C;

void check_rep_args(std::size_t m_rep, int threads) {
  if (m_rep == 0) throw ValidationError("representation: m_rep must be at least 1");
  if (threads < 1) throw ValidationError("representation: thread count must be at least 1");
}

}  // namespace

RepresentationSet stochastic_representations(const EnsembleParams& ens, std::span<const double> v,
                                             std::size_t m_rep, int burn_in, std::uint64_t seed,
                                             int threads) {
  ens.validate();
  check_rep_args(m_rep, threads);
  if (burn_in < 0) throw ValidationError("representation: burn_in must be nonnegative");
  if (v.size() != ens.visible())
    throw ValidationError("representation: v length does not match the ensemble");
  if (!in_unit_range(v)) throw ValidationError("representation: v must lie in [0,1]");

  const RbmParams mm = mean_model(ens);
  const std::uint64_t vh = content_hash(v);
  RepresentationSet set;
  set.source.assign(v.begin(), v.end());
  set.reps.resize(m_rep);
  set.kind = RepKind::rbse;
  parallel_for(m_rep, threads, [&](std::size_t r) {
    ChainRng rng(derive_seed(seed, {kRbseRepTag, vh, r}));
    State h0 = sample_state(hidden_conditional(v, mm), rng.state);
    const ClampedDraw draw = gibbs_clamped_draw(ens, v, std::move(h0), burn_in + 1, rng);
    set.reps[r] = hidden_conditional(v, draw.theta);
  });
  return set;
}

RepresentationSet dropconnect_representations(const RbmParams& params, double drop_keep,
                                              std::span<const double> v, std::size_t m_rep,
                                              std::uint64_t seed, int threads) {
  params.validate();
  check_rep_args(m_rep, threads);
  if (!(drop_keep > 0.0 && drop_keep <= 1.0))
    throw ValidationError("representation: drop_keep must lie in (0,1]");
  if (v.size() != params.visible())
    throw ValidationError("representation: v length does not match the model");
  if (!in_unit_range(v)) throw ValidationError("representation: v must lie in [0,1]");

  const std::uint64_t vh = content_hash(v);
  RepresentationSet set;
  set.source.assign(v.begin(), v.end());
  set.reps.resize(m_rep);
  set.kind = RepKind::dropconnect;
  parallel_for(m_rep, threads, [&](std::size_t r) {
    Rng rng(derive_seed(seed, {kDropTag, vh, r}));
    RbmParams masked = params;
    for (double& w : masked.w.a)
      if (!rng.bernoulli(drop_keep)) w = 0.0;
    set.reps[r] = hidden_conditional(v, masked);
  });
  return set;
}

std::vector<double> reconstruct(const RbmParams& params, std::span<const double> h_rep) {
  if (h_rep.size() != params.hidden())
    throw ValidationError("representation: hidden vector length does not match the model");
  if (!in_unit_range(h_rep))
    throw ValidationError("representation: hidden vector must lie in [0,1]");
  return visible_conditional(h_rep, params);
}

std::vector<RoundTripCloud> roundtrip_cloud(const EnsembleParams& ens, const Matrix& test_points,
                                            std::size_t m_rep, int burn_in, std::uint64_t seed,
                                            int threads) {
  ens.validate();
  check_rep_args(m_rep, threads);
  if (test_points.rows == 0) throw ValidationError("representation: no test points");
  if (test_points.cols != ens.visible())
    throw ValidationError("representation: test point width does not match the ensemble");

  const RbmParams mm = mean_model(ens);
  std::vector<RoundTripCloud> clouds(test_points.rows);
  parallel_for(test_points.rows, threads, [&](std::size_t p) {
    const std::span<const double> v{test_points.row(p), test_points.cols};
    RepresentationSet set = stochastic_representations(ens, v, m_rep, burn_in, seed);
    RoundTripCloud& cloud = clouds[p];
    cloud.source = std::move(set.source);
    cloud.points.reserve(m_rep);
    for (const auto& rep : set.reps) cloud.points.push_back(reconstruct(mm, rep));
  });
  return clouds;
}

std::string cloud_csv(const std::vector<RoundTripCloud>& clouds) {
  for (const auto& c : clouds)
    if (c.source.size() != 2)
      throw ValidationError("representation: csv export expects 2D points");
  std::string out = "x,y,source,kind\n";
  for (std::size_t s = 0; s < clouds.size(); ++s) {
    const auto& c = clouds[s];
    out += format_double(c.source[0]);
    out += ',';
    out += format_double(c.source[1]);
    out += ',';
    out += std::to_string(s);
    out += ",source\n";
    for (const auto& p : c.points) {
      out += format_double(p[0]);
      out += ',';
      out += format_double(p[1]);
      out += ',';
      out += std::to_string(s);
      out += ",cloud\n";
    }
  }
  return out;
}

}  // namespace rbse
