#include "rbse/commands.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "rbse/data.hpp"
#include "rbse/errors.hpp"
#include "rbse/fs.hpp"
#include "rbse/representation.hpp"
#include "rbse/text.hpp"
#include "rbse/training.hpp"

namespace rbse {

namespace {

// Collects every config violation before throwing, so a bad run config is
// reported in one shot instead of one field at a time.
struct Fields {
  explicit Fields(const KvConfig& c) : cfg(c) {}

  const KvConfig& cfg;
  std::vector<std::string> problems;

  template <typename T, typename F>
  T wrap(F&& getter, T fallback) {
    try {
      return getter();
    } catch (const ValidationError& e) {
      problems.emplace_back(e.what());
      return fallback;
    }
  }

  std::string require(const char* key) {
    return wrap([&] { return cfg.get_string(key); }, std::string{});
  }
  std::string str(const char* key, const char* fallback) {
    return wrap([&] { return cfg.get_string_or(key, fallback); }, std::string{fallback});
  }
  std::uint64_t u64(const char* key, std::uint64_t fallback) {
    return wrap([&] { return cfg.get_u64_or(key, fallback); }, fallback);
  }
  std::size_t size(const char* key, std::size_t fallback) {
    return std::size_t(u64(key, fallback));
  }
  int int_(const char* key, int fallback) {
    return wrap([&] { return cfg.get_int_or(key, fallback); }, fallback);
  }
  double dbl(const char* key, double fallback) {
    return wrap([&] { return cfg.get_double_or(key, fallback); }, fallback);
  }
  bool flag(const char* key, bool fallback) {
    return wrap([&] { return cfg.get_bool_or(key, fallback); }, fallback);
  }

  void check(bool ok, std::string msg) {
    if (!ok) problems.push_back(std::move(msg));
  }

  void finish(const char* command) {
    if (problems.empty()) return;
    std::string msg = std::string(command) + " config: ";
    for (std::size_t i = 0; i < problems.size(); ++i) {
      if (i) msg += "; ";
      msg += problems[i];
    }
    throw ValidationError(msg);
  }
};

std::filesystem::path data_root(const KvConfig& cfg) {
  if (const std::string* v = cfg.find("data.dir")) return *v;
  if (const char* env = std::getenv("RBSE_DATA_DIR")) return env;
  return "data";
}

// relative dataset paths are tried as written, then under the data root
std::filesystem::path resolve_input(const KvConfig& cfg, const std::string& p) {
  const std::filesystem::path path(p);
  if (path.is_absolute() || std::filesystem::exists(path)) return path;
  const auto under = data_root(cfg) / path;
  return std::filesystem::exists(under) ? under : path;
}

std::filesystem::path input_path(Fields& f, const char* key) {
  const std::string raw = f.require(key);
  if (raw.empty()) return {};
  const auto resolved = resolve_input(f.cfg, raw);
  f.check(std::filesystem::exists(resolved),
          std::string("config key '") + key + "': no file at '" + resolved.string() + "'");
  return resolved;
}

// cache bases are prefixes, so probe for the .bin half
std::filesystem::path resolve_cache(const KvConfig& cfg, const std::string& p) {
  const std::filesystem::path base(p);
  auto bin = base;
  bin += ".bin";
  if (base.is_absolute() || std::filesystem::exists(bin)) return base;
  const auto under = data_root(cfg) / base;
  auto under_bin = under;
  under_bin += ".bin";
  return std::filesystem::exists(under_bin) ? under : base;
}

struct DataSpec {
  std::string source;
  Shape shape = Shape::ring;
  std::size_t n = 500;
  double noise = 0.05;
  std::filesystem::path images, labels, test_images, test_labels, cache;
  std::string slice;  // "", "mnist-unlabeled"
  double binarize_threshold = 0.0;
  bool binarize = false;
};

// `pool` asks for the four-file MNIST layout feeding the one-shot pool
DataSpec read_data_spec(Fields& f, bool pool) {
  DataSpec spec;
  spec.source = f.require("data.source");
  if (spec.source == "synthetic" && !pool) {
    spec.shape = f.wrap([&] { return shape_from_name(f.cfg.get_string_or("data.shape", "ring")); },
                        Shape::ring);
    spec.n = f.size("data.n", 500);
    spec.noise = f.dbl("data.noise", 0.05);
    f.check(spec.n >= 1, "config key 'data.n': need at least one example");
    f.check(spec.noise >= 0.0, "config key 'data.noise': must be nonnegative");
  } else if (spec.source == "idx") {
    spec.images = input_path(f, "data.images");
    spec.labels = input_path(f, "data.labels");
    spec.slice = f.str("data.slice", "");
    if (pool || spec.slice == "mnist-unlabeled") {
      spec.test_images = input_path(f, "data.test_images");
      spec.test_labels = input_path(f, "data.test_labels");
    } else {
      f.check(spec.slice.empty(), "config key 'data.slice': unknown slice '" + spec.slice + "'");
    }
  } else if (spec.source == "cache") {
    const std::string raw = f.require("data.cache");
    if (!raw.empty()) {
      spec.cache = resolve_cache(f.cfg, raw);
      auto bin = spec.cache;
      bin += ".bin";
      f.check(std::filesystem::exists(bin),
              "config key 'data.cache': no cache at '" + spec.cache.string() + "'");
    }
  } else if (!spec.source.empty()) {
    f.check(false, "config key 'data.source': expected synthetic|idx|cache, got '" + spec.source +
                       "'" + (pool ? " (synthetic pools are unlabeled)" : ""));
  }
  if (f.cfg.has("data.binarize")) {
    spec.binarize = true;
    spec.binarize_threshold = f.dbl("data.binarize", 0.5);
    f.check(spec.binarize_threshold > 0.0 && spec.binarize_threshold < 1.0,
            "config key 'data.binarize': threshold must lie in (0,1)");
  }
  return spec;
}

Dataset materialize(const DataSpec& spec, std::uint64_t seed, bool pool) {
  Dataset ds;
  if (spec.source == "synthetic") {
    ds = generate_synthetic(spec.shape, spec.n, spec.noise, seed);
  } else if (spec.source == "idx") {
    if (pool || spec.slice == "mnist-unlabeled") {
      MnistPools pools = one_shot_pools(load_idx(spec.images, spec.labels),
                                        load_idx(spec.test_images, spec.test_labels));
      ds = pool ? std::move(pools.pool) : std::move(pools.unlabeled);
    } else {
      ds = load_idx(spec.images, spec.labels);
    }
  } else {
    ds = load_dataset_cache(spec.cache);
  }
  if (spec.binarize) ds = binarize(ds, spec.binarize_threshold);
  return ds;
}

void freeze_data_spec(KvConfig& frozen, const DataSpec& spec) {
  frozen.set("data.source", spec.source);
  if (spec.source == "synthetic") {
    frozen.set("data.shape", shape_name(spec.shape));
    frozen.set("data.n", std::to_string(spec.n));
    frozen.set("data.noise", format_double(spec.noise));
  } else if (spec.source == "idx") {
    frozen.set("data.images", spec.images.string());
    frozen.set("data.labels", spec.labels.string());
    if (!spec.test_images.empty()) {
      frozen.set("data.test_images", spec.test_images.string());
      frozen.set("data.test_labels", spec.test_labels.string());
    }
    if (!spec.slice.empty()) frozen.set("data.slice", spec.slice);
  } else {
    frozen.set("data.cache", spec.cache.string());
  }
  if (spec.binarize) frozen.set("data.binarize", format_double(spec.binarize_threshold));
}

TrainConfig read_train_config(Fields& f, std::uint64_t seed, int threads,
                              const TrainConfig& defaults) {
  TrainConfig tc = defaults;
  tc.k = f.int_("train.k", defaults.k);
  tc.learning_rate = f.dbl("train.lr", defaults.learning_rate);
  tc.batch_size = f.size("train.batch", defaults.batch_size);
  tc.epochs = f.size("train.epochs", defaults.epochs);
  tc.epsilon = f.dbl("train.epsilon", defaults.epsilon);
  tc.sigma_min = f.dbl("train.sigma_min", defaults.sigma_min);
  tc.mc_samples = f.int_("train.mc", defaults.mc_samples);
  tc.chain_init =
      f.flag("train.persistent", false) ? ChainInit::persistent : ChainInit::data_driven;
  tc.seed = seed;
  tc.threads = threads;
  f.check(tc.k >= 1, "config key 'train.k': must be at least 1");
  f.check(tc.learning_rate > 0.0 && std::isfinite(tc.learning_rate),
          "config key 'train.lr': must be positive");
  f.check(tc.batch_size >= 1, "config key 'train.batch': must be at least 1");
  f.check(tc.epsilon > 0.0 && tc.epsilon < 0.5,
          "config key 'train.epsilon': must lie in (0,0.5)");
  f.check(tc.sigma_min > 0.0, "config key 'train.sigma_min': must be positive");
  f.check(tc.mc_samples >= 1, "config key 'train.mc': must be at least 1");
  return tc;
}

void freeze_train_config(KvConfig& frozen, const TrainConfig& tc) {
  frozen.set("train.k", std::to_string(tc.k));
  frozen.set("train.lr", format_double(tc.learning_rate));
  frozen.set("train.batch", std::to_string(tc.batch_size));
  frozen.set("train.epochs", std::to_string(tc.epochs));
  frozen.set("train.epsilon", format_double(tc.epsilon));
  frozen.set("train.sigma_min", format_double(tc.sigma_min));
  frozen.set("train.mc", std::to_string(tc.mc_samples));
  frozen.set("train.persistent", tc.chain_init == ChainInit::persistent ? "true" : "false");
}

Family read_family(Fields& f) {
  return f.wrap([&] { return family_from_name(f.cfg.get_string_or("model.family", "bernoulli")); },
                Family::bernoulli);
}

std::string require_out_dir(Fields& f) { return f.require("out.dir"); }

struct RunTimer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

// The frozen config defines the experiment, so execution details (output
// location, thread count) stay out of it and land in run.json instead; its
// hash is then stable across machines and reruns. Wall time appears only in
// the sidecar.
std::string finish_run(const std::filesystem::path& out_dir, KvConfig frozen, const char* command,
                       std::uint64_t seed, int threads, const RunTimer& timer) {
  frozen.set("command", command);
  frozen.set("seed", std::to_string(seed));
  const std::string text = render_config(frozen);
  save_config(frozen, out_dir / "config.cfg");

  nlohmann::ordered_json run;
  run["command"] = command;
  run["seed"] = seed;
  run["threads"] = threads;
  run["out_dir"] = out_dir.string();
  run["seconds"] = timer.seconds();
  write_text_file(out_dir / "run.json", run.dump(2) + "\n");
  return sha256_hex(reinterpret_cast<const std::uint8_t*>(text.data()), text.size());
}

ProgressFn epoch_logger(std::ostream& log, std::size_t total) {
  return [&log, total](std::size_t epoch, const EpochRecord& rec) {
    char line[96];
    std::snprintf(line, sizeof line, "epoch %zu/%zu recon %.6f (%.2fs)\n", epoch + 1, total,
                  rec.recon_error, rec.seconds);
    log << line << std::flush;
  };
}

Matrix parse_csv_matrix(const std::string& text, const std::string& origin) {
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line{text.data() + pos, (nl == std::string::npos ? text.size() : nl) - pos};
    pos = nl == std::string::npos ? text.size() : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (start <= line.size()) {
      const std::size_t comma = line.find(',', start);
      const std::string_view cell =
          line.substr(start, (comma == std::string_view::npos ? line.size() : comma) - start);
      double x{};
      const auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), x);
      if (ec != std::errc{} || p != cell.data() + cell.size())
        throw ValidationError(origin + " line " + std::to_string(line_no) +
                              ": cannot parse '" + std::string(cell) + "' as a number");
      row.push_back(x);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ValidationError(origin + " line " + std::to_string(line_no) + ": expected " +
                            std::to_string(rows.front().size()) + " columns, got " +
                            std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError(origin + ": no data rows");
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    std::copy(rows[r].begin(), rows[r].end(), m.row(r));
  return m;
}

ModelFile run_training(const KvConfig& cfg, std::ostream& log, bool rbse) {
  const char* command = rbse ? "train-rbse" : "train-rbm";
  RunTimer timer;
  Fields f{cfg};
  const std::string out_dir = require_out_dir(f);
  const std::uint64_t seed = f.u64("seed", 0);
  const int threads = f.int_("threads", 1);
  f.check(threads >= 1, "config key 'threads': must be at least 1");
  const DataSpec spec = read_data_spec(f, false);
  const std::size_t hidden = f.size("model.hidden", 0);
  f.check(f.cfg.has("model.hidden") && hidden >= 1,
          "config key 'model.hidden': required, at least 1");
  const TrainConfig tc = read_train_config(f, seed, threads, TrainConfig{.epochs = 10});
  const Family family = rbse ? read_family(f) : Family::bernoulli;
  const std::string gradient = f.str("train.gradient", "sampled");
  f.check(gradient == "sampled" || gradient == "exact",
          "config key 'train.gradient': expected sampled|exact, got '" + gradient + "'");
  f.finish(command);

  const Dataset ds = materialize(spec, seed, false);
  log << command << ": " << ds.size() << " examples, dim " << ds.dim() << ", hidden " << hidden
      << "\n";

  KvConfig frozen;
  freeze_data_spec(frozen, spec);
  frozen.set("model.hidden", std::to_string(hidden));
  freeze_train_config(frozen, tc);

  std::filesystem::create_directories(out_dir);
  ModelFile model;
  TrainHistory history;
  if (rbse) {
    frozen.set("model.family", family_name(family));
    frozen.set("train.gradient", gradient);
    const GradientMode mode =
        gradient == "exact" ? GradientMode::exact : GradientMode::monte_carlo;
    auto [ens, hist] = train(init_ensemble(family, ds.dim(), hidden, seed), ds.examples, tc, mode,
                             epoch_logger(log, tc.epochs));
    history = std::move(hist);
    model.ensemble = std::move(ens);
    model.kind = family == Family::bernoulli ? ModelKind::rbse_bernoulli : ModelKind::rbse_gaussian;
  } else {
    auto [params, hist] =
        train_rbm(init_rbm(ds.dim(), hidden, seed), ds.examples, tc, epoch_logger(log, tc.epochs));
    history = std::move(hist);
    model.rbm = std::move(params);
    model.kind = ModelKind::rbm;
  }

  model.provenance.config_sha256 =
      finish_run(out_dir, frozen, command, seed, threads, timer);
  model.provenance.seed = seed;
  model.provenance.epochs = tc.epochs;
  save_model(model, std::filesystem::path(out_dir) / "model.json");
  write_text_file(std::filesystem::path(out_dir) / "history.csv", history.to_csv());
  log << command << ": wrote model.json and history.csv to " << out_dir << "\n";
  return model;
}

double nearest_distance(std::span<const double> pt, const Matrix& ref) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < ref.rows; ++r) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < pt.size(); ++i) {
      const double d = pt[i] - ref(r, i);
      d2 += d * d;
    }
    best = std::min(best, d2);
  }
  return std::sqrt(best);
}

std::string pgm_p5(std::size_t width, std::size_t height, const std::vector<std::uint8_t>& pix) {
  std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(pix.data()), pix.size());
  return out;
}

// one grayscale tile per hidden unit, laid out in a near-square grid with
// 1px black separators
std::string tile_sheet(const Matrix& plane, std::size_t side,
                       double lo, double hi) {
  const std::size_t k = plane.cols;
  const std::size_t grid_cols = std::size_t(std::ceil(std::sqrt(double(k))));
  const std::size_t grid_rows = (k + grid_cols - 1) / grid_cols;
  const std::size_t width = grid_cols * side + (grid_cols - 1);
  const std::size_t height = grid_rows * side + (grid_rows - 1);
  std::vector<std::uint8_t> pix(width * height, 0);
  const double span = hi - lo;
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t gx = (j % grid_cols) * (side + 1);
    const std::size_t gy = (j / grid_cols) * (side + 1);
    for (std::size_t p = 0; p < side * side; ++p) {
      const double x = plane(p, j);
      const double g = span > 0.0 ? (x - lo) / span : 0.5;
      pix[(gy + p / side) * width + gx + p % side] =
          std::uint8_t(std::lround(255.0 * std::clamp(g, 0.0, 1.0)));
    }
  }
  return pgm_p5(width, height, pix);
}

}  // namespace

ModelFile cmd_train_rbm(const KvConfig& cfg, std::ostream& log) {
  return run_training(cfg, log, false);
}

ModelFile cmd_train_rbse(const KvConfig& cfg, std::ostream& log) {
  return run_training(cfg, log, true);
}

GradCheckReport cmd_gradcheck(const KvConfig& cfg, std::ostream& log) {
  RunTimer timer;
  Fields f{cfg};
  GradCheckConfig gc;
  gc.trials = f.size("trials", 50);
  gc.seed = f.u64("seed", 1);
  f.check(gc.trials >= 1, "config key 'trials': must be at least 1");
  const std::string out_dir = f.str("out.dir", "");
  f.finish("gradcheck");

  const GradCheckReport report = run_gradcheck(gc);
  for (const CheckOutcome& c : report.checks) {
    char line[160];
    std::snprintf(line, sizeof line, "%-24s cases %-4zu worst %.3e (tol %.0e) %s\n",
                  c.name.c_str(), c.cases, c.worst, c.threshold, c.pass ? "pass" : "FAIL");
    log << line;
  }
  log << (report.pass ? "gradcheck: all checks passed\n" : "gradcheck: FAILURES detected\n");

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_text_file(std::filesystem::path(out_dir) / "report.json", report.to_json());
    KvConfig frozen;
    frozen.set("trials", std::to_string(gc.trials));
    finish_run(out_dir, frozen, "gradcheck", gc.seed, 1, timer);
  }
  return report;
}

OneShotResult cmd_oneshot(const KvConfig& cfg, std::ostream& log) {
  RunTimer timer;
  Fields f{cfg};
  const std::string out_dir = require_out_dir(f);
  const std::uint64_t seed = f.u64("seed", 0);
  const DataSpec spec = read_data_spec(f, true);
  const std::filesystem::path rbm_path = input_path(f, "model.rbm");
  const std::filesystem::path rbse_path = input_path(f, "model.rbse");
  OneShotConfig oc;
  oc.seed = seed;
  oc.threads = f.int_("threads", 1);
  oc.m_rep = f.size("oneshot.m_rep", 10);
  oc.burn_in = f.int_("oneshot.burn_in", 10);
  oc.drop_keep = f.dbl("oneshot.drop_keep", 0.5);
  oc.stochastic_test_features = f.flag("oneshot.stochastic_test", false);
  oc.logreg.max_iters = f.size("logreg.max_iters", 5000);
  oc.logreg.step = f.dbl("logreg.step", 0.1);
  oc.logreg.tol = f.dbl("logreg.tol", 1e-6);
  const std::size_t splits = f.size("oneshot.splits", 10);
  f.check(splits >= 1, "config key 'oneshot.splits': must be at least 1");
  f.wrap([&] {
    oc.validate();
    return 0;
  }, 0);
  f.finish("oneshot");

  const ModelFile rbm_model = load_model(rbm_path);
  if (rbm_model.kind != ModelKind::rbm)
    throw ValidationError("oneshot: model.rbm must point at a plain rbm model");
  const ModelFile rbse_model = load_model(rbse_path);
  if (rbse_model.kind == ModelKind::rbm)
    throw ValidationError("oneshot: model.rbse must point at an rbse model");

  const Dataset pool = materialize(spec, seed, true);
  log << "oneshot: pool of " << pool.size() << " labeled examples, " << splits << " splits\n";

  const OneShotResult result = run_one_shot(rbse_model.ensemble, rbm_model.rbm, pool, splits, oc);
  for (const Pipeline p : kPipelines) {
    char line[96];
    std::snprintf(line, sizeof line, "%-12s mean %.4f std %.4f\n", pipeline_name(p).c_str(),
                  result.mean(p), result.stddev(p));
    log << line;
  }

  std::filesystem::create_directories(out_dir);
  write_text_file(std::filesystem::path(out_dir) / "results.csv", result.to_csv());
  write_text_file(std::filesystem::path(out_dir) / "results.json", result.to_json());
  KvConfig frozen;
  freeze_data_spec(frozen, spec);
  frozen.set("model.rbm", rbm_path.string());
  frozen.set("model.rbse", rbse_path.string());
  frozen.set("oneshot.splits", std::to_string(splits));
  frozen.set("oneshot.m_rep", std::to_string(oc.m_rep));
  frozen.set("oneshot.burn_in", std::to_string(oc.burn_in));
  frozen.set("oneshot.drop_keep", format_double(oc.drop_keep));
  frozen.set("oneshot.stochastic_test", oc.stochastic_test_features ? "true" : "false");
  frozen.set("logreg.max_iters", std::to_string(oc.logreg.max_iters));
  frozen.set("logreg.step", format_double(oc.logreg.step));
  frozen.set("logreg.tol", format_double(oc.logreg.tol));
  finish_run(out_dir, frozen, "oneshot", seed, oc.threads, timer);
  return result;
}

void cmd_inspect(const KvConfig& cfg, std::ostream& log) {
  RunTimer timer;
  Fields f{cfg};
  const std::string out_dir = require_out_dir(f);
  const std::uint64_t seed = f.u64("seed", 0);
  const std::filesystem::path model_path = input_path(f, "model.path");
  const double eps = f.dbl("inspect.epsilon", 0.01);
  f.check(eps > 0.0 && eps < 0.5, "config key 'inspect.epsilon': must lie in (0,0.5)");
  f.finish("inspect");

  const ModelFile model = load_model(model_path);
  const std::size_t d = model.visible();
  const std::size_t side = std::size_t(std::lround(std::sqrt(double(d))));
  if (side * side != d)
    throw ValidationError("inspect: visible dimension " + std::to_string(d) +
                          " is not a square image");

  const Matrix& w = model.kind == ModelKind::rbm ? model.rbm.w : model.ensemble.w_value;
  const auto [lo_it, hi_it] = std::minmax_element(w.a.begin(), w.a.end());
  std::filesystem::create_directories(out_dir);
  write_text_file(std::filesystem::path(out_dir) / "filters.pgm",
                  tile_sheet(w, side, *lo_it, *hi_it));
  log << "inspect: wrote filters.pgm (" << model.hidden() << " tiles of " << side << "x" << side
      << ")\n";

  if (model.kind == ModelKind::rbse_bernoulli) {
    // probabilities live in [eps, 1-eps] after training; stretch that band
    write_text_file(std::filesystem::path(out_dir) / "probabilities.pgm",
                    tile_sheet(model.ensemble.w_noise, side, eps, 1.0 - eps));
    log << "inspect: wrote probabilities.pgm\n";
  }

  KvConfig frozen;
  frozen.set("model.path", model_path.string());
  frozen.set("inspect.epsilon", format_double(eps));
  finish_run(out_dir, frozen, "inspect", seed, 1, timer);
}

void cmd_represent(const KvConfig& cfg, std::ostream& log) {
  RunTimer timer;
  Fields f{cfg};
  const std::string out_dir = require_out_dir(f);
  const std::uint64_t seed = f.u64("seed", 0);
  const int threads = f.int_("threads", 1);
  const std::filesystem::path model_path = input_path(f, "model.path");
  const std::filesystem::path input = input_path(f, "input.csv");
  const std::string kind = f.str("rep.kind", "deterministic");
  f.check(kind == "deterministic" || kind == "rbse" || kind == "dropconnect",
          "config key 'rep.kind': expected deterministic|rbse|dropconnect, got '" + kind + "'");
  const std::size_t m_rep = f.size("rep.m", 10);
  const int burn_in = f.int_("rep.burn_in", 10);
  const double drop_keep = f.dbl("rep.drop_keep", 0.5);
  f.check(m_rep >= 1, "config key 'rep.m': must be at least 1");
  f.check(burn_in >= 0, "config key 'rep.burn_in': must be nonnegative");
  f.check(drop_keep > 0.0 && drop_keep <= 1.0,
          "config key 'rep.drop_keep': must lie in (0,1]");
  f.check(threads >= 1, "config key 'threads': must be at least 1");
  f.finish("represent");

  const ModelFile model = load_model(model_path);
  if (kind == "rbse" && model.kind == ModelKind::rbm)
    throw ValidationError("represent: rbse representations need an rbse model");
  const Matrix points = parse_csv_matrix(read_text_file(input), input.string());
  if (points.cols != model.visible())
    throw ValidationError("represent: input rows have " + std::to_string(points.cols) +
                          " columns, the model has " + std::to_string(model.visible()) +
                          " visible units");

  // deterministic and dropconnect reduce ensembles to their mean model
  const RbmParams params =
      model.kind == ModelKind::rbm ? model.rbm : mean_model(model.ensemble);

  std::string csv = "input,rep";
  for (std::size_t j = 0; j < model.hidden(); ++j) csv += ",h" + std::to_string(j);
  csv += '\n';
  auto emit = [&](std::size_t row, std::size_t rep, std::span<const double> h) {
    csv += std::to_string(row);
    csv += ',';
    csv += std::to_string(rep);
    for (double x : h) {
      csv += ',';
      csv += format_double(x);
    }
    csv += '\n';
  };
  for (std::size_t r = 0; r < points.rows; ++r) {
    const std::span<const double> v{points.row(r), points.cols};
    if (kind == "deterministic") {
      emit(r, 0, deterministic_representation(params, v));
    } else if (kind == "dropconnect") {
      const RepresentationSet set =
          dropconnect_representations(params, drop_keep, v, m_rep, seed, threads);
      for (std::size_t m = 0; m < set.reps.size(); ++m) emit(r, m, set.reps[m]);
    } else {
      const RepresentationSet set =
          stochastic_representations(model.ensemble, v, m_rep, burn_in, seed, threads);
      for (std::size_t m = 0; m < set.reps.size(); ++m) emit(r, m, set.reps[m]);
    }
  }

  std::filesystem::create_directories(out_dir);
  write_text_file(std::filesystem::path(out_dir) / "representations.csv", csv);
  log << "represent: wrote " << points.rows << " inputs as " << kind << " representations\n";

  KvConfig frozen;
  frozen.set("model.path", model_path.string());
  frozen.set("input.csv", input.string());
  frozen.set("rep.kind", kind);
  if (kind != "deterministic") frozen.set("rep.m", std::to_string(m_rep));
  if (kind == "rbse") frozen.set("rep.burn_in", std::to_string(burn_in));
  if (kind == "dropconnect") frozen.set("rep.drop_keep", format_double(drop_keep));
  finish_run(out_dir, frozen, "represent", seed, threads, timer);
}

void cmd_synthetic_demo(const KvConfig& cfg, std::ostream& log) {
  RunTimer timer;
  Fields f{cfg};
  const std::string out_dir = require_out_dir(f);
  const std::uint64_t seed = f.u64("seed", 0);
  const int threads = f.int_("threads", 1);
  f.check(threads >= 1, "config key 'threads': must be at least 1");
  const Shape shape =
      f.wrap([&] { return shape_from_name(f.cfg.get_string_or("data.shape", "ring")); },
             Shape::ring);
  const std::size_t n = f.size("data.n", 500);
  const double noise = f.dbl("data.noise", 0.05);
  const std::size_t hidden = f.size("model.hidden", 8);
  const Family family = read_family(f);
  const TrainConfig tc = read_train_config(
      f, seed, threads,
      TrainConfig{.k = 1, .learning_rate = 0.1, .batch_size = 25, .epochs = 300});
  const std::size_t m_rep = f.size("demo.m_rep", 100);
  const int burn_in = f.int_("demo.burn_in", 10);
  const std::size_t cloud_points = f.size("demo.points", 20);
  const double ox = f.dbl("demo.outlier.x", 0.05);
  const double oy = f.dbl("demo.outlier.y", 0.95);
  const std::size_t few_n = f.size("demo.fewpoint.n", 5);
  f.check(n >= 1, "config key 'data.n': need at least one example");
  f.check(noise >= 0.0, "config key 'data.noise': must be nonnegative");
  f.check(hidden >= 1, "config key 'model.hidden': must be at least 1");
  f.check(m_rep >= 1, "config key 'demo.m_rep': must be at least 1");
  f.check(burn_in >= 0, "config key 'demo.burn_in': must be nonnegative");
  f.check(cloud_points >= 1 && cloud_points <= n,
          "config key 'demo.points': must lie in [1, data.n]");
  f.check(ox >= 0.0 && ox <= 1.0 && oy >= 0.0 && oy <= 1.0,
          "config key 'demo.outlier.*': coordinates must lie in [0,1]");
  f.check(few_n >= 1 && few_n <= n, "config key 'demo.fewpoint.n': must lie in [1, data.n]");
  f.finish("synthetic-demo");

  const Dataset ds = generate_synthetic(shape, n, noise, seed);
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path out(out_dir);

  log << "synthetic-demo: " << shape_name(shape) << " with " << n << " points, hidden " << hidden
      << "\n";

  KvConfig frozen;
  frozen.set("data.shape", shape_name(shape));
  frozen.set("data.n", std::to_string(n));
  frozen.set("data.noise", format_double(noise));
  frozen.set("model.hidden", std::to_string(hidden));
  frozen.set("model.family", family_name(family));
  freeze_train_config(frozen, tc);
  frozen.set("demo.m_rep", std::to_string(m_rep));
  frozen.set("demo.burn_in", std::to_string(burn_in));
  frozen.set("demo.points", std::to_string(cloud_points));
  frozen.set("demo.outlier.x", format_double(ox));
  frozen.set("demo.outlier.y", format_double(oy));
  frozen.set("demo.fewpoint.n", std::to_string(few_n));

  log << "training rbm\n";
  auto [rbm_params, rbm_hist] =
      train_rbm(init_rbm(2, hidden, seed), ds.examples, tc, epoch_logger(log, tc.epochs));
  log << "training rbse\n";
  auto [ens, rbse_hist] = train(init_ensemble(family, 2, hidden, seed), ds.examples, tc,
                                GradientMode::monte_carlo, epoch_logger(log, tc.epochs));

  // deterministic round trip of every training point through the rbm
  std::vector<RoundTripCloud> roundtrip(ds.size());
  for (std::size_t r = 0; r < ds.size(); ++r) {
    const std::span<const double> v{ds.examples.row(r), 2};
    roundtrip[r].source.assign(v.begin(), v.end());
    roundtrip[r].points.push_back(reconstruct(rbm_params, deterministic_representation(rbm_params, v)));
  }
  write_text_file(out / "roundtrip.csv", cloud_csv(roundtrip));

  // stochastic clouds over a prefix of the training points
  Matrix cloud_src(cloud_points, 2);
  std::copy_n(ds.examples.a.data(), 2 * cloud_points, cloud_src.a.data());
  const auto clouds =
      roundtrip_cloud(ens, cloud_src, m_rep, burn_in, derive_seed(seed, {0xDE01}), threads);
  write_text_file(out / "clouds.csv", cloud_csv(clouds));

  // a far-off point gets pulled back toward the manifold
  Matrix outlier(1, 2);
  outlier(0, 0) = ox;
  outlier(0, 1) = oy;
  const auto attraction =
      roundtrip_cloud(ens, outlier, m_rep, burn_in, derive_seed(seed, {0xDE02}), threads);
  write_text_file(out / "attraction.csv", cloud_csv(attraction));

  double cloud_mean = 0.0;
  for (const State& p : attraction[0].points) cloud_mean += nearest_distance(p, ds.examples);
  cloud_mean /= double(attraction[0].points.size());
  const double outlier_dist = nearest_distance({outlier.row(0), 2}, ds.examples);
  nlohmann::ordered_json aj;
  aj["outlier"] = {ox, oy};
  aj["outlier_distance"] = outlier_dist;
  aj["cloud_mean_distance"] = cloud_mean;
  aj["attracted"] = cloud_mean < outlier_dist;
  aj["seed"] = seed;
  write_text_file(out / "attraction.json", aj.dump(2) + "\n");
  log << "attraction: outlier at " << outlier_dist << ", cloud mean at " << cloud_mean << "\n";

  // the same ensemble machinery trained on only a handful of points
  Matrix few(few_n, 2);
  std::copy_n(ds.examples.a.data(), 2 * few_n, few.a.data());
  log << "training few-point rbse\n";
  auto [few_ens, few_hist] = train(init_ensemble(family, 2, hidden, derive_seed(seed, {0xDE03})),
                                   few, tc, GradientMode::monte_carlo, {});
  const auto few_clouds =
      roundtrip_cloud(few_ens, few, m_rep, burn_in, derive_seed(seed, {0xDE04}), threads);
  write_text_file(out / "fewpoint.csv", cloud_csv(few_clouds));

  const std::string config_hash =
      finish_run(out_dir, frozen, "synthetic-demo", seed, threads, timer);
  Provenance prov{config_hash, seed, tc.epochs};
  save_model(model_from_rbm(std::move(rbm_params), prov), out / "rbm_model.json");
  save_model(model_from_ensemble(std::move(ens), prov), out / "rbse_model.json");
  write_text_file(out / "rbm_history.csv", rbm_hist.to_csv());
  write_text_file(out / "rbse_history.csv", rbse_hist.to_csv());
  log << "synthetic-demo: artifacts in " << out_dir << "\n";
}

}  // namespace rbse
