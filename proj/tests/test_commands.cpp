#include "rbse/commands.hpp"

#include <filesystem>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "rbse/data.hpp"
#include "rbse/ensemble.hpp"
#include "rbse/errors.hpp"
#include "rbse/fs.hpp"
#include "rbse/model_io.hpp"
#include "rbse/rbm.hpp"
#include "rbse/rng.hpp"

using namespace rbse;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("rbse_cmd_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

KvConfig base_train_config(const fs::path& out) {
  KvConfig cfg;
  cfg.set("out.dir", out.string());
  cfg.set("seed", "11");
  cfg.set("data.source", "synthetic");
  cfg.set("data.shape", "ring");
  cfg.set("data.n", "60");
  cfg.set("data.noise", "0.05");
  cfg.set("model.hidden", "4");
  cfg.set("train.epochs", "2");
  cfg.set("train.batch", "20");
  return cfg;
}

std::string msg_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ValidationError& e) {
    return e.what();
  }
  return {};
}

Dataset banded_pool(std::size_t per_class, std::uint64_t seed) {
  Dataset ds;
  ds.examples = Matrix(2 * per_class, 4);
  Rng rng(seed);
  for (std::size_t r = 0; r < ds.examples.rows; ++r) {
    const int label = r < per_class ? 0 : 1;
    ds.examples(r, 0) = double(label);
    ds.examples(r, 1) = double(label);
    ds.examples(r, 2) = rng.uniform();
    ds.examples(r, 3) = rng.uniform();
    ds.labels.push_back(label);
  }
  ds.name = "banded";
  return ds;
}

}  // namespace

TEST_SUITE("commands") {

TEST_CASE("train-rbm command writes a reloadable model and sidecars") {
  const fs::path out = fresh_dir("train_rbm");
  std::ostringstream log;
  const ModelFile model = cmd_train_rbm(base_train_config(out), log);

  CHECK(model.kind == ModelKind::rbm);
  CHECK(model.visible() == 2);
  CHECK(model.hidden() == 4);
  CHECK(model.provenance.seed == 11);
  CHECK(model.provenance.epochs == 2);

  for (const char* name : {"model.json", "history.csv", "config.cfg", "run.json"})
    CHECK(fs::exists(out / name));

  const ModelFile reloaded = load_model(out / "model.json");
  CHECK(reloaded == model);

  const std::string cfg_text = read_text_file(out / "config.cfg");
  CHECK(model.provenance.config_sha256 ==
        sha256_hex(reinterpret_cast<const std::uint8_t*>(cfg_text.data()), cfg_text.size()));
  const KvConfig frozen = parse_config(cfg_text);
  CHECK(frozen.get_string("command") == "train-rbm");
  CHECK(frozen.get_u64_or("seed", 0) == 11);
  CHECK(frozen.get_string("data.shape") == "ring");
  CHECK(frozen.get_string("train.persistent") == "false");

  const auto run = nlohmann::json::parse(read_text_file(out / "run.json"));
  CHECK(run["command"] == "train-rbm");
  CHECK(run["seed"] == 11);
  CHECK(run["seconds"].get<double>() >= 0.0);

  const std::string hist = read_text_file(out / "history.csv");
  CHECK(hist.substr(0, hist.find('\n')) == "epoch,recon_error,w,b,c");
  CHECK(log.str().find("epoch 1/2") != std::string::npos);
  CHECK(log.str().find("epoch 2/2") != std::string::npos);

  SUBCASE("a second run reproduces every deterministic artifact") {
    const fs::path out2 = fresh_dir("train_rbm_again");
    std::ostringstream log2;
    cmd_train_rbm(base_train_config(out2), log2);
    CHECK(read_text_file(out2 / "model.json") == read_text_file(out / "model.json"));
    CHECK(read_text_file(out2 / "history.csv") == hist);

    KvConfig a = parse_config(read_text_file(out / "config.cfg"));
    KvConfig b = parse_config(read_text_file(out2 / "config.cfg"));
    a.set("out.dir", "x");
    b.set("out.dir", "x");
    CHECK(a == b);
  }
}

TEST_CASE("train-rbse command covers both families and the exact gradient") {
  const fs::path out = fresh_dir("train_rbse");
  KvConfig cfg = base_train_config(out);
  cfg.set("data.n", "12");
  cfg.set("model.hidden", "2");
  cfg.set("train.epochs", "1");
  cfg.set("train.batch", "6");
  cfg.set("train.gradient", "exact");
  std::ostringstream log;
  const ModelFile model = cmd_train_rbse(cfg, log);
  CHECK(model.kind == ModelKind::rbse_bernoulli);
  CHECK(load_model(out / "model.json") == model);
  const KvConfig frozen = parse_config(read_text_file(out / "config.cfg"));
  CHECK(frozen.get_string("model.family") == "bernoulli");
  CHECK(frozen.get_string("train.gradient") == "exact");
  const std::string hist = read_text_file(out / "history.csv");
  CHECK(hist.substr(0, hist.find('\n')) ==
        "epoch,recon_error,w_value,w_noise,b_value,b_noise,c_value,c_noise");

  SUBCASE("gaussian family lands in the model kind") {
    const fs::path out2 = fresh_dir("train_rbse_gauss");
    cfg.set("out.dir", out2.string());
    cfg.set("model.family", "gaussian");
    cfg.set("train.gradient", "sampled");
    std::ostringstream log2;
    CHECK(cmd_train_rbse(cfg, log2).kind == ModelKind::rbse_gaussian);
  }
}

TEST_CASE("training config problems are reported together") {
  const std::string empty = msg_of([] {
    std::ostringstream log;
    cmd_train_rbm(KvConfig{}, log);
  });
  CHECK(empty.find("out.dir") != std::string::npos);
  CHECK(empty.find("data.source") != std::string::npos);
  CHECK(empty.find("model.hidden") != std::string::npos);

  KvConfig cfg = base_train_config(fresh_dir("train_bad"));
  cfg.set("model.hidden", "0");
  cfg.set("train.lr", "-1");
  cfg.set("train.epsilon", "0.7");
  const std::string bad = msg_of([&] {
    std::ostringstream log;
    cmd_train_rbm(cfg, log);
  });
  CHECK(bad.find("model.hidden") != std::string::npos);
  CHECK(bad.find("train.lr") != std::string::npos);
  CHECK(bad.find("train.epsilon") != std::string::npos);

  KvConfig weird = base_train_config(fresh_dir("train_bad2"));
  weird.set("data.source", "parquet");
  weird.set("train.gradient", "finite");
  const std::string unknown = msg_of([&] {
    std::ostringstream log;
    cmd_train_rbm(weird, log);
  });
  CHECK(unknown.find("parquet") != std::string::npos);
  CHECK(unknown.find("finite") != std::string::npos);
}

TEST_CASE("gradcheck command logs per-check lines and can write a report") {
  KvConfig cfg;
  cfg.set("trials", "5");
  cfg.set("seed", "3");
  std::ostringstream log;
  const GradCheckReport report = cmd_gradcheck(cfg, log);
  CHECK(report.pass);
  CHECK(report.checks.size() == 7);
  CHECK(log.str().find("gradient-fd-bernoulli") != std::string::npos);
  CHECK(log.str().find("all checks passed") != std::string::npos);

  SUBCASE("out.dir adds report.json and the sidecars") {
    const fs::path out = fresh_dir("gradcheck");
    cfg.set("out.dir", out.string());
    std::ostringstream log2;
    cmd_gradcheck(cfg, log2);
    const auto parsed = nlohmann::json::parse(read_text_file(out / "report.json"));
    CHECK(parsed["pass"] == true);
    CHECK(parsed["trials"] == 5);
    CHECK(fs::exists(out / "config.cfg"));
    CHECK(fs::exists(out / "run.json"));
  }

  SUBCASE("zero trials is rejected") {
    cfg.set("trials", "0");
    std::ostringstream log2;
    CHECK_THROWS_AS(cmd_gradcheck(cfg, log2), ValidationError);
  }
}

TEST_CASE("synthetic-demo command produces the full artifact set") {
  const fs::path out = fresh_dir("demo");
  KvConfig cfg;
  cfg.set("out.dir", out.string());
  cfg.set("seed", "4");
  cfg.set("data.n", "40");
  cfg.set("model.hidden", "4");
  cfg.set("train.epochs", "3");
  cfg.set("train.batch", "10");
  cfg.set("demo.m_rep", "5");
  cfg.set("demo.burn_in", "1");
  cfg.set("demo.points", "4");
  cfg.set("demo.fewpoint.n", "3");
  std::ostringstream log;
  cmd_synthetic_demo(cfg, log);

  for (const char* name :
       {"roundtrip.csv", "clouds.csv", "attraction.csv", "attraction.json", "fewpoint.csv",
        "rbm_model.json", "rbse_model.json", "rbm_history.csv", "rbse_history.csv", "config.cfg",
        "run.json"})
    CHECK(fs::exists(out / name));

  const std::string clouds = read_text_file(out / "clouds.csv");
  CHECK(clouds.substr(0, clouds.find('\n')) == "x,y,source,kind");
  CHECK(std::count(clouds.begin(), clouds.end(), '\n') == 1 + 4 + 4 * 5);

  const auto aj = nlohmann::json::parse(read_text_file(out / "attraction.json"));
  CHECK(aj["outlier"].size() == 2);
  CHECK(aj["outlier_distance"].get<double>() > 0.0);
  CHECK(aj["cloud_mean_distance"].get<double>() > 0.0);
  CHECK(aj.contains("attracted"));

  const ModelFile rbse = load_model(out / "rbse_model.json");
  CHECK(rbse.kind == ModelKind::rbse_bernoulli);
  CHECK(rbse.provenance.seed == 4);
  CHECK(load_model(out / "rbm_model.json").kind == ModelKind::rbm);
}

TEST_CASE("oneshot command runs the harness from a cached pool") {
  const fs::path dir = fresh_dir("oneshot");
  save_dataset_cache(banded_pool(110, 9), dir / "pool");
  save_model(model_from_ensemble(init_ensemble(Family::bernoulli, 4, 3, 7)), dir / "rbse.json");
  save_model(model_from_rbm(init_rbm(4, 3, 8)), dir / "rbm.json");

  KvConfig cfg;
  cfg.set("out.dir", (dir / "out").string());
  cfg.set("seed", "5");
  cfg.set("data.source", "cache");
  cfg.set("data.cache", (dir / "pool").string());
  cfg.set("model.rbm", (dir / "rbm.json").string());
  cfg.set("model.rbse", (dir / "rbse.json").string());
  cfg.set("oneshot.splits", "2");
  cfg.set("oneshot.m_rep", "2");
  cfg.set("oneshot.burn_in", "0");
  cfg.set("logreg.max_iters", "40");
  std::ostringstream log;
  const OneShotResult result = cmd_oneshot(cfg, log);

  CHECK(result.split_seeds.size() == 2);
  result.validate();
  CHECK(log.str().find("pixels") != std::string::npos);

  const std::string csv = read_text_file(dir / "out" / "results.csv");
  CHECK(csv.substr(0, csv.find('\n')) == "split,pixels,rbm,dropconnect,rbse");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(nlohmann::json::parse(read_text_file(dir / "out" / "results.json")).contains("pipelines"));
  CHECK(fs::exists(dir / "out" / "config.cfg"));

  SUBCASE("model kinds are checked against their slots") {
    cfg.set("model.rbm", (dir / "rbse.json").string());
    std::ostringstream log2;
    CHECK_THROWS_AS(cmd_oneshot(cfg, log2), ValidationError);
  }

  SUBCASE("a missing model path is caught during validation") {
    cfg.set("model.rbse", (dir / "nope.json").string());
    std::ostringstream log2;
    const std::string msg = msg_of([&] { cmd_oneshot(cfg, log2); });
    CHECK(msg.find("model.rbse") != std::string::npos);
  }
}

TEST_CASE("inspect command tiles weight planes into pgm sheets") {
  const fs::path dir = fresh_dir("inspect");
  save_model(model_from_ensemble(init_ensemble(Family::bernoulli, 4, 3, 21)), dir / "ens.json");

  KvConfig cfg;
  cfg.set("out.dir", (dir / "out").string());
  cfg.set("model.path", (dir / "ens.json").string());
  std::ostringstream log;
  cmd_inspect(cfg, log);

  // 3 tiles of 2x2 in a 2x2 grid with 1px separators: 5x5 pixels
  const std::string pgm = read_text_file(dir / "out" / "filters.pgm");
  CHECK(pgm.substr(0, 9) == "P5\n5 5\n25");
  CHECK(pgm.size() == std::string("P5\n5 5\n255\n").size() + 25);
  CHECK(fs::exists(dir / "out" / "probabilities.pgm"));

  SUBCASE("plain rbm models skip the probability sheet") {
    save_model(model_from_rbm(init_rbm(4, 2, 22)), dir / "rbm.json");
    cfg.set("out.dir", (dir / "out2").string());
    cfg.set("model.path", (dir / "rbm.json").string());
    std::ostringstream log2;
    cmd_inspect(cfg, log2);
    CHECK(fs::exists(dir / "out2" / "filters.pgm"));
    CHECK(!fs::exists(dir / "out2" / "probabilities.pgm"));
  }

  SUBCASE("non-square visible dimensions are rejected") {
    save_model(model_from_rbm(init_rbm(3, 2, 23)), dir / "odd.json");
    cfg.set("model.path", (dir / "odd.json").string());
    std::ostringstream log2;
    CHECK_THROWS_AS(cmd_inspect(cfg, log2), ValidationError);
  }
}

TEST_CASE("represent command emits csv rows per input and rep") {
  const fs::path dir = fresh_dir("represent");
  save_model(model_from_ensemble(init_ensemble(Family::bernoulli, 2, 3, 31)), dir / "ens.json");
  write_text_file(dir / "points.csv", "0.2,0.8\n0.5,0.5\n");

  KvConfig cfg;
  cfg.set("out.dir", (dir / "out").string());
  cfg.set("model.path", (dir / "ens.json").string());
  cfg.set("input.csv", (dir / "points.csv").string());
  std::ostringstream log;
  cmd_represent(cfg, log);

  const std::string csv = read_text_file(dir / "out" / "representations.csv");
  CHECK(csv.substr(0, csv.find('\n')) == "input,rep,h0,h1,h2");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

  SUBCASE("stochastic kinds multiply the row count") {
    cfg.set("rep.kind", "rbse");
    cfg.set("rep.m", "3");
    cfg.set("rep.burn_in", "0");
    cfg.set("out.dir", (dir / "out_rbse").string());
    std::ostringstream log2;
    cmd_represent(cfg, log2);
    const std::string rows = read_text_file(dir / "out_rbse" / "representations.csv");
    CHECK(std::count(rows.begin(), rows.end(), '\n') == 1 + 2 * 3);
  }

  SUBCASE("rbse representations demand an ensemble model") {
    save_model(model_from_rbm(init_rbm(2, 3, 32)), dir / "rbm.json");
    cfg.set("model.path", (dir / "rbm.json").string());
    cfg.set("rep.kind", "rbse");
    std::ostringstream log2;
    CHECK_THROWS_AS(cmd_represent(cfg, log2), ValidationError);
  }

  SUBCASE("input width must match the model") {
    write_text_file(dir / "wide.csv", "0.1,0.2,0.3\n");
    cfg.set("input.csv", (dir / "wide.csv").string());
    std::ostringstream log2;
    CHECK_THROWS_AS(cmd_represent(cfg, log2), ValidationError);
  }

  SUBCASE("csv parse errors carry the line number") {
    write_text_file(dir / "bad.csv", "0.1,0.2\noops,0.4\n");
    cfg.set("input.csv", (dir / "bad.csv").string());
    std::ostringstream log2;
    const std::string msg = msg_of([&] { cmd_represent(cfg, log2); });
    CHECK(msg.find("line 2") != std::string::npos);
    CHECK(msg.find("oops") != std::string::npos);
  }
}

TEST_CASE("relative data paths fall back to the data root") {
  const fs::path dir = fresh_dir("dataroot");
  save_dataset_cache(banded_pool(4, 1), dir / "tiny");

  KvConfig cfg;
  cfg.set("out.dir", (dir / "out").string());
  cfg.set("data.dir", dir.string());
  cfg.set("data.source", "cache");
  cfg.set("data.cache", "tiny");
  cfg.set("model.hidden", "2");
  cfg.set("train.epochs", "1");
  cfg.set("train.batch", "4");
  std::ostringstream log;
  const ModelFile model = cmd_train_rbm(cfg, log);
  CHECK(model.visible() == 4);

  const KvConfig frozen = parse_config(read_text_file(dir / "out" / "config.cfg"));
  CHECK(frozen.get_string("data.cache") == (dir / "tiny").string());
}

}  // TEST_SUITE
