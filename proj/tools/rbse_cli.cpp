#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rbse.h"

namespace {

void log_line(const char* line, void*) { std::fprintf(stderr, "%s\n", line); }

struct Invocation {
  std::string config_path;
  std::vector<std::string> sets;
};

int build_config(const Invocation& inv, rbse_config** out) {
  rbse_config* cfg = nullptr;
  if (inv.config_path.empty()) {
    cfg = rbse_config_new();
  } else if (const int rc = rbse_config_load(inv.config_path.c_str(), &cfg)) {
    return rc;
  }
  for (const std::string& def : inv.sets) {
    if (const int rc = rbse_config_apply(cfg, def.c_str())) {
      rbse_config_free(cfg);
      return rc;
    }
  }
  *out = cfg;
  return RBSE_OK;
}

int run_command(const std::string& name, const rbse_config* cfg) {
  if (name == "train-rbm") return rbse_cmd_train_rbm(cfg, log_line, nullptr, nullptr);
  if (name == "train-rbse") return rbse_cmd_train_rbse(cfg, log_line, nullptr, nullptr);
  if (name == "synthetic-demo") return rbse_cmd_synthetic_demo(cfg, log_line, nullptr);
  if (name == "inspect") return rbse_cmd_inspect(cfg, log_line, nullptr);
  if (name == "represent") return rbse_cmd_represent(cfg, log_line, nullptr);
  if (name == "gradcheck") {
    int pass = 0;
    char* report = nullptr;
    int rc = rbse_cmd_gradcheck(cfg, log_line, nullptr, &pass, &report);
    if (rc == RBSE_OK && report) std::fputs(report, stdout);
    rbse_string_free(report);
    if (rc == RBSE_OK && !pass) rc = RBSE_ERR_CHECK;
    return rc;
  }
  if (name == "oneshot") {
    char* results = nullptr;
    const int rc = rbse_cmd_oneshot(cfg, log_line, nullptr, &results);
    if (rc == RBSE_OK && results) std::fputs(results, stdout);
    rbse_string_free(results);
    return rc;
  }
  std::fprintf(stderr, "rbse: unknown command '%s'\n", name.c_str());
  return RBSE_ERR_VALIDATION;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"restricted Boltzmann stochastic ensembles"};
  app.set_version_flag("--version", rbse_version());
  app.require_subcommand(1);
  app.footer(
      "Every command reads an optional key = value config file plus --set\n"
      "overrides, writes its artifacts into out.dir, and freezes the resolved\n"
      "config beside them. Relative dataset paths resolve against data.dir,\n"
      "then $RBSE_DATA_DIR, then ./data.");

  Invocation inv;
  const std::pair<const char*, const char*> commands[] = {
      {"train-rbm", "fit a single rbm with k-step contrastive divergence"},
      {"train-rbse", "fit a stochastic ensemble by expectation-maximization"},
      {"gradcheck", "run the numerical self-checks and print a json report"},
      {"synthetic-demo", "train on a 2d manifold and export representation clouds"},
      {"oneshot", "one-shot classification benchmark over feature pipelines"},
      {"inspect", "render model weight planes as pgm tile sheets"},
      {"represent", "dump representations for csv inputs through a model"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", inv.config_path, "config file to start from")
        ->type_name("FILE");
    sub->add_option("--set", inv.sets, "override or add one key=value")
        ->type_name("KEY=VALUE");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : RBSE_ERR_VALIDATION;
  }

  rbse_config* cfg = nullptr;
  int rc = build_config(inv, &cfg);
  if (rc == RBSE_OK) {
    rc = run_command(app.get_subcommands().front()->get_name(), cfg);
    rbse_config_free(cfg);
  }
  if (rc != RBSE_OK && *rbse_last_error())
    std::fprintf(stderr, "rbse: %s\n", rbse_last_error());
  return rc;
}
