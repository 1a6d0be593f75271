#include "rbse.h"

#include <cstdlib>
#include <cstring>
#include <ostream>
#include <streambuf>
#include <string>

#include "rbse/commands.hpp"
#include "rbse/config.hpp"
#include "rbse/ensemble.hpp"
#include "rbse/errors.hpp"
#include "rbse/model_io.hpp"
#include "rbse/representation.hpp"

struct rbse_config {
  rbse::KvConfig cfg;
};

struct rbse_model {
  rbse::ModelFile model;
};

namespace {

thread_local std::string g_error;

template <typename F>
int guarded(F&& fn) {
  try {
    fn();
    g_error.clear();
    return RBSE_OK;
  } catch (const rbse::ValidationError& e) {
    g_error = e.what();
    return RBSE_ERR_VALIDATION;
  } catch (const rbse::CheckError& e) {
    g_error = e.what();
    return RBSE_ERR_CHECK;
  } catch (const rbse::IoError& e) {
    g_error = e.what();
    return RBSE_ERR_IO;
  } catch (const std::exception& e) {
    g_error = e.what();
    return RBSE_ERR_VALIDATION;
  }
}

int null_arg(const char* name) {
  g_error = std::string("null argument: ") + name;
  return RBSE_ERR_VALIDATION;
}

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (p) std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

// forwards complete lines to the callback, newline stripped
class LogBuf final : public std::streambuf {
 public:
  LogBuf(rbse_log_fn fn, void* user) : fn_(fn), user_(user) {}
  ~LogBuf() override {
    if (fn_ && !line_.empty()) fn_(line_.c_str(), user_);
  }

 protected:
  int_type overflow(int_type ch) override {
    if (ch == traits_type::eof()) return ch;
    if (ch == '\n') {
      if (fn_) fn_(line_.c_str(), user_);
      line_.clear();
    } else {
      line_.push_back(traits_type::to_char_type(ch));
    }
    return ch;
  }

 private:
  rbse_log_fn fn_;
  void* user_;
  std::string line_;
};

template <typename F>
int run_command(const rbse_config* cfg, rbse_log_fn log, void* user, F&& body) {
  if (!cfg) return null_arg("cfg");
  return guarded([&] {
    LogBuf buf(log, user);
    std::ostream os(&buf);
    body(cfg->cfg, os);
  });
}

rbse::RbmParams mean_params(const rbse::ModelFile& m) {
  return m.kind == rbse::ModelKind::rbm ? m.rbm : rbse::mean_model(m.ensemble);
}

}  // namespace

extern "C" {

const char* rbse_version(void) { return "1.0.0"; }

const char* rbse_last_error(void) { return g_error.c_str(); }

void rbse_string_free(char* s) { std::free(s); }

rbse_config* rbse_config_new(void) { return new (std::nothrow) rbse_config{}; }

void rbse_config_free(rbse_config* cfg) { delete cfg; }

int rbse_config_load(const char* path, rbse_config** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] { *out = new rbse_config{rbse::load_config(path)}; });
}

int rbse_config_set(rbse_config* cfg, const char* key, const char* value) {
  if (!cfg) return null_arg("cfg");
  if (!key) return null_arg("key");
  if (!value) return null_arg("value");
  return guarded([&] { cfg->cfg.set(key, value); });
}

int rbse_config_apply(rbse_config* cfg, const char* definition) {
  if (!cfg) return null_arg("cfg");
  if (!definition) return null_arg("definition");
  return guarded([&] {
    const std::string defs[] = {definition};
    rbse::apply_overrides(cfg->cfg, defs);
  });
}

int rbse_config_get(const rbse_config* cfg, const char* key, char** out_value) {
  if (!cfg) return null_arg("cfg");
  if (!key) return null_arg("key");
  if (!out_value) return null_arg("out_value");
  return guarded([&] {
    const std::string* v = cfg->cfg.find(key);
    *out_value = v ? dup_string(*v) : nullptr;
  });
}

int rbse_config_render(const rbse_config* cfg, char** out_text) {
  if (!cfg) return null_arg("cfg");
  if (!out_text) return null_arg("out_text");
  return guarded([&] { *out_text = dup_string(rbse::render_config(cfg->cfg)); });
}

int rbse_model_load(const char* path, rbse_model** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] { *out = new rbse_model{rbse::load_model(path)}; });
}

int rbse_model_save(const rbse_model* model, const char* path) {
  if (!model) return null_arg("model");
  if (!path) return null_arg("path");
  return guarded([&] { rbse::save_model(model->model, path); });
}

void rbse_model_free(rbse_model* model) { delete model; }

const char* rbse_model_kind(const rbse_model* model) {
  if (!model) return nullptr;
  // names are static, so the pointer stays valid past the handle
  static const std::string names[] = {
      rbse::model_kind_name(rbse::ModelKind::rbm),
      rbse::model_kind_name(rbse::ModelKind::rbse_bernoulli),
      rbse::model_kind_name(rbse::ModelKind::rbse_gaussian),
  };
  switch (model->model.kind) {
    case rbse::ModelKind::rbm: return names[0].c_str();
    case rbse::ModelKind::rbse_bernoulli: return names[1].c_str();
    case rbse::ModelKind::rbse_gaussian: return names[2].c_str();
  }
  return nullptr;
}

size_t rbse_model_visible(const rbse_model* model) {
  return model ? model->model.visible() : 0;
}

size_t rbse_model_hidden(const rbse_model* model) {
  return model ? model->model.hidden() : 0;
}

uint64_t rbse_model_seed(const rbse_model* model) {
  return model ? model->model.provenance.seed : 0;
}

int rbse_model_represent(const rbse_model* model, const double* v, size_t visible,
                         double* out_h, size_t hidden) {
  if (!model) return null_arg("model");
  if (!v) return null_arg("v");
  if (!out_h) return null_arg("out_h");
  return guarded([&] {
    if (visible != model->model.visible() || hidden != model->model.hidden())
      throw rbse::ValidationError("represent: buffer sizes do not match the model");
    const auto h = rbse::deterministic_representation(mean_params(model->model), {v, visible});
    std::memcpy(out_h, h.data(), hidden * sizeof(double));
  });
}

int rbse_model_reconstruct(const rbse_model* model, const double* h, size_t hidden,
                           double* out_v, size_t visible) {
  if (!model) return null_arg("model");
  if (!h) return null_arg("h");
  if (!out_v) return null_arg("out_v");
  return guarded([&] {
    if (visible != model->model.visible() || hidden != model->model.hidden())
      throw rbse::ValidationError("reconstruct: buffer sizes do not match the model");
    const auto v = rbse::reconstruct(mean_params(model->model), {h, hidden});
    std::memcpy(out_v, v.data(), visible * sizeof(double));
  });
}

int rbse_cmd_train_rbm(const rbse_config* cfg, rbse_log_fn log, void* user,
                       rbse_model** out_model) {
  if (out_model) *out_model = nullptr;
  return run_command(cfg, log, user, [&](const rbse::KvConfig& kv, std::ostream& os) {
    rbse::ModelFile model = rbse::cmd_train_rbm(kv, os);
    if (out_model) *out_model = new rbse_model{std::move(model)};
  });
}

int rbse_cmd_train_rbse(const rbse_config* cfg, rbse_log_fn log, void* user,
                        rbse_model** out_model) {
  if (out_model) *out_model = nullptr;
  return run_command(cfg, log, user, [&](const rbse::KvConfig& kv, std::ostream& os) {
    rbse::ModelFile model = rbse::cmd_train_rbse(kv, os);
    if (out_model) *out_model = new rbse_model{std::move(model)};
  });
}

int rbse_cmd_gradcheck(const rbse_config* cfg, rbse_log_fn log, void* user, int* out_pass,
                       char** out_report_json) {
  if (out_pass) *out_pass = 0;
  if (out_report_json) *out_report_json = nullptr;
  return run_command(cfg, log, user, [&](const rbse::KvConfig& kv, std::ostream& os) {
    const rbse::GradCheckReport report = rbse::cmd_gradcheck(kv, os);
    if (out_pass) *out_pass = report.pass ? 1 : 0;
    if (out_report_json) *out_report_json = dup_string(report.to_json());
  });
}

int rbse_cmd_synthetic_demo(const rbse_config* cfg, rbse_log_fn log, void* user) {
  return run_command(cfg, log, user,
                     [](const rbse::KvConfig& kv, std::ostream& os) {
                       rbse::cmd_synthetic_demo(kv, os);
                     });
}

int rbse_cmd_oneshot(const rbse_config* cfg, rbse_log_fn log, void* user,
                     char** out_results_json) {
  if (out_results_json) *out_results_json = nullptr;
  return run_command(cfg, log, user, [&](const rbse::KvConfig& kv, std::ostream& os) {
    const rbse::OneShotResult result = rbse::cmd_oneshot(kv, os);
    if (out_results_json) *out_results_json = dup_string(result.to_json());
  });
}

int rbse_cmd_inspect(const rbse_config* cfg, rbse_log_fn log, void* user) {
  return run_command(cfg, log, user, [](const rbse::KvConfig& kv, std::ostream& os) {
    rbse::cmd_inspect(kv, os);
  });
}

int rbse_cmd_represent(const rbse_config* cfg, rbse_log_fn log, void* user) {
  return run_command(cfg, log, user, [](const rbse::KvConfig& kv, std::ostream& os) {
    rbse::cmd_represent(kv, os);
  });
}

}  // extern "C"
