// SPDX-License-Identifier: Apache-2.0
#include "unic/unic.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "advisor/advisor.hpp"
#include "advisor/server.hpp"
#include "dataset/scene.hpp"
#include "dataset/synthetic.hpp"
#include "eval/metrics.hpp"
#include "model/unic_model.hpp"
#include "train/trainer.hpp"

struct unic_model {
  std::shared_ptr<const unic::model::UnicModel> model;
};

struct unic_server {
  std::unique_ptr<unic::advisor::AdvisorServer> server;
  int port = 0;
};

namespace {

thread_local std::string g_last_error;

unic_status set_error(unic_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void emit(char** out, const nlohmann::json& j) {
  if (out) *out = dup_string(j.dump(2));
}

template <class F>
unic_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return UNIC_OK;
  } catch (const unic::data::InfeasibleError& e) {
    return set_error(UNIC_ERR_INFEASIBLE, e.what());
  } catch (const unic::advisor::SessionError& e) {
    return set_error(e.code() == unic::advisor::SessionError::Code::NotFound ? UNIC_ERR_NOT_FOUND
                                                                             : UNIC_ERR_INVALID_ARGUMENT,
                     e.what());
  } catch (const unic::data::SceneError& e) {
    return set_error(UNIC_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::domain_error& e) {
    return set_error(UNIC_ERR_NUMERIC, e.what());
  } catch (const std::invalid_argument& e) {
    return set_error(UNIC_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return set_error(UNIC_ERR_IO, e.what());
  } catch (const std::logic_error& e) {
    return set_error(UNIC_ERR_STATE, e.what());
  } catch (const std::runtime_error& e) {
    return set_error(UNIC_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return set_error(UNIC_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(UNIC_ERR_INTERNAL, "unknown error");
  }
}

std::string require(const char* s, const char* what) {
  if (!s || !*s) throw std::invalid_argument(std::string(what) + " is required");
  return s;
}

}  // namespace

extern "C" {

const char* unic_last_error(void) { return g_last_error.c_str(); }

const char* unic_version(void) { return "unic-v1"; }

void unic_string_free(char* s) { std::free(s); }

unic_status unic_build_dataset(const char* input_dir, const char* kind, uint64_t seed, const char* out_jsonl,
                               char** summary_json) {
  return guarded([&] {
    const auto k = unic::data::parse_source_kind(require(kind, "kind"));
    unic::data::BuildStats st;
    const auto scenes = unic::data::build_dataset(require(input_dir, "input directory"), k, seed, &st);
    unic::data::write_jsonl(require(out_jsonl, "output path"), scenes);
    size_t crops = 0, outside = 0;
    for (const auto& s : scenes) {
      for (const auto& c : s.crops) {
        const auto q = c.box.corners();
        ++crops;
        outside += (q.x1 < 0 || q.y1 < 0 || q.x2 > 1 || q.y2 > 1);
      }
    }
    emit(summary_json, {{"images", st.images},
                        {"written", st.written},
                        {"skipped", st.skipped},
                        {"crops", crops},
                        {"unbounded_fraction", crops ? static_cast<double>(outside) / crops : 0.0}});
  });
}

unic_status unic_make_synthetic(int count, uint64_t seed, const char* out_dir, char** summary_json) {
  return guarded([&] {
    const std::filesystem::path dir = require(out_dir, "output directory");
    const auto scenes = unic::data::write_synthetic_dataset(dir, count, seed);
    emit(summary_json, {{"scenes", scenes.size()}, {"jsonl", (dir / "scenes.jsonl").string()}});
  });
}

unic_status unic_train(const char* config_path, const char* data_jsonl, uint64_t seed, const char* out_ckpt,
                       const char* log_jsonl, const char* eval_jsonl, char** summary_json) {
  return guarded([&] {
    unic::train::TrainConfig cfg = unic::train::load_train_config(require(config_path, "config"));
    cfg.seed = seed;
    const std::string ckpt = require(out_ckpt, "checkpoint path");
    const auto scenes = unic::data::read_jsonl(require(data_jsonl, "dataset"));
    std::vector<unic::data::Scene> eval_scenes;
    if (eval_jsonl && *eval_jsonl) eval_scenes = unic::data::read_jsonl(eval_jsonl);

    std::ofstream log;
    if (log_jsonl && *log_jsonl) {
      log.open(log_jsonl);
      if (!log) throw std::runtime_error(std::string("cannot open log: ") + log_jsonl);
    }
    unic::train::TrainHooks hooks;
    if (!eval_scenes.empty()) {
      hooks.eval = [&](const unic::model::UnicModel& m) {
        return unic::eval::evaluate(m, eval_scenes, unic::eval::EvalMode::View).to_json(false);
      };
    }
    nlohmann::json last;
    hooks.on_epoch = [&](const unic::train::EpochLog& e) {
      last = e.to_json();
      if (log.is_open()) log << last.dump() << '\n' << std::flush;
    };
    unic::train::train(cfg, unic::train::load_train_samples(cfg, scenes), hooks, ckpt);
    emit(summary_json, {{"checkpoint", ckpt}, {"scenes", scenes.size()}, {"last_epoch", last}});
  });
}

unic_status unic_model_load(const char* ckpt_path, unic_model** out) {
  return guarded([&] {
    if (!out) throw std::invalid_argument("output handle is required");
    auto m = std::make_shared<const unic::model::UnicModel>(unic::model::UnicModel::load(require(ckpt_path, "checkpoint")));
    *out = new unic_model{std::move(m)};
  });
}

void unic_model_free(unic_model* model) { delete model; }

unic_status unic_model_info(const unic_model* model, char** info_json) {
  return guarded([&] {
    if (!model) throw std::invalid_argument("model handle is required");
    const auto& cfg = model->model->config();
    emit(info_json, {{"version", unic_version()},
                     {"config", nlohmann::json(cfg)},
                     {"grid", {cfg.grid_rows(), cfg.grid_cols()}},
                     {"margin", cfg.effective_margin()},
                     {"parameters", model->model->params().scalar_count()}});
  });
}

unic_status unic_evaluate(const unic_model* model, const char* data_jsonl, const char* mode, char** report_json) {
  return guarded([&] {
    if (!model) throw std::invalid_argument("model handle is required");
    const auto m = unic::eval::parse_eval_mode(mode ? mode : "view");
    const auto scenes = unic::data::read_jsonl(require(data_jsonl, "dataset"));
    emit(report_json, unic::eval::evaluate(*model->model, scenes, m).to_json());
  });
}

unic_status unic_recommend(const unic_model* model, const char* image_path, const double* viewport,
                           const char* orientation, int max_steps, char** trajectory_json) {
  return guarded([&] {
    using unic::geom::Box;
    if (!model) throw std::invalid_argument("model handle is required");
    if (max_steps < 1) throw std::invalid_argument("max_steps must be at least 1");
    const std::string path = require(image_path, "image path");
    const auto world = unic::image::load_rgb(path);
    const auto o = unic::geom::parse_orientation(orientation ? orientation : "landscape");
    Box vp;
    if (viewport) {
      vp = {viewport[0], viewport[1], viewport[2], viewport[3]};
    } else {
      // Largest centered camera view inside the world.
      const double r = unic::geom::camera_ratio(o);
      double w = world.cols, h = world.cols / r;
      if (h > world.rows) {
        h = world.rows;
        w = h * r;
      }
      vp = {0.5, 0.5, w / world.cols, h / world.rows};
    }
    unic::advisor::AdvisorOptions opt;
    opt.max_steps = max_steps;
    const auto traj = unic::advisor::run_multistep(*model->model, world, vp, o, opt);
    nlohmann::json steps = nlohmann::json::array();
    for (size_t i = 0; i < traj.size(); ++i) {
      nlohmann::json j = traj[i].to_json();
      j["step_index"] = i;
      steps.push_back(j);
    }
    emit(trajectory_json, {{"image", path},
                           {"world_w", world.cols},
                           {"world_h", world.rows},
                           {"orientation", std::string(unic::geom::to_string(o))},
                           {"init_viewport", vp.to_array()},
                           {"final_viewport", traj.back().next_viewport.to_array()},
                           {"converged", traj.back().rec.converged},
                           {"trajectory", steps}});
  });
}

unic_status unic_server_start(const unic_model* model, const char* host, int port, const char* static_dir,
                              unic_server** out) {
  return guarded([&] {
    if (!model || !out) throw std::invalid_argument("model and output handles are required");
    if (port < 0 || port > 65535) throw std::invalid_argument("port out of range");
    auto s = std::make_unique<unic_server>();
    s->server = std::make_unique<unic::advisor::AdvisorServer>(model->model);
    if (static_dir && *static_dir) s->server->mount_static(static_dir);
    s->port = s->server->bind(host && *host ? host : "127.0.0.1", port);
    s->server->start();
    *out = s.release();
  });
}

int unic_server_port(const unic_server* server) { return server ? server->port : -1; }

void unic_server_stop(unic_server* server) {
  if (server && server->server) server->server->stop();
}

void unic_server_free(unic_server* server) {
  if (!server) return;
  if (server->server) {
    server->server->stop();
    server->server->wait();
  }
  delete server;
}

}  // extern "C"
