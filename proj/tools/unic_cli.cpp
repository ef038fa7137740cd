// SPDX-License-Identifier: Apache-2.0
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "unic/unic.h"

namespace {

int report(unic_status s) {
  if (s != UNIC_OK) std::fprintf(stderr, "error: %s\n", unic_last_error());
  return static_cast<int>(s);
}

// Prints and frees a returned JSON string.
void print(char* s) {
  if (!s) return;
  std::cout << s << '\n';
  unic_string_free(s);
}

int write_file(const std::string& path, char* s) {
  std::ofstream out(path);
  if (!out) {
    std::fprintf(stderr, "error: cannot write %s\n", path.c_str());
    unic_string_free(s);
    return UNIC_ERR_IO;
  }
  out << s << '\n';
  unic_string_free(s);
  return 0;
}

struct ModelHandle {
  unic_model* m = nullptr;
  ~ModelHandle() { unic_model_free(m); }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unbounded image composition and camera-view recommendation"};
  app.require_subcommand(1);

  std::string input, kind, out, config, data, ckpt, log, eval_data, mode = "view", image, orientation = "landscape";
  std::string host = "127.0.0.1", static_dir;
  uint64_t seed = 0;
  int count = 0, steps = 3, port = 8080;
  std::vector<double> viewport;

  auto* build = app.add_subcommand("build-dataset", "Convert an annotated crop corpus into scenes");
  build->add_option("--input", input, "Directory of images with <stem>.txt crop annotations")->required();
  build->add_option("--kind", kind, "Source kind")->required()->check(CLI::IsMember({"gaicd", "cpc"}));
  build->add_option("--seed", seed)->required();
  build->add_option("--out", out, "Output JSONL")->required();

  auto* synth = app.add_subcommand("make-synthetic", "Render a synthetic scene corpus with oracle crops");
  synth->add_option("--count", count)->required()->check(CLI::PositiveNumber);
  synth->add_option("--seed", seed)->required();
  synth->add_option("--out", out, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Train a model");
  train->add_option("--config", config)->required()->check(CLI::ExistingFile);
  train->add_option("--data", data)->required()->check(CLI::ExistingFile);
  train->add_option("--seed", seed)->required();
  train->add_option("--out", out, "Checkpoint path")->required();
  train->add_option("--log", log, "Per-epoch JSONL log (default <out>.log.jsonl)");
  train->add_option("--eval-data", eval_data, "Held-out JSONL evaluated after every epoch")
      ->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--ckpt", ckpt)->required()->check(CLI::ExistingFile);
  eval->add_option("--data", data)->required()->check(CLI::ExistingFile);
  eval->add_option("--mode", mode)->check(CLI::IsMember({"view", "crop"}));
  eval->add_option("--out", out, "Report JSON")->required();

  auto* rec = app.add_subcommand("recommend", "Multi-step view recommendation for one image");
  rec->add_option("--ckpt", ckpt)->required()->check(CLI::ExistingFile);
  rec->add_option("--image", image)->required()->check(CLI::ExistingFile);
  rec->add_option("--viewport", viewport, "Initial viewport x,y,w,h (world-normalized, center form)")
      ->delimiter(',')
      ->expected(4);
  rec->add_option("--orientation", orientation)->check(CLI::IsMember({"landscape", "portrait"}));
  rec->add_option("--steps", steps)->check(CLI::PositiveNumber);
  rec->add_option("--out", out, "Trajectory JSON")->required();

  auto* serve = app.add_subcommand("serve", "Run the HTTP session API");
  serve->add_option("--ckpt", ckpt)->required()->check(CLI::ExistingFile);
  serve->add_option("--port", port)->check(CLI::Range(0, 65535));
  serve->add_option("--host", host);
  serve->add_option("--static", static_dir, "Directory served at /")->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  char* result = nullptr;
  if (*build) {
    if (int rc = report(unic_build_dataset(input.c_str(), kind.c_str(), seed, out.c_str(), &result))) return rc;
    print(result);
    return 0;
  }
  if (*synth) {
    if (int rc = report(unic_make_synthetic(count, seed, out.c_str(), &result))) return rc;
    print(result);
    return 0;
  }
  if (*train) {
    if (log.empty()) log = out + ".log.jsonl";
    const unic_status s = unic_train(config.c_str(), data.c_str(), seed, out.c_str(), log.c_str(),
                                     eval_data.empty() ? nullptr : eval_data.c_str(), &result);
    if (int rc = report(s)) return rc;
    print(result);
    return 0;
  }

  ModelHandle model;
  if (int rc = report(unic_model_load(ckpt.c_str(), &model.m))) return rc;

  if (*eval) {
    if (int rc = report(unic_evaluate(model.m, data.c_str(), mode.c_str(), &result))) return rc;
    return write_file(out, result);
  }
  if (*rec) {
    const double* vp = viewport.empty() ? nullptr : viewport.data();
    if (int rc = report(unic_recommend(model.m, image.c_str(), vp, orientation.c_str(), steps, &result))) return rc;
    return write_file(out, result);
  }

  // serve: block the stop signals before any server thread exists, then wait for one.
  sigset_t stop_set;
  sigemptyset(&stop_set);
  sigaddset(&stop_set, SIGINT);
  sigaddset(&stop_set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop_set, nullptr);

  unic_server* server = nullptr;
  const char* dir = static_dir.empty() ? nullptr : static_dir.c_str();
  if (int rc = report(unic_server_start(model.m, host.c_str(), port, dir, &server))) return rc;
  std::printf("listening on http://%s:%d\n", host.c_str(), unic_server_port(server));
  std::fflush(stdout);
  int sig = 0;
  sigwait(&stop_set, &sig);
  unic_server_free(server);
  return 0;
}
