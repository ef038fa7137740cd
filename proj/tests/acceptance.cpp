// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one PASS/FAIL line per primary criterion.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "advisor/advisor.hpp"
#include "dataset/scene.hpp"
#include "dataset/synthetic.hpp"
#include "eval/metrics.hpp"
#include "oracles.hpp"
#include "train/losses.hpp"
#include "train/matching.hpp"
#include "train/teacher.hpp"
#include "train/trainer.hpp"

using namespace unic;
using geom::Box;
using geom::Orientation;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Result {
  std::string name;
  bool pass = false;
  std::string detail;
  json metrics = json::object();
};

// ---------------------------------------------------------------- geometry

Result geometry_suite() {
  const auto t0 = Clock::now();
  Result r{"geometry"};
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> c(-0.5, 1.5), e(0.01, 2.0);
  long failures = 0;
  for (int i = 0; i < 10000; ++i) {
    const Box crop{c(rng), c(rng), e(rng), e(rng)};
    const Orientation o = i % 2 ? Orientation::Landscape : Orientation::Portrait;
    const Box v = geom::derive_view(crop, o);
    failures += !oracle::check_view(crop, v, geom::camera_ratio(o), 1.0).ok();
  }
  double max_err = 0;
  for (int i = 0; i < 1000; ++i) {
    const Box a = oracle::lattice_box(rng), b = oracle::lattice_box(rng);
    max_err = std::max(max_err, std::abs(geom::iou(a, b) - oracle::raster_iou(a, b)));
  }
  const double secs = seconds_since(t0);
  r.pass = failures == 0 && max_err <= 1e-3 && secs < 30;
  r.metrics = {{"view_failures", failures}, {"max_iou_err", max_err}, {"seconds", secs}};
  char buf[160];
  std::snprintf(buf, sizeof(buf), "derive_view failures %ld/10000, max |IoU - raster| %.2e (tol 1e-3), %.1fs (< 30s)",
                failures, max_err, secs);
  r.detail = buf;
  return r;
}

// ---------------------------------------------------------------- matching

Result matching_suite() {
  const auto t0 = Clock::now();
  Result r{"matching"};
  std::mt19937_64 rng(102);
  std::uniform_int_distribution<int> n(1, 7);
  std::uniform_real_distribution<double> v(-1, 3);
  int mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    Eigen::MatrixXd cost(n(rng), n(rng));
    for (int i = 0; i < cost.size(); ++i) cost.data()[i] = v(rng);
    const double got = train::solve_assignment(cost).cost;
    mismatches += std::abs(got - oracle::permutation_min_cost(cost)) > 1e-9;
  }
  const double secs = seconds_since(t0);
  r.pass = mismatches == 0 && secs < 60;
  r.metrics = {{"mismatches", mismatches}, {"seconds", secs}};
  r.detail = std::to_string(mismatches) + "/1000 instances differ from the permutation minimum (tol 1e-9), " +
             std::to_string(secs).substr(0, 5) + "s (< 60s)";
  return r;
}

// ---------------------------------------------------------------- gradients

Result gradient_suite() {
  const auto t0 = Clock::now();
  Result r{"gradients"};
  std::mt19937_64 rng(103);
  std::uniform_real_distribution<double> bc(-0.2, 1.2), be(0.1, 1.2), lg(-5, 5), u(0, 1);
  std::normal_distribution<double> nd(0, 1.5);
  std::map<std::string, double> worst;
  auto note = [&](const std::string& k, double ana, double num) {
    worst[k] = std::max(worst[k], oracle::rel_err(ana, num));
  };

  for (int t = 0; t < 200; ++t) {
    const Box p{bc(rng), bc(rng), be(rng), be(rng)}, g{bc(rng), bc(rng), be(rng), be(rng)};
    train::BoxGrad gl{}, gg{};
    train::l1_box_loss(p, g, &gl);
    train::giou_loss(p, g, &gg);
    for (int k = 0; k < 4; ++k) {
      auto at = [&](double x) {
        auto a = p.to_array();
        a[k] = x;
        return Box::from_array(a);
      };
      const double x0 = p.to_array()[k];
      note("L1", gl[k], oracle::central_diff([&](double x) { return train::l1_box_loss(at(x), g); }, x0));
      note("GIoU", gg[k], oracle::central_diff([&](double x) { return train::giou_loss(at(x), g); }, x0));
    }
    const double x = lg(rng), target = u(rng);
    double d = 0;
    train::quality_focal_loss(x, target, 2.0, &d);
    note("quality-focal", d, oracle::central_diff([&](double z) { return train::quality_focal_loss(z, target, 2.0); }, x));
  }

  const std::pair<std::string, train::ExtraLossType> types[] = {{"smooth-l1", train::ExtraLossType::SmoothL1},
                                                                 {"MSE", train::ExtraLossType::Mse},
                                                                 {"cosine", train::ExtraLossType::Cosine},
                                                                 {"KL", train::ExtraLossType::Kl}};
  for (const auto& [name, type] : types) {
    for (int t = 0; t < 20; ++t) {
      Eigen::MatrixXd p(3, 6), q(3, 6), g;
      for (int i = 0; i < p.size(); ++i) {
        p.data()[i] = nd(rng);
        q.data()[i] = nd(rng);
      }
      train::extra_loss(p, q, type, 1.0, &g);
      for (int i = 0; i < p.size(); ++i) {
        auto f = [&](double v) {
          Eigen::MatrixXd x = p;
          x.data()[i] = v;
          return train::extra_loss(x, q, type, 1.0);
        };
        note(name, g.data()[i], oracle::central_diff(f, p.data()[i]));
      }
    }
  }
  double overall = 0;
  std::string detail;
  for (const auto& [k, v] : worst) {
    overall = std::max(overall, v);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s%s %.1e", detail.empty() ? "" : ", ", k.c_str(), v);
    detail += buf;
    r.metrics[k] = v;
  }
  const double secs = seconds_since(t0);
  r.metrics["seconds"] = secs;
  r.pass = overall <= 1e-4 && worst.size() == 7 && secs < 60;
  r.detail = "max rel err (tol 1e-4): " + detail;
  return r;
}

// ---------------------------------------------------------------- dataset

Result dataset_suite() {
  Result r{"dataset"};
  const double alpha = 0.7, beta = 0.7;
  std::mt19937_64 rng(104);
  std::uniform_int_distribution<int> dim(200, 2000);
  std::uniform_real_distribution<double> u(0, 1);
  long accepted = 0, violations = 0, infeasible = 0;
  for (uint64_t i = 0; accepted < 10000; ++i) {
    const int W = dim(rng), H = dim(rng);
    const double gw = W * (0.3 + 0.7 * u(rng)), gh = H * (0.3 + 0.7 * u(rng));
    const Box gt{gw / 2 + (W - gw) * u(rng), gh / 2 + (H - gh) * u(rng), gw, gh};
    try {
      const auto s = data::sample_init_view(W, H, gt, i);
      ++accepted;
      const Box& v = s.view;
      const auto q = v.corners();
      const double ratio = geom::camera_ratio(s.orientation);
      const bool in_world = q.x1 >= -1e-6 && q.y1 >= -1e-6 && q.x2 <= W + 1e-6 && q.y2 <= H + 1e-6;
      const bool scale = v.w >= alpha * W - 1e-6 && v.h >= alpha * H - 1e-6;
      const bool overlap = oracle::area_iou(v, gt) >= beta;
      const bool aspect = std::abs(v.w - ratio * v.h) <= 1.0;
      violations += !(in_world && scale && overlap && aspect);
    } catch (const data::InfeasibleError&) {
      ++infeasible;
    }
  }
  long crops = 0, outside = 0;
  for (uint64_t s = 0; s < 100; ++s) {
    for (const auto& c : data::make_synthetic_scene(data::derive_seed(104, s)).scene.crops) {
      const auto q = c.box.corners();
      ++crops;
      outside += q.x1 < 0 || q.y1 < 0 || q.x2 > 1 || q.y2 > 1;
    }
  }
  const double frac = static_cast<double>(outside) / crops;
  r.pass = violations == 0 && frac >= 0.10;
  r.metrics = {{"accepted", accepted},
               {"violations", violations},
               {"infeasible_worlds", infeasible},
               {"crops", crops},
               {"unbounded_fraction", frac}};
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "%ld/%ld init views violate scale/IoU/ratio/world; unbounded gt fraction %.3f (>= 0.10) over %ld crops",
                violations, accepted, frac, crops);
  r.detail = buf;
  return r;
}

// ---------------------------------------------------------------- FEM contracts

model::ModelConfig contract_config() {
  model::ModelConfig c;
  c.dim = 32;
  c.heads = 2;
  c.ffn_dim = 64;
  c.encoder_layers = 1;
  c.decoder_layers = 1;
  c.fem_blocks = 2;
  c.num_anchors = 8;
  return c;
}

Result fem_suite() {
  Result r{"fem-contracts"};
  std::map<std::string, bool> ok;
  const model::ModelConfig cfg = contract_config();  // 192x256 input, stride 16 -> 12x16 grid
  model::UnicModel m(cfg);
  const auto sc = data::make_synthetic_scene(105);
  const auto z = m.encode(m.prepare(sc.world));

  const auto id = m.extrapolate(z, 0);
  ok["margin0_identity"] = id.tokens.value().data == z.tokens.value().data && id.padded_count() == 0;

  const auto ext = m.extrapolate(z, 4);
  ok["token_bookkeeping"] = z.rows == 12 && z.cols == 16 && z.visible_count() == 192 && ext.rows == 20 &&
                            ext.cols == 24 && ext.size() == 480 && ext.padded_count() == 288 &&
                            ext.visible_count() == 192;

  model::TokenGrid z2 = z;
  nn::Tensor t = z.tokens.value();
  for (int k = 0; k < t.cols(); ++k) t(37, k) += 0.25f;
  z2.tokens = nn::constant(t);
  const auto ext2 = m.extrapolate(z2, 4);
  int moved = 0;
  for (int i = 0; i < ext.size(); ++i) {
    if (ext.visible[i]) continue;
    double d = 0;
    for (int k = 0; k < ext.dim(); ++k) d += std::abs(ext.tokens.value()(i, k) - ext2.tokens.value()(i, k));
    moved += d > 0;
  }
  ok["perturbation_propagates"] = moved == ext.padded_count();

  // Stop-gradient audit on L_comp + L_extra.
  train::TrainConfig tc;
  tc.model = cfg;
  model::UnicModel student(cfg);
  train::EmaTeacher teacher(student);
  const auto sample = train::make_train_sample(cfg, sc.scene, sc.world);
  std::mt19937_64 rng(1);
  const auto sl = train::sample_loss(student, &teacher, sample, tc, train::LabelMode::SelfDistill, &rng, 1.0);
  double tnorm = 0, snorm = 0;
  for (const auto& [n, p] : teacher.model().params().items()) {
    for (float g : p.grad().data) tnorm += static_cast<double>(g) * g;
  }
  for (const auto& [n, p] : student.params().items()) {
    for (float g : p.grad().data) snorm += static_cast<double>(g) * g;
  }
  ok["teacher_grad_zero"] = tnorm == 0.0 && snorm > 0.0 && sl.extra_cells > 0;

  // EMA law with a constant student.
  for (auto& [n, p] : student.params().items()) {
    for (auto& v : p.mutable_value().data) v = v * 0.5f + 0.1f;
  }
  std::vector<std::vector<double>> d0;
  for (size_t i = 0; i < teacher.shadow().size(); ++i) {
    const auto& s = student.params().items()[i].second.value().data;
    std::vector<double> d(s.size());
    for (size_t k = 0; k < s.size(); ++k) d[k] = teacher.shadow()[i][k] - s[k];
    d0.push_back(std::move(d));
  }
  double max_dev = 0;
  const double mu = 0.999;
  for (int step = 1; step <= 50; ++step) {
    teacher.update(student, mu);
    const double f = std::pow(mu, step);
    for (size_t i = 0; i < d0.size(); ++i) {
      const auto& s = student.params().items()[i].second.value().data;
      for (size_t k = 0; k < s.size(); ++k) {
        max_dev = std::max(max_dev, std::abs(teacher.shadow()[i][k] - s[k] - f * d0[i][k]));
      }
    }
  }
  ok["ema_geometric_decay"] = max_dev <= 1e-10;

  r.pass = true;
  for (const auto& [k, v] : ok) {
    r.pass = r.pass && v;
    r.metrics[k] = v;
    r.detail += (r.detail.empty() ? "" : ", ") + k + (v ? " ok" : " FAILED");
  }
  r.metrics["teacher_grad_norm_sq"] = tnorm;
  r.metrics["ema_max_deviation"] = max_dev;
  char buf[64];
  std::snprintf(buf, sizeof(buf), " (EMA dev %.1e, tol 1e-10)", max_dev);
  r.detail += buf;
  return r;
}

// ---------------------------------------------------------------- synthetic end to end

struct SyntheticSet {
  std::vector<data::Scene> scenes;
  std::vector<data::SyntheticDescriptor> oracles;
  std::map<std::string, image::Raster> worlds;

  eval::WorldLoader loader() const {
    return [this](const data::Scene& s) { return worlds.at(s.image); };
  }
};

SyntheticSet make_set(uint64_t seed, int count) {
  SyntheticSet set;
  for (int i = 0; i < count; ++i) {
    auto s = data::make_synthetic_scene(data::derive_seed(seed, i));
    s.scene.image = "mem:" + std::to_string(seed) + ":" + std::to_string(i);
    set.worlds[s.scene.image] = s.world;
    set.scenes.push_back(s.scene);
    set.oracles.push_back(s.oracle);
  }
  return set;
}

struct Trained {
  std::unique_ptr<model::UnicModel> model;
  double seconds = 0;
  json log = json::array();
};

Trained train_variant(train::TrainConfig cfg, bool use_fem, const SyntheticSet& train_set,
                      const std::filesystem::path& ckpt) {
  cfg.model.use_fem = use_fem;
  const auto t0 = Clock::now();
  std::vector<train::TrainSample> samples;
  for (size_t i = 0; i < train_set.scenes.size(); ++i) {
    const auto& s = train_set.scenes[i];
    for (auto& t : train::make_train_samples(cfg, s, train_set.worlds.at(s.image), i)) samples.push_back(std::move(t));
  }
  Trained out;
  train::TrainHooks hooks;
  hooks.on_epoch = [&](const train::EpochLog& l) {
    out.log.push_back(l.to_json());
    std::fprintf(stderr, "  [%s] epoch %d L_comp %.4f L_extra %.4f (%.0fs)\n", use_fem ? "fem" : "no-fem", l.epoch, l.comp,
                 l.extra, l.seconds);
  };
  out.model = std::make_unique<model::UnicModel>(train::train(cfg, std::move(samples), hooks, ckpt));
  out.seconds = seconds_since(t0);
  return out;
}

double subset_mean_iou(const eval::MetricsReport& r, bool out_of_border) {
  double s = 0;
  int n = 0;
  for (const auto& im : r.per_image) {
    if (im.out_of_border != out_of_border) continue;
    s += im.iou;
    ++n;
  }
  return n ? s / n : 0.0;
}

double subset_acc(const eval::MetricsReport& r, bool out_of_border) {
  double s = 0;
  int n = 0;
  for (const auto& im : r.per_image) {
    if (im.out_of_border != out_of_border) continue;
    s += im.hit_1_5_e85;
    ++n;
  }
  return n ? 100.0 * s / n : 0.0;
}

struct EndToEnd {
  Result result{"synthetic-end-to-end"};
  std::unique_ptr<model::UnicModel> fem_model;
};

EndToEnd end_to_end_suite(const train::TrainConfig& cfg, const SyntheticSet& train_set, const SyntheticSet& test_set,
                          const std::filesystem::path& work) {
  EndToEnd out;
  Result& r = out.result;

  std::vector<model::PredictionSet> center;
  for (size_t i = 0; i < test_set.scenes.size(); ++i) center.push_back({{Box::unit()}, {1.0}});
  const auto base = eval::evaluate_predictions(test_set.scenes, center, eval::EvalMode::Crop);

  Trained fem = train_variant(cfg, true, train_set, work / "fem.ckpt");
  Trained plain = train_variant(cfg, false, train_set, work / "no_fem.ckpt");
  const auto rf = eval::evaluate(*fem.model, test_set.scenes, eval::EvalMode::Crop, test_set.loader());
  const auto rp = eval::evaluate(*plain.model, test_set.scenes, eval::EvalMode::Crop, test_set.loader());
  const auto rfv = eval::evaluate(*fem.model, test_set.scenes, eval::EvalMode::View, test_set.loader());

  int oob = 0;
  for (const auto& im : rf.per_image) oob += im.out_of_border;
  const double fem_oob = subset_mean_iou(rf, true), plain_oob = subset_mean_iou(rp, true);
  const bool absolute = rf.mean_iou >= 0.70;
  const bool beats_baseline = rf.mean_iou >= base.mean_iou + 0.10;
  const bool fem_wins = fem_oob >= plain_oob;
  r.pass = absolute && beats_baseline && fem_wins;
  r.metrics = {{"train_scenes", train_set.scenes.size()},
               {"test_scenes", test_set.scenes.size()},
               {"baseline_iou", base.mean_iou},
               {"fem", rf.to_json(false)},
               {"fem_view_mode", rfv.to_json(false)},
               {"no_fem", rp.to_json(false)},
               {"out_of_border_count", oob},
               {"fem_oob_iou", fem_oob},
               {"no_fem_oob_iou", plain_oob},
               {"fem_oob_acc_1_5_e85", subset_acc(rf, true)},
               {"no_fem_oob_acc_1_5_e85", subset_acc(rp, true)},
               {"fem_train_seconds", fem.seconds},
               {"no_fem_train_seconds", plain.seconds},
               {"fem_log", fem.log},
               {"no_fem_log", plain.log}};
  char buf[400];
  std::snprintf(buf, sizeof(buf),
                "top-1 IoU %.3f (>= 0.70), center baseline %.3f (need >= %.3f), out-of-border (n=%d) FEM %.3f vs "
                "no-FEM %.3f; train %.0fs + %.0fs",
                rf.mean_iou, base.mean_iou, base.mean_iou + 0.10, oob, fem_oob, plain_oob, fem.seconds, plain.seconds);
  r.detail = buf;
  out.fem_model = std::move(fem.model);
  return out;
}

// ---------------------------------------------------------------- multi-step

Result multistep_suite(const model::UnicModel& model, const SyntheticSet& set, json* extra) {
  Result r{"multi-step-trend"};
  const int steps = 3;
  std::vector<double> mean(steps, 0.0), crop_mean(steps, 0.0);
  int exits = 0, trajectories = 0, improved = 0, monotone_runs = 0;
  for (size_t i = 0; i < set.scenes.size() && trajectories < 100; ++i, ++trajectories) {
    const auto& sc = set.scenes[i];
    const auto& world = set.worlds.at(sc.image);
    const Box oracle_crop = sc.crop_world(sc.best_crop());
    const Box oracle_view =
        geom::derive_view(oracle_crop, sc.orientation, static_cast<double>(sc.width) / sc.height);
    advisor::AdvisorOptions opt;
    opt.max_steps = steps;
    const auto traj = advisor::run_multistep(model, world, sc.init_view_world(), sc.orientation, opt);
    // Converged trajectories keep their last view.
    double last = 0, last_crop = 0;
    for (int k = 0; k < steps; ++k) {
      if (k < static_cast<int>(traj.size())) {
        const auto& st = traj[k];
        last = geom::iou(geom::from_frame(st.rec.view, st.viewport), oracle_view);
        last_crop = geom::iou(geom::from_frame(st.rec.crop, st.viewport), oracle_crop);
        for (const Box& v : {st.viewport, st.next_viewport}) {
          const auto c = v.corners();
          exits += c.x1 < -1e-9 || c.y1 < -1e-9 || c.x2 > 1 + 1e-9 || c.y2 > 1 + 1e-9;
        }
      }
      mean[k] += last;
      crop_mean[k] += last_crop;
    }
    bool mono = true;
    for (size_t k = 1; k < traj.size(); ++k) mono = mono && traj[k].iou_to_previous >= traj[k - 1].iou_to_previous;
    monotone_runs += mono;
    // Oracle composition score of the first recommended view against the init view.
    const Box view_world = geom::from_frame(traj[0].rec.view, traj[0].viewport);
    improved += data::oracle_score(set.oracles[i], view_world) > data::oracle_score(set.oracles[i], sc.init_view_world());
  }
  for (double& m : mean) m /= trajectories;
  for (double& m : crop_mean) m /= trajectories;
  bool nondecreasing = true;
  for (int k = 1; k < steps; ++k) nondecreasing = nondecreasing && mean[k] >= mean[k - 1];
  r.pass = nondecreasing && exits == 0;
  r.metrics = {{"trajectories", trajectories}, {"mean_view_iou_by_step", mean}, {"mean_crop_iou_by_step", crop_mean},
               {"viewport_exits", exits}};
  (*extra)["recommend_beats_init_oracle_score"] = static_cast<double>(improved) / trajectories;
  (*extra)["step_iou_monotone_runs"] = static_cast<double>(monotone_runs) / trajectories;
  char buf[200];
  std::snprintf(buf, sizeof(buf), "mean view IoU to oracle by step %.4f -> %.4f -> %.4f over %d trajectories; %d viewport exits",
                mean[0], mean[1], mean[2], trajectories, exits);
  r.detail = buf;
  return r;
}

// ---------------------------------------------------------------- metrics

Result metrics_suite() {
  Result r{"metric-invariants"};
  std::mt19937_64 rng(106);
  std::uniform_real_distribution<double> c(0.1, 0.9), e(0.2, 1.0), u(0, 1), eps(0.3, 0.99);
  auto box = [&] { return Box{c(rng), c(rng), e(rng), e(rng)}; };
  long violations = 0;
  std::vector<data::Scene> scenes;
  std::vector<model::PredictionSet> preds, perfect;
  for (int t = 0; t < 1000; ++t) {
    data::Scene s;
    s.image = "r" + std::to_string(t);
    s.width = 640;
    s.height = 480;
    s.init_view = {320, 240, 640, 480};
    const int ng = 1 + static_cast<int>(u(rng) * 12);
    for (int i = 0; i < ng; ++i) s.crops.push_back({box(), 4.0 + u(rng)});
    model::PredictionSet p;
    for (int i = 0; i < 10; ++i) {
      p.boxes.push_back(box());
      p.confidences.push_back(u(rng));
    }
    std::vector<Box> gts;
    for (size_t i : data::score_order(s.crops)) gts.push_back(s.crops[i].box);
    std::vector<Box> ranked;
    for (size_t i : p.ranking()) ranked.push_back(p.boxes[i]);
    const double e1 = eps(rng), e2 = eps(rng);
    for (int k = 1; k <= 3; ++k) {
      for (int n = 1; n <= 10; ++n) {
        const bool lo = eval::acc_k_n(ranked, gts, k, n, std::min(e1, e2));
        const bool hi = eval::acc_k_n(ranked, gts, k, n, std::max(e1, e2));
        violations += hi && !lo;
        if (n > 1) violations += eval::acc_k_n(ranked, gts, k, n - 1, e1) && !eval::acc_k_n(ranked, gts, k, n, e1);
      }
    }
    model::PredictionSet best = p;
    best.boxes[0] = s.crops[s.best_crop()].box;
    best.confidences[0] = 2.0;
    perfect.push_back(best);
    preds.push_back(std::move(p));
    scenes.push_back(std::move(s));
  }
  bool reports_ok = true;
  for (auto mode : {eval::EvalMode::View, eval::EvalMode::Crop}) {
    const auto rep = eval::evaluate_predictions(scenes, preds, mode);
    reports_ok = reports_ok && rep.acc_1_5_e90 <= rep.acc_1_5_e85 && rep.acc_1_10_e90 <= rep.acc_1_10_e85 &&
                 rep.acc_1_5_e85 <= rep.acc_1_10_e85 && rep.acc_1_5_e90 <= rep.acc_1_10_e90;
  }
  const auto rp = eval::evaluate_predictions(scenes, perfect, eval::EvalMode::View);
  const bool perfect_ok = rp.acc_1_5_e90 == 100.0 && rp.acc_1_5_e85 == 100.0 && rp.acc_1_10_e90 == 100.0 &&
                          rp.acc_1_10_e85 == 100.0 && std::abs(rp.mean_iou - 1.0) <= 1e-12 && rp.mean_disp <= 1e-12;
  r.pass = violations == 0 && reports_ok && perfect_ok;
  r.metrics = {{"monotonicity_violations", violations}, {"perfect", rp.to_json(false)}};
  char buf[200];
  std::snprintf(buf, sizeof(buf), "%ld monotonicity violations over 1000 sets; perfect predictor Acc %.0f, IoU %.6f, Disp %.1e",
                violations, rp.acc_1_5_e90, rp.mean_iou, rp.mean_disp);
  r.detail = buf;
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  std::string config_path, work = "acceptance_work", report_path;
  std::set<std::string> only;
  app.add_option("--config", config_path, "Desk-scale training configuration")->required()->check(CLI::ExistingFile);
  app.add_option("--work", work, "Directory for checkpoints");
  app.add_option("--report", report_path, "JSON report path");
  app.add_option("--only", only, "Run only the named criteria");
  CLI11_PARSE(app, argc, argv);
  std::filesystem::create_directories(work);
  const auto cfg = train::load_train_config(config_path);
  auto wanted = [&](const std::string& n) { return only.empty() || only.count(n); };

  std::vector<Result> results;
  json extra = json::object();
  auto run = [&](Result r) {
    std::printf("%s %s: %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    std::fflush(stdout);
    results.push_back(std::move(r));
  };

  if (wanted("geometry")) run(geometry_suite());
  if (wanted("matching")) run(matching_suite());
  if (wanted("gradients")) run(gradient_suite());
  if (wanted("dataset")) run(dataset_suite());
  if (wanted("fem-contracts")) run(fem_suite());
  if (wanted("synthetic-end-to-end") || wanted("multi-step-trend")) {
    const SyntheticSet train_set = make_set(2001, 2000);
    const SyntheticSet test_set = make_set(3001, 200);
    EndToEnd e2e = end_to_end_suite(cfg, train_set, test_set, work);
    if (wanted("synthetic-end-to-end")) run(std::move(e2e.result));
    if (wanted("multi-step-trend")) run(multistep_suite(*e2e.fem_model, test_set, &extra));
  }
  if (wanted("metric-invariants")) run(metrics_suite());

  bool all = true;
  json rep = {{"config", train::format_train_config(cfg)}, {"criteria", json::array()}, {"diagnostics", extra}};
  for (const auto& r : results) {
    all = all && r.pass;
    rep["criteria"].push_back({{"name", r.name}, {"pass", r.pass}, {"detail", r.detail}, {"metrics", r.metrics}});
  }
  if (!report_path.empty()) std::ofstream(report_path) << rep.dump(2) << "\n";
  std::printf("%s %zu/%zu criteria passed\n", all ? "ALL PASS" : "SOME FAILED",
              static_cast<size_t>(std::count_if(results.begin(), results.end(), [](const Result& r) { return r.pass; })),
              results.size());
  return all ? 0 : 1;
}
