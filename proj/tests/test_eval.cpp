// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "dataset/synthetic.hpp"
#include "eval/metrics.hpp"

using namespace unic;
using namespace unic::eval;
using geom::Box;

namespace {

Box random_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> c(0.2, 0.8), e(0.3, 1.0);
  return {c(rng), c(rng), e(rng), e(rng)};
}

data::Scene random_scene(std::mt19937_64& rng) {
  data::Scene s;
  s.image = "x.png";
  s.width = 640;
  s.height = 480;
  s.init_view = {320, 240, 640, 480};
  std::uniform_int_distribution<int> n(1, 12);
  std::uniform_real_distribution<double> score(4.0, 5.0);
  const int k = n(rng);
  for (int i = 0; i < k; ++i) s.crops.push_back({random_box(rng), score(rng)});
  return s;
}

model::PredictionSet random_preds(std::mt19937_64& rng, int n = 8) {
  model::PredictionSet p;
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < n; ++i) {
    p.boxes.push_back(random_box(rng));
    p.confidences.push_back(u(rng));
  }
  return p;
}

}  // namespace

TEST_CASE("acc examples") {
  const std::vector<Box> gts{{0.5, 0.5, 0.6, 0.6}, {0.4, 0.4, 0.5, 0.5}};
  CHECK(acc_k_n({gts[0]}, gts, 1, 5, 0.90));
  CHECK(acc_k_n({gts[0]}, gts, 1, 5, 0.85));
  // IoU 0.87 against the second gt: shrink the width by 13%.
  const Box straddle{0.4, 0.4, 0.5 * 0.87, 0.5};
  REQUIRE(geom::iou(straddle, gts[1]) == doctest::Approx(0.87));
  CHECK_FALSE(acc_k_n({straddle}, gts, 1, 5, 0.90));
  CHECK(acc_k_n({straddle}, gts, 1, 5, 0.85));
  CHECK_FALSE(acc_k_n({straddle}, gts, 1, 1, 0.85));
  CHECK_FALSE(acc_k_n({{0.05, 0.05, 0.05, 0.05}}, gts, 1, 5, 0.5));
  CHECK_THROWS_AS(acc_k_n({gts[0]}, gts, 0, 5, 0.9), std::invalid_argument);
  CHECK_THROWS_AS(acc_k_n({gts[0]}, gts, 2, 5, 0.9), std::invalid_argument);
  CHECK_THROWS_AS(acc_k_n({gts[0]}, {}, 1, 5, 0.9), std::invalid_argument);
}

TEST_CASE("acc is monotone in threshold and N") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> eps(0.3, 0.95);
  for (int t = 0; t < 1000; ++t) {
    const auto p = random_preds(rng);
    std::vector<Box> gts;
    for (int i = 0; i < 10; ++i) gts.push_back(random_box(rng));
    const double e1 = eps(rng), e2 = eps(rng);
    const double lo = std::min(e1, e2), hi = std::max(e1, e2);
    for (int n = 1; n <= 10; ++n) {
      REQUIRE(acc_k_n(p.boxes, gts, 1, n, hi) <= acc_k_n(p.boxes, gts, 1, n, lo));
      if (n > 1) REQUIRE(acc_k_n(p.boxes, gts, 1, n - 1, lo) <= acc_k_n(p.boxes, gts, 1, n, lo));
    }
  }
}

TEST_CASE("report invariants on random sets") {
  std::mt19937_64 rng(42);
  std::vector<data::Scene> scenes;
  std::vector<model::PredictionSet> preds;
  for (int i = 0; i < 300; ++i) {
    scenes.push_back(random_scene(rng));
    preds.push_back(random_preds(rng));
  }
  for (EvalMode m : {EvalMode::View, EvalMode::Crop}) {
    const MetricsReport r = evaluate_predictions(scenes, preds, m);
    CHECK(r.acc_1_5_e90 <= r.acc_1_5_e85);
    CHECK(r.acc_1_10_e90 <= r.acc_1_10_e85);
    CHECK(r.acc_1_5_e85 <= r.acc_1_10_e85);
    CHECK(r.acc_1_5_e90 <= r.acc_1_10_e90);
    CHECK(r.acc_1_10_e85 <= 100.0);
    CHECK(r.acc_1_5_e90 >= 0.0);
    CHECK(r.mean_iou >= 0.0);
    CHECK(r.mean_iou <= 1.0);
  }
  // Means do not depend on dataset order.
  std::vector<size_t> idx(scenes.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<data::Scene> s2;
  std::vector<model::PredictionSet> p2;
  for (size_t i : idx) {
    s2.push_back(scenes[i]);
    p2.push_back(preds[i]);
  }
  const auto a = evaluate_predictions(scenes, preds, EvalMode::View);
  const auto b = evaluate_predictions(s2, p2, EvalMode::View);
  CHECK(a.mean_iou == doctest::Approx(b.mean_iou).epsilon(1e-12));
  CHECK(a.acc_1_5_e85 == doctest::Approx(b.acc_1_5_e85).epsilon(1e-12));
}

TEST_CASE("perfect predictor") {
  std::mt19937_64 rng(43);
  std::vector<data::Scene> scenes;
  std::vector<model::PredictionSet> preds;
  for (int i = 0; i < 100; ++i) {
    scenes.push_back(random_scene(rng));
    model::PredictionSet p = random_preds(rng);
    p.boxes[3] = scenes.back().crops[scenes.back().best_crop()].box;
    p.confidences[3] = 2.0;
    preds.push_back(p);
  }
  for (EvalMode m : {EvalMode::View, EvalMode::Crop}) {
    const MetricsReport r = evaluate_predictions(scenes, preds, m);
    CHECK(r.acc_1_5_e90 == 100.0);
    CHECK(r.acc_1_10_e85 == 100.0);
    CHECK(r.mean_iou == doctest::Approx(1.0));
    CHECK(r.mean_disp == doctest::Approx(0.0));
  }
}

TEST_CASE("random boxes score below the centered box") {
  std::vector<data::Scene> scenes;
  for (uint64_t s = 0; s < 500; ++s) scenes.push_back(data::make_synthetic_scene(7000 + s).scene);
  std::mt19937_64 rng(44);
  std::uniform_real_distribution<double> c(0, 1), e(0.1, 1.5);
  std::vector<model::PredictionSet> random, center;
  for (size_t i = 0; i < scenes.size(); ++i) {
    random.push_back({{{c(rng), c(rng), e(rng), e(rng)}}, {1.0}});
    center.push_back({{Box::unit()}, {1.0}});
  }
  for (EvalMode m : {EvalMode::View, EvalMode::Crop}) {
    CHECK(evaluate_predictions(scenes, random, m).mean_iou < evaluate_predictions(scenes, center, m).mean_iou);
  }
}

TEST_CASE("evaluation errors") {
  std::mt19937_64 rng(45);
  CHECK_THROWS_AS(evaluate_predictions({}, {}, EvalMode::View), std::invalid_argument);
  CHECK_THROWS_AS(evaluate_predictions({random_scene(rng)}, {}, EvalMode::View), std::invalid_argument);
  CHECK_THROWS_AS(parse_eval_mode("bounded"), std::invalid_argument);
}

TEST_CASE("report json") {
  std::mt19937_64 rng(46);
  const auto r = evaluate_predictions({random_scene(rng)}, {random_preds(rng)}, EvalMode::Crop);
  const auto j = r.to_json();
  CHECK(j.at("mode") == "crop");
  CHECK(j.at("per_image").size() == 1);
  CHECK_FALSE(r.to_json(false).contains("per_image"));
}
