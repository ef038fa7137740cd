// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "dataset/synthetic.hpp"
#include "train/trainer.hpp"

using namespace unic;
using namespace unic::train;

namespace {

TrainConfig small_config() {
  TrainConfig c = parse_train_config(R"(
    model.input_h = 64
    model.input_w = 96
    model.dim = 32
    model.heads = 2
    model.ffn_dim = 64
    model.encoder_layers = 1
    model.decoder_layers = 1
    model.fem_blocks = 2
    model.num_anchors = 8
    epochs = 5
    batch_size = 8
    lr = 1e-3
    backbone_lr = 1e-3
    label_switch_epoch = 100
    lr_decay_epoch = 100
  )");
  return c;
}

std::vector<TrainSample> samples(const TrainConfig& cfg, int n, uint64_t seed) {
  std::vector<TrainSample> out;
  for (int i = 0; i < n; ++i) {
    const auto s = data::make_synthetic_scene(data::derive_seed(seed, i));
    out.push_back(make_train_sample(cfg.model, s.scene, s.world));
  }
  return out;
}

double grad_norm(const nn::ParamStore& ps) {
  double s = 0;
  for (const auto& [name, p] : ps.items()) {
    for (float g : p.grad().data) s += static_cast<double>(g) * g;
  }
  return s;
}

}  // namespace

TEST_CASE("config parsing") {
  const TrainConfig c = parse_train_config("# comment\nepochs = 7  # trailing\nextra_loss = kl\nmodel.use_fem = false\n");
  CHECK(c.epochs == 7);
  CHECK(c.loss.extra_type == ExtraLossType::Kl);
  CHECK_FALSE(c.model.use_fem);
  CHECK(c.lr == doctest::Approx(1e-4));
  CHECK(c.backbone_lr == doctest::Approx(1e-5));
  CHECK(c.label_switch_epoch == 30);
  CHECK(c.ema_decay == doctest::Approx(0.999));
  CHECK_THROWS_AS(parse_train_config("epochs = 0\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_train_config("learning_rate = 1\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_train_config("epochs = many\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_train_config("epochs\n"), std::invalid_argument);
  // Round trip through the formatter.
  const TrainConfig d = parse_train_config(format_train_config(c));
  CHECK(format_train_config(d) == format_train_config(c));
}

TEST_CASE("refinement samples frame the best crop") {
  TrainConfig cfg = small_config();
  cfg.refine_views = 3;
  cfg.refine_jitter = 0.15;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const auto sc = data::make_synthetic_scene(seed);
    const auto all = make_train_samples(cfg, sc.scene, sc.world, seed);
    REQUIRE(all.size() == 4);
    CHECK(all[0].init_view_world == sc.scene.init_view_world());
    const geom::Box best = sc.scene.crop_world(sc.scene.best_crop());
    for (size_t k = 1; k < all.size(); ++k) {
      const geom::Box v = all[k].init_view_world;
      const auto c = v.corners();
      CHECK(c.x1 >= -1e-9);
      CHECK(c.y1 >= -1e-9);
      CHECK(c.x2 <= 1 + 1e-9);
      CHECK(c.y2 <= 1 + 1e-9);
      CHECK(v.w * sc.scene.width == doctest::Approx(geom::camera_ratio(sc.scene.orientation) * v.h * sc.scene.height));
      REQUIRE(all[k].gts.size() == sc.scene.crops.size());
      const geom::Box back = geom::from_frame(all[k].gts[sc.scene.best_crop()], v);
      CHECK(back.x == doctest::Approx(best.x));
      CHECK(back.w == doctest::Approx(best.w));
      CHECK(geom::iou(v, best) > 0.4);
    }
    const auto again = make_train_samples(cfg, sc.scene, sc.world, seed);
    CHECK(again[2].init_view_world == all[2].init_view_world);
  }
  cfg.refine_views = -1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("first batch loss is reproducible per seed") {
  const TrainConfig cfg = small_config();
  const auto data = samples(cfg, 16, 1);
  Trainer a(cfg, data), b(cfg, data);
  a.run_epoch();
  b.run_epoch();
  CHECK(a.first_batch_loss() == b.first_batch_loss());
  CHECK(a.model().predict(a.model().prepare(data[0].region)).boxes ==
        b.model().predict(b.model().prepare(data[0].region)).boxes);
}

TEST_CASE("composition loss decreases on a small overfit set") {
  TrainConfig cfg = small_config();
  cfg.augment = false;
  Trainer t(cfg, samples(cfg, 64, 2));
  std::vector<double> comp;
  for (int e = 0; e < 5; ++e) comp.push_back(t.run_epoch().comp);
  for (int e = 1; e < 5; ++e) CHECK(comp[e] < comp[e - 1]);
}

TEST_CASE("teacher receives no gradient") {
  const TrainConfig cfg = small_config();
  const auto data = samples(cfg, 2, 3);
  model::UnicModel student(cfg.model);
  EmaTeacher teacher(student);
  std::mt19937_64 rng(1);
  for (LabelMode mode : {LabelMode::Quality, LabelMode::SelfDistill}) {
    const SampleLoss l = sample_loss(student, &teacher, data[0], cfg, mode, &rng, 1.0);
    CHECK(l.extra_cells > 0);
    CHECK(l.total == doctest::Approx(l.comp.total + cfg.loss.extra * l.extra));
  }
  CHECK(grad_norm(student.params()) > 0.0);
  CHECK(grad_norm(teacher.model().params()) == 0.0);
}

TEST_CASE("label switch only changes the targets") {
  const TrainConfig cfg = small_config();
  const auto data = samples(cfg, 1, 4);
  model::UnicModel student(cfg.model);
  EmaTeacher teacher(student);  // teacher equals the student
  const SampleLoss q = sample_loss(student, &teacher, data[0], cfg, LabelMode::Quality, nullptr, 0.0);
  const SampleLoss s = sample_loss(student, &teacher, data[0], cfg, LabelMode::SelfDistill, nullptr, 0.0);
  CHECK(s.comp.reg == q.comp.reg);
  CHECK(s.comp.iou == q.comp.iou);
  CHECK(s.extra == q.extra);
  CHECK(s.comp.focal == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(q.comp.focal > 0.0);
}

TEST_CASE("train writes a loadable checkpoint and an epoch log") {
  TrainConfig cfg = small_config();
  cfg.epochs = 2;
  cfg.label_switch_epoch = 1;
  cfg.lr_decay_epoch = 1;
  const auto path = std::filesystem::temp_directory_path() / "unic_test_trainer.ckpt";
  std::vector<EpochLog> logs;
  TrainHooks hooks;
  hooks.eval = [](const model::UnicModel&) { return nlohmann::json{{"ok", true}}; };
  hooks.on_epoch = [&](const EpochLog& l) { logs.push_back(l); };
  const model::UnicModel m = train::train(cfg, samples(cfg, 8, 5), hooks, path);
  REQUIRE(logs.size() == 2);
  CHECK(logs[0].label_mode == LabelMode::Quality);
  CHECK(logs[1].label_mode == LabelMode::SelfDistill);
  CHECK(logs[0].lr_scale == 1.0);
  CHECK(logs[1].lr_scale == doctest::Approx(0.1));
  const auto j = logs[1].to_json();
  for (const char* k : {"epoch", "L_comp", "L_reg", "L_IoU", "L_focal", "L_extra", "eval"}) CHECK(j.contains(k));
  const model::UnicModel back = model::UnicModel::load(path);
  const auto img = m.prepare(image::crop_resize(data::make_synthetic_scene(1).world, geom::Box::unit(), 96, 64));
  CHECK(back.predict(img).boxes == m.predict(img).boxes);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(Trainer(cfg, {}), std::invalid_argument);
}
