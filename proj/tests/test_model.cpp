#include <catch2/catch_amalgamated.hpp>

#include <chrono>

#include "oracles.hpp"
#include "tvnet/losses/losses.hpp"
#include "tvnet/model/tvnet.hpp"

using namespace tvnet;

namespace {

ModelConfig tiny_model() {
  ModelConfig cfg;
  cfg.backbone.channels = {4, 6, 8, 10, 12};
  cfg.backbone.blocks_per_stage = 1;
  cfg.c_out = 6;
  cfg.cascades = 1;
  cfg.channel_reduction = 4;
  return cfg;
}

Var random_feat(Shape s, Rng& rng, double scale = 1.0, bool requires_grad = false) {
  Tensor t(s);
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.normal(0.0, scale);
  return Var::leaf(std::move(t), requires_grad);
}

}  // namespace

TEST_CASE("extract_pyramid stride contract", "[model]") {
  ModelConfig cfg = tiny_model();
  TvNet model(cfg, 1);

  SECTION("352x352 input gives 176/88/44/22/11") {
    Tensor img = Tensor::zeros(Shape{1, 3, 352, 352});
    FeaturePyramid pyr = model.backbone().forward(Var::constant(img), false);
    int expect[5] = {176, 88, 44, 22, 11};
    for (int i = 1; i <= 5; ++i) {
      REQUIRE(pyr.f(i).shape().h == expect[i - 1]);
      REQUIRE(pyr.f(i).shape().w == expect[i - 1]);
      REQUIRE(pyr.f(i).shape().c == cfg.backbone.channels[static_cast<std::size_t>(i - 1)]);
    }
  }
  SECTION("64x64 toy input gives 32/16/8/4/2 and zero input stays finite") {
    Tensor img = Tensor::zeros(Shape{2, 3, 64, 64});
    FeaturePyramid pyr = model.backbone().forward(Var::constant(img), false);
    int expect[5] = {32, 16, 8, 4, 2};
    for (int i = 1; i <= 5; ++i) {
      REQUIRE(pyr.f(i).shape().h == expect[i - 1]);
      REQUIRE(pyr.f(i).value().all_finite());
    }
  }
  SECTION("inputs not divisible by 32 are rejected") {
    Tensor img = Tensor::zeros(Shape{1, 3, 96, 100});
    REQUIRE_THROWS_AS(model.backbone().forward(Var::constant(img), false),
                      std::invalid_argument);
    Tensor small = Tensor::zeros(Shape{1, 3, 32, 32});
    REQUIRE_THROWS_AS(model.backbone().forward(Var::constant(small), false),
                      std::invalid_argument);
  }
}

TEST_CASE("edge head shape and linearity", "[model]") {
  Rng rng(2);
  ParamStore store;
  EdgeHead head(store, rng, 6);
  Var f2 = random_feat(Shape{1, 6, 88, 88}, rng);
  Var logits = head.forward(f2);
  REQUIRE(logits.shape() == Shape{1, 1, 88, 88});
  REQUIRE(logits.value().all_finite());

  head.conv().weight().value_mut().fill(0.0);
  head.conv().bias().value_mut().fill(0.37);
  Var constant = head.forward(f2);
  for (std::int64_t i = 0; i < constant.value().numel(); ++i) {
    REQUIRE(constant.value()[i] == 0.37);
  }
}

TEST_CASE("hrf residual identity and attention boundedness", "[model]") {
  Rng rng(3);
  ParamStore store;
  HrfModule hrf(store, rng, "hrf3", 6, 8, 10, 7, 4);
  Var f2 = random_feat(Shape{2, 6, 16, 16}, rng);
  Var f3 = random_feat(Shape{2, 8, 8, 8}, rng);

  SECTION("shape contract") {
    Var out = hrf.forward(f2, f3, true);
    REQUIRE(out.shape() == Shape{2, 10, 8, 8});
  }
  SECTION("zeroed fusion conv reduces the fused feature to f_i exactly") {
    hrf.fuse_conv().zero_out();
    Var fused = hrf.fuse(f2, f3, true);
    REQUIRE(fused.shape() == f3.shape());
    for (std::int64_t i = 0; i < fused.value().numel(); ++i) {
      REQUIRE(fused.value()[i] == f3.value()[i]);  // 0 ulps
    }
  }
  SECTION("sigmoid gates shrink magnitudes elementwise") {
    Var fused = hrf.fuse(f2, f3, true);
    Var after_c = hrf.channel_gate().forward(fused);
    for (std::int64_t i = 0; i < fused.value().numel(); ++i) {
      REQUIRE(std::fabs(after_c.value()[i]) <= std::fabs(fused.value()[i]));
    }
    Var after_s = hrf.spatial_gate().forward(after_c);
    for (std::int64_t i = 0; i < fused.value().numel(); ++i) {
      REQUIRE(std::fabs(after_s.value()[i]) <= std::fabs(after_c.value()[i]));
    }
  }
}

TEST_CASE("hrf gradient check", "[model][gradcheck]") {
  Rng rng(4);
  ParamStore store;
  HrfModule hrf(store, rng, "hrf", 4, 5, 6, 7, 4);
  Var f2 = random_feat(Shape{1, 4, 8, 8}, rng, 1.0, true);
  Var f3 = random_feat(Shape{1, 5, 4, 4}, rng, 1.0, true);
  Tensor wt(Shape{1, 6, 4, 4});
  for (std::int64_t i = 0; i < wt.numel(); ++i) wt[i] = rng.normal();
  Var wt_v = Var::constant(wt);
  auto build = [&]() { return sum_all(mul(hrf.forward(f2, f3, true), wt_v)); };

  for (auto& p : store.params()) p.var.zero_grad();
  f2.zero_grad();
  f3.zero_grad();
  build().backward();
  auto f = [&]() { return build().item(); };
  double worst = 0.0;
  auto probe = [&](Var& v, int n_samples) {
    for (int s = 0; s < n_samples; ++s) {
      std::int64_t idx = rng.uniform_int(0, static_cast<int>(v.value().numel() - 1));
      worst = std::max(worst, oracle::rel_err(v.grad()[idx],
                                              oracle::numeric_grad(f, &v.value_mut()[idx])));
    }
  };
  probe(f2, 6);
  probe(f3, 6);
  for (auto& p : store.params()) probe(p.var, 2);
  REQUIRE(worst < 1e-3);
}

TEST_CASE("ncd emits coarse map at the deepest scale", "[model]") {
  Rng rng(5);
  ParamStore store;
  NcdDecoder ncd(store, rng, 6);

  SECTION("shape contract at full-resolution scale ratios") {
    Var f3 = random_feat(Shape{1, 6, 44, 44}, rng);
    Var f4 = random_feat(Shape{1, 6, 22, 22}, rng);
    Var f5 = random_feat(Shape{1, 6, 11, 11}, rng);
    Var p6 = ncd.forward(f3, f4, f5, true);
    REQUIRE(p6.shape() == Shape{1, 1, 11, 11});
  }
  SECTION("non-uniform channels are rejected") {
    Var f3 = random_feat(Shape{1, 5, 16, 16}, rng);
    Var f4 = random_feat(Shape{1, 6, 8, 8}, rng);
    Var f5 = random_feat(Shape{1, 6, 4, 4}, rng);
    REQUIRE_THROWS_AS(ncd.forward(f3, f4, f5, true), std::invalid_argument);
  }
  SECTION("constant features give a spatially constant interior") {
    Var f3 = Var::constant(Tensor::full(Shape{1, 6, 64, 64}, 0.6));
    Var f4 = Var::constant(Tensor::full(Shape{1, 6, 32, 32}, -0.2));
    Var f5 = Var::constant(Tensor::full(Shape{1, 6, 16, 16}, 0.9));
    Var p6 = ncd.forward(f3, f4, f5, true);
    REQUIRE(p6.shape() == Shape{1, 1, 16, 16});
    double center = p6.value().at(0, 0, 8, 8);
    for (int y = 4; y < 12; ++y)
      for (int x = 4; x < 12; ++x) {
        REQUIRE(p6.value().at(0, 0, y, x) == Catch::Approx(center).margin(1e-9));
      }
  }
}

TEST_CASE("ncd gradient check", "[model][gradcheck]") {
  Rng rng(6);
  ParamStore store;
  NcdDecoder ncd(store, rng, 4);
  Var f3 = random_feat(Shape{1, 4, 8, 8}, rng, 1.0, true);
  Var f4 = random_feat(Shape{1, 4, 4, 4}, rng, 1.0, true);
  Var f5 = random_feat(Shape{1, 4, 2, 2}, rng, 1.0, true);
  Tensor wt(Shape{1, 1, 2, 2});
  for (std::int64_t i = 0; i < wt.numel(); ++i) wt[i] = rng.normal();
  Var wt_v = Var::constant(wt);
  auto build = [&]() { return sum_all(mul(ncd.forward(f3, f4, f5, true), wt_v)); };

  for (auto& p : store.params()) p.var.zero_grad();
  for (Var* v : {&f3, &f4, &f5}) v->zero_grad();
  build().backward();
  auto f = [&]() { return build().item(); };
  double worst = 0.0;
  auto probe = [&](Var& v, int n_samples) {
    for (int s = 0; s < n_samples; ++s) {
      std::int64_t idx = rng.uniform_int(0, static_cast<int>(v.value().numel() - 1));
      worst = std::max(worst, oracle::rel_err(v.grad()[idx],
                                              oracle::numeric_grad(f, &v.value_mut()[idx])));
    }
  };
  probe(f3, 5);
  probe(f4, 5);
  probe(f5, 5);
  for (auto& p : store.params()) probe(p.var, 2);
  REQUIRE(worst < 1e-3);
}

TEST_CASE("region decomposition", "[model]") {
  SECTION("partition of unity and [0,1] bounds on random logits") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
      Var logits = random_feat(Shape{1, 1, 8, 8}, rng, 4.0);
      RegionMaps r = decompose_regions(logits);
      for (std::int64_t i = 0; i < logits.value().numel(); ++i) {
        double f1 = r.strong_fg.value()[i];
        double f2 = r.weak_fg.value()[i];
        double f3 = r.background.value()[i];
        REQUIRE(f1 >= 0.0);
        REQUIRE(f1 <= 1.0);
        REQUIRE(f2 >= 0.0);
        REQUIRE(f2 <= 1.0);
        REQUIRE(f3 >= 0.0);
        REQUIRE(f3 <= 1.0);
        REQUIRE(std::fabs(f1 + f2 + f3 - 1.0) < 1e-6);
      }
    }
  }
  SECTION("saturation cases produce the exact unit basis") {
    Tensor logits(Shape{1, 1, 1, 3});
    logits.at(0, 0, 0, 0) = -800.0;  // s = 0
    logits.at(0, 0, 0, 1) = 0.0;     // s = 1/2
    logits.at(0, 0, 0, 2) = 800.0;   // s = 1
    RegionMaps r = decompose_regions(Var::constant(logits));
    // s=0 -> background
    REQUIRE(r.strong_fg.value()[0] == 0.0);
    REQUIRE(r.weak_fg.value()[0] == 0.0);
    REQUIRE(r.background.value()[0] == 1.0);
    // s=1/2 -> weak foreground
    REQUIRE(r.strong_fg.value()[1] == 0.0);
    REQUIRE(r.weak_fg.value()[1] == 1.0);
    REQUIRE(r.background.value()[1] == 0.0);
    // s=1 -> strong foreground
    REQUIRE(r.strong_fg.value()[2] == 1.0);
    REQUIRE(r.weak_fg.value()[2] == 0.0);
    REQUIRE(r.background.value()[2] == 0.0);
  }
}

TEST_CASE("fba shapes, residual identity and gradient", "[model]") {
  Rng rng(8);
  ParamStore store;
  FbaModule fba(store, rng, "fba", 6, 2);

  SECTION("prediction is refined at the feature scale") {
    Var f = random_feat(Shape{1, 6, 44, 44}, rng);
    Var p_next = random_feat(Shape{1, 1, 22, 22}, rng);
    auto [feat, pred] = fba.forward(f, p_next, true);
    REQUIRE(feat.shape() == Shape{1, 6, 44, 44});
    REQUIRE(pred.shape() == Shape{1, 1, 44, 44});
  }
  SECTION("zero region maps with zeroed convs reduce aggregation to identity") {
    for (int j = 0; j < 3; ++j) fba.region_conv(0, j).zero_out();
    Var f = random_feat(Shape{1, 6, 8, 8}, rng);
    RegionMaps zero;
    zero.strong_fg = Var::constant(Tensor::zeros(Shape{1, 1, 8, 8}));
    zero.weak_fg = Var::constant(Tensor::zeros(Shape{1, 1, 8, 8}));
    zero.background = Var::constant(Tensor::zeros(Shape{1, 1, 8, 8}));
    Var out = fba.aggregate(f, zero, 0, true);
    for (std::int64_t i = 0; i < f.value().numel(); ++i) {
      REQUIRE(out.value()[i] == f.value()[i]);  // 0 ulps
    }
  }
  SECTION("gradient check through one full cascade") {
    ParamStore store1;
    FbaModule fba1(store1, rng, "fba", 4, 1);
    Var f = random_feat(Shape{1, 4, 6, 6}, rng, 1.0, true);
    Var p_next = random_feat(Shape{1, 1, 3, 3}, rng, 2.0, true);
    Tensor wt_f(Shape{1, 4, 6, 6}), wt_p(Shape{1, 1, 6, 6});
    for (std::int64_t i = 0; i < wt_f.numel(); ++i) wt_f[i] = rng.normal();
    for (std::int64_t i = 0; i < wt_p.numel(); ++i) wt_p[i] = rng.normal();
    Var wtf = Var::constant(wt_f), wtp = Var::constant(wt_p);
    auto build = [&]() {
      auto [feat, pred] = fba1.forward(f, p_next, true);
      return add(sum_all(mul(feat, wtf)), sum_all(mul(pred, wtp)));
    };
    for (auto& p : store1.params()) p.var.zero_grad();
    f.zero_grad();
    p_next.zero_grad();
    build().backward();
    auto fd = [&]() { return build().item(); };
    double worst = 0.0;
    auto probe = [&](Var& v, int n_samples) {
      for (int s = 0; s < n_samples; ++s) {
        std::int64_t idx = rng.uniform_int(0, static_cast<int>(v.value().numel() - 1));
        worst = std::max(worst, oracle::rel_err(v.grad()[idx],
                                                oracle::numeric_grad(fd, &v.value_mut()[idx])));
      }
    };
    probe(f, 6);
    probe(p_next, 6);
    for (auto& p : store1.params()) probe(p.var, 2);
    REQUIRE(worst < 1e-3);
  }
}

TEST_CASE("tvnet forward composition", "[model]") {
  ModelConfig cfg = tiny_model();
  cfg.cascades = 2;

  SECTION("352 input: P6/P5 at 11, P4 at 22, P3 at 44, final at 352") {
    TvNet model(cfg, 1);
    Tensor img(Shape{1, 3, 352, 352});
    Rng rng(9);
    for (std::int64_t i = 0; i < img.numel(); ++i) img[i] = rng.uniform();
    PredictionSet out = model.forward(img, false);
    REQUIRE(out.p6.shape() == Shape{1, 1, 11, 11});
    REQUIRE(out.p5.shape() == Shape{1, 1, 11, 11});
    REQUIRE(out.p4.shape() == Shape{1, 1, 22, 22});
    REQUIRE(out.p3.shape() == Shape{1, 1, 44, 44});
    REQUIRE(out.edge_logits.shape() == Shape{1, 1, 88, 88});
    REQUIRE(out.final_prob.shape() == Shape{1, 1, 352, 352});
    REQUIRE(out.final_prob.value().min() >= 0.0);
    REQUIRE(out.final_prob.value().max() <= 1.0);
  }
  SECTION("toy 64x64 forward+backward under a second") {
    TvNet model(cfg, 2);
    Tensor img(Shape{1, 3, 64, 64});
    Rng rng(10);
    for (std::int64_t i = 0; i < img.numel(); ++i) img[i] = rng.uniform();
    Tensor mask = Tensor::zeros(Shape{1, 1, 64, 64});
    for (int y = 20; y < 40; ++y)
      for (int x = 20; x < 40; ++x) mask.at(0, 0, y, x) = 1.0;
    Tensor edge = Tensor::zeros(Shape{1, 1, 64, 64});
    auto t0 = std::chrono::steady_clock::now();
    PredictionSet out = model.forward(img, true);
    auto [loss, bd] = total_loss(out, mask, edge);
    model.params().zero_grads();
    loss.backward();
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    REQUIRE(secs < 1.0);
    REQUIRE(std::isfinite(bd.total));
  }
  SECTION("deterministic: identical forwards are bitwise identical") {
    TvNet model(cfg, 3);
    Tensor img(Shape{1, 3, 64, 64});
    Rng rng(11);
    for (std::int64_t i = 0; i < img.numel(); ++i) img[i] = rng.uniform();
    PredictionSet a = model.forward(img, false);
    PredictionSet b = model.forward(img, false);
    for (std::int64_t i = 0; i < a.final_prob.value().numel(); ++i) {
      REQUIRE(a.final_prob.value()[i] == b.final_prob.value()[i]);
    }
  }
}

TEST_CASE("ablation flags assemble the advertised variants", "[model]") {
  ModelConfig full = tiny_model();
  ModelConfig row_d = tiny_model();
  row_d.use_hrf = true;
  row_d.use_fba = true;
  REQUIRE(full.use_hrf == row_d.use_hrf);
  REQUIRE(full.use_fba == row_d.use_fba);

  ModelConfig base = tiny_model();
  base.use_hrf = false;
  base.use_fba = false;
  TvNet baseline(base, 1);
  Tensor img = Tensor::zeros(Shape{1, 3, 64, 64});
  PredictionSet out = baseline.forward(img, false);
  REQUIRE(out.p6.defined());
  REQUIRE_FALSE(out.p5.defined());
  REQUIRE_FALSE(out.p3.defined());
  REQUIRE_FALSE(out.edge_logits.defined());
  REQUIRE(out.final_prob.shape() == Shape{1, 1, 64, 64});

  auto counts_full = TvNet(tiny_model(), 1).params().counts_by_module();
  auto counts_base = baseline.params().counts_by_module();
  REQUIRE(counts_full.count("hrf3") == 1);
  REQUIRE(counts_base.count("hrf3") == 0);
  REQUIRE(counts_base.count("proj3") == 1);
  REQUIRE(counts_full.at("backbone") == counts_base.at("backbone"));
  REQUIRE(counts_full.at("ncd") == counts_base.at("ncd"));
}
