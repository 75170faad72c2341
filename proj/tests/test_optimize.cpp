#include <cmath>
#include <random>

#include "doctest.h"
#include "mirrorpose/optimize.hpp"
#include "oracles.hpp"

using namespace mirrorpose;

TEST_SUITE("optimize") {

TEST_CASE("param vector segments and coordinate names") {
  ParamVector p;
  p.append("translation", {1.0, 2.0, 3.0});
  p.append("scale", {0.5});
  CHECK(p.size() == 4);
  CHECK(p.find("scale").offset == 3);
  CHECK(p.seg("translation")[1] == 2.0);
  CHECK(p.coord_name(1) == "translation[1]");
  CHECK(p.coord_name(3) == "scale[0]");
  CHECK_THROWS_AS(p.find("latent"), std::invalid_argument);
  ParamVector z = p.zeros_like();
  CHECK(z.size() == 4);
  for (double v : z.x) CHECK(v == 0.0);
  CHECK(z.coord_name(3) == "scale[0]");
}

TEST_CASE("adam first step is bias-corrected") {
  // f(x) = x^2 at x = 1: g = 2, mhat = g, vhat = g^2, step = lr * g / |g|
  FitConfig cfg;
  cfg.lr = 0.1;
  ParamVector p;
  p.append("x", {1.0});
  ParamVector g = p.zeros_like();
  g.x[0] = 2.0;
  AdamState st;
  adam_step(st, p, g, cfg);
  CHECK(p.x[0] == doctest::Approx(0.9).epsilon(1e-7));
  CHECK(st.t == 1);
}

TEST_CASE("adam leaves parameters alone on zero gradient") {
  FitConfig cfg;
  ParamVector p;
  p.append("x", {1.0, -2.0});
  AdamState st;
  adam_step(st, p, p.zeros_like(), cfg);
  CHECK(p.x[0] == 1.0);
  CHECK(p.x[1] == -2.0);
}

TEST_CASE("adam rejects non-finite gradients by name") {
  FitConfig cfg;
  ParamVector p;
  p.append("translation", {0.0, 0.0, 0.0});
  p.append("pose", {0.0, 0.0});
  ParamVector g = p.zeros_like();
  g.x[4] = std::nan("");
  AdamState st;
  CHECK_THROWS_WITH_AS(adam_step(st, p, g, cfg),
                       doctest::Contains("pose[1]"), std::runtime_error);
  ParamVector short_g;
  short_g.append("x", {0.0});
  CHECK_THROWS_AS(adam_step(st, p, short_g, cfg), std::invalid_argument);
}

TEST_CASE("adam trajectories are bit-identical across runs") {
  FitConfig cfg;
  auto run = [&]() {
    ParamVector p;
    p.append("x", {1.3, -0.7, 0.2});
    AdamState st;
    for (int it = 0; it < 50; ++it) {
      ParamVector g = p.zeros_like();
      for (int i = 0; i < 3; ++i) g.x[i] = 2.0 * p.x[i] + 0.3 * std::sin(p.x[(i + 1) % 3]);
      adam_step(st, p, g, cfg);
    }
    return p.x;
  };
  std::vector<double> a = run(), b = run();
  for (int i = 0; i < 3; ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("sigma schedule halves stepwise and clamps at the floor") {
  FitConfig cfg;
  cfg.sigma0 = 1e-2;
  cfg.sigma_floor = 1e-5;
  cfg.sigma_anneal_every = 100;
  cfg.sigma_anneal_factor = 0.5;
  CHECK(cfg.sigma_at(0) == 1e-2);
  CHECK(cfg.sigma_at(99) == 1e-2);
  CHECK(cfg.sigma_at(100) == doctest::Approx(5e-3).epsilon(1e-12));
  CHECK(cfg.sigma_at(250) == doctest::Approx(1.25e-3).epsilon(1e-12));
  CHECK(cfg.sigma_at(100000) == 1e-5);
}

TEST_CASE("config validation rejects bad schedules") {
  FitConfig cfg;
  cfg.validate();
  cfg.sigma_floor = 2e-2;  // above sigma0
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = FitConfig{};
  cfg.lr = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = FitConfig{};
  cfg.depth_cap = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("silhouette loss is one minus soft overlap") {
  SoftImage obs(4, 1);
  obs.values = {1, 1, 0, 0};
  SoftImage perfect(4, 1);
  perfect.values = {1, 1, 0, 0};
  CHECK(loss_silhouette(perfect, obs) == doctest::Approx(0.0).epsilon(1e-15));
  SoftImage disjoint(4, 1);
  disjoint.values = {0, 0, 1, 1};
  CHECK(loss_silhouette(disjoint, obs) == doctest::Approx(1.0).epsilon(1e-15));
  // half-intensity everywhere: inter = 1, union = 3
  SoftImage half(4, 1);
  half.values = {0.5, 0.5, 0.5, 0.5};
  CHECK(loss_silhouette(half, obs) == doctest::Approx(1.0 - 1.0 / 3.0).epsilon(1e-12));
  SoftImage wrongdims(2, 2);
  wrongdims.values = {1, 1, 0, 0};
  CHECK_THROWS_AS(loss_silhouette(wrongdims, obs), std::invalid_argument);
}

TEST_CASE("empty union returns full loss with zero gradient") {
  std::vector<double> rendered(8, 0.0), observed(8, 0.0), d;
  CHECK(loss_silhouette_sampled(rendered, observed, &d) == 1.0);
  for (double v : d) CHECK(v == 0.0);
}

TEST_CASE("sampled silhouette gradient matches finite differences") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  std::bernoulli_distribution coin(0.4);
  std::vector<double> rendered(32), observed(32);
  for (size_t i = 0; i < rendered.size(); ++i) {
    rendered[i] = u(rng);
    observed[i] = coin(rng) ? 1.0 : 0.0;
  }
  std::vector<double> d;
  loss_silhouette_sampled(rendered, observed, &d);
  double h = 1e-7;
  for (size_t i = 0; i < rendered.size(); i += 5) {
    std::vector<double> plus = rendered, minus = rendered;
    plus[i] += h;
    minus[i] -= h;
    double num = (loss_silhouette_sampled(plus, observed, nullptr) -
                  loss_silhouette_sampled(minus, observed, nullptr)) / (2 * h);
    CHECK(oracles::rel_err(d[i], num) < 1e-6);
  }
}

TEST_CASE("hard IoU counts thresholded pixels") {
  SoftImage a(4, 1), b(4, 1);
  a.values = {0.9, 0.6, 0.4, 0.1};
  b.values = {1, 0, 1, 0};
  // rendered >= 0.5 at {0, 1}, observed at {0, 2}: inter 1, union 3
  CHECK(iou_hard(a, b) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(iou_hard(a, b, 0.05) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("keypoint metric normalizes by the reference bounding box") {
  std::vector<Vec3> ref = {{0, 0, 0}, {1, 0, 0}, {1, 2, 0}, {0, 2, 2}};
  MetricReport same = keypoint_metric(ref, ref);
  CHECK(same.mean_err == 0.0);
  CHECK(same.mean_norm_err == 0.0);
  CHECK(same.norm_const == doctest::Approx(3.0).epsilon(1e-12));  // diag of 1 x 2 x 2 box
  std::vector<Vec3> pred = ref;
  pred[2] += Vec3{0, 0, 1.5};
  MetricReport rep = keypoint_metric(pred, ref);
  REQUIRE(rep.per_joint.size() == 4);
  CHECK(rep.per_joint[2] == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(rep.mean_err == doctest::Approx(1.5 / 4).epsilon(1e-12));
  CHECK(rep.mean_norm_err == doctest::Approx(1.5 / 4 / 3.0).epsilon(1e-12));
  std::vector<Vec3> shorter(ref.begin(), ref.end() - 1);
  CHECK_THROWS_AS(keypoint_metric(shorter, ref), std::invalid_argument);
}

TEST_CASE("gradient audit accepts exact gradients and flags wrong ones") {
  DiffLoss quad;
  quad.value = [](const ParamVector& p) {
    double s = 0;
    for (double v : p.x) s += v * v;
    return s;
  };
  quad.gradient = [](const ParamVector& p) {
    ParamVector g = p.zeros_like();
    for (int i = 0; i < p.size(); ++i) g.x[i] = 2.0 * p.x[i];
    return g;
  };
  ParamVector at;
  at.append("translation", {0.3, -1.2, 0.8});
  GradReport ok = gradcheck(quad, at, 1e-5, 1e-6);
  CHECK(ok.pass);
  CHECK(ok.max_rel_err < 1e-8);

  DiffLoss broken = quad;
  broken.gradient = [](const ParamVector& p) {
    ParamVector g = p.zeros_like();
    for (int i = 0; i < p.size(); ++i) g.x[i] = 2.0 * p.x[i];
    g.x[1] += 0.5;  // corrupt one coordinate
    return g;
  };
  GradReport bad = gradcheck(broken, at, 1e-5, 1e-6);
  CHECK(!bad.pass);
  CHECK(bad.worst == 1);
  CHECK(bad.entries[bad.worst].name == "translation[1]");
  CHECK_THROWS_AS(gradcheck(quad, at, 0.0, 1e-6), std::invalid_argument);
}

}  // TEST_SUITE
