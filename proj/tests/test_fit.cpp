#include <cmath>

#include "doctest.h"
#include "mirrorpose/scene.hpp"
#include "oracles.hpp"

using namespace mirrorpose;

namespace {

// Renders depth (kInf misses) and a binary coverage mask of one shape.
void render_direct_obs(const Camera& cam, const RenderConfig& rc, const SdfShape& shape,
                       DepthMap& depth, SoftImage& mask) {
  depth = DepthMap(cam.width, cam.height);
  mask = SoftImage(cam.width, cam.height);
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      SdfHit h = sphere_trace(shape, camera_ray(cam, x, y), rc.sphere_steps, rc.trace_eps, rc.t_max);
      size_t i = static_cast<size_t>(y) * cam.width + x;
      depth.values[i] = h.converged ? h.depth : kInf;
      mask.values[i] = h.converged ? 1.0 : 0.0;
    }
}

Scene one_object_scene(const SdfShape& observed_shape, const SdfShape& fitted_shape,
                       bool optimize_shape, bool with_depth) {
  Scene s;
  s.camera = Camera(30, 30, 12, 12, 24, 24, Se3Scale());
  s.render.sphere_steps = 256;
  s.render.trace_eps = 1e-9;
  s.render.t_max = 5.0;
  DepthMap depth;
  SoftImage mask;
  render_direct_obs(s.camera, s.render, observed_shape, depth, mask);
  if (with_depth) {
    s.obs.depth = depth;
    s.obs.has_depth = true;
  } else {
    s.obs.depth = DepthMap(24, 24);
    for (double& v : s.obs.depth.values) v = kInf;
  }
  SceneObject o;
  o.shape = fitted_shape;
  o.optimize_pose = true;
  o.optimize_shape = optimize_shape;
  s.objects.push_back(o);
  s.obs.masks = {mask};
  s.obs.has_mask = {1};
  return s;
}

ParamVector grad_buffer(const SceneObject& o) {
  ParamVector g;
  g.append("translation", {0, 0, 0});
  g.append("rotation", {0, 0, 0});
  g.append("scale", {0.0});
  if (o.optimize_shape) {
    std::vector<double> z(o.shape.latent.size(), 0.0);
    g.append("latent", z.data(), static_cast<int>(z.size()));
  }
  return g;
}

struct LossProbe {
  Scene* scene;
  FitConfig cfg;
  std::vector<double> other_depth;
  std::vector<double> latent_ref;
  int n_depth_obs;
  double mask_sigma;

  double value() const {
    return object_fit_loss(scene->objects[0], 0, *scene, cfg, other_depth, latent_ref,
                           n_depth_obs, mask_sigma, nullptr)
        .total;
  }
};

// Central differences over placement and latent, against one analytic grad.
void check_object_grads(LossProbe& probe, double h, double tol) {
  SceneObject& o = probe.scene->objects[0];
  ParamVector g = grad_buffer(o);
  object_fit_loss(o, 0, *probe.scene, probe.cfg, probe.other_depth, probe.latent_ref,
                  probe.n_depth_obs, probe.mask_sigma, &g);
  SdfShape saved = o.shape;
  auto run_pair = [&](auto&& mutate, double analytic, const std::string& what) {
    o.shape = saved;
    mutate(+h);
    double fp = probe.value();
    o.shape = saved;
    mutate(-h);
    double fm = probe.value();
    o.shape = saved;
    double numeric = (fp - fm) / (2 * h);
    double err = std::abs(analytic - numeric);
    double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    INFO(what << ": analytic " << analytic << " numeric " << numeric);
    CHECK(err <= tol * scale);
  };
  for (int k = 0; k < 3; ++k)
    run_pair([&](double d) { o.shape.placement.translation[k] += d; }, g.seg("translation")[k],
             "translation[" + std::to_string(k) + "]");
  for (int k = 0; k < 3; ++k)
    run_pair(
        [&](double d) {
          Vec3 aa{0, 0, 0};
          aa[k] = d;
          o.shape.placement.rotation =
              (Quat::from_axis_angle(aa) * saved.placement.rotation).normalized();
        },
        g.seg("rotation")[k], "rotation[" + std::to_string(k) + "]");
  run_pair([&](double d) { o.shape.placement.scale += d; }, g.seg("scale")[0], "scale");
  if (o.optimize_shape)
    for (size_t k = 0; k < o.shape.latent.size(); ++k)
      run_pair([&](double d) { o.shape.latent[k] += d; }, g.seg("latent")[k],
               "latent[" + std::to_string(k) + "]");
}

}  // namespace

TEST_SUITE("fit") {

TEST_CASE("object loss gradient, depth path") {
  // ellipsoid covers the full frame: no silhouette edge, so the depth term
  // dominates and every ray converges under finite differences
  Se3Scale gt(Quat::from_axis_angle({0.2, -0.1, 0.3}), {0.02, -0.03, 0.7}, 1.1);
  SdfShape observed = make_ellipsoid({0.5, 0.4, 0.45}, gt);
  SdfShape fitted = observed;
  fitted.placement.translation += Vec3{0.002, -0.001, 0.003};
  fitted.placement.rotation =
      (Quat::from_axis_angle({0.004, -0.002, 0.003}) * gt.rotation).normalized();
  fitted.placement.scale = 1.08;
  fitted.latent = {0.498, 0.403, 0.447};
  Scene s = one_object_scene(observed, fitted, true, true);
  LossProbe probe{&s, FitConfig{}, std::vector<double>(24 * 24, kInf), observed.latent, 0, 5e-3};
  for (double d : s.obs.depth.values)
    if (std::isfinite(d)) ++probe.n_depth_obs;
  REQUIRE(probe.n_depth_obs == 24 * 24);
  check_object_grads(probe, 1e-5, 2e-3);
}

TEST_CASE("object loss gradient, mask path") {
  // sphere well inside the frame, no depth observations: only the soft
  // coverage term and the latent prior are active
  SdfShape observed = make_sphere(0.22, Se3Scale(Quat(), {0.03, -0.02, 0.7}, 1.0));
  SdfShape fitted = observed;
  fitted.placement.translation += Vec3{0.006, -0.004, 0.008};
  fitted.placement.scale = 0.97;
  fitted.latent = {0.215};
  Scene s = one_object_scene(observed, fitted, true, false);
  LossProbe probe{&s, FitConfig{}, std::vector<double>(24 * 24, kInf), observed.latent, 0, 5e-3};
  double base = probe.value();
  CHECK(base > 0.0);
  check_object_grads(probe, 1e-4, 1e-2);
}

TEST_CASE("object loss vanishes on the depth term at the truth") {
  SdfShape observed = make_sphere(0.22, Se3Scale(Quat(), {0.03, -0.02, 0.7}, 1.0));
  Scene s = one_object_scene(observed, observed, false, true);
  LossProbe probe{&s, FitConfig{}, std::vector<double>(24 * 24, kInf), observed.latent, 0, 5e-3};
  for (double d : s.obs.depth.values)
    if (std::isfinite(d)) ++probe.n_depth_obs;
  REQUIRE(probe.n_depth_obs > 50);
  LossBreakdown lb = object_fit_loss(s.objects[0], 0, s, probe.cfg, probe.other_depth,
                                     probe.latent_ref, probe.n_depth_obs, probe.mask_sigma,
                                     nullptr);
  // rendered depth replays the observation render exactly
  CHECK(lb.depth == 0.0);
  // the soft mask cannot match a hard mask on edge pixels, but the residue is
  // a few boundary pixels wide at most
  CHECK(lb.mask < 2e-2);
  CHECK(lb.prior == 0.0);

  // moving away costs loss
  Scene moved = s;
  moved.objects[0].shape.placement.translation += Vec3{0.02, 0, 0};
  LossProbe probe2{&moved, probe.cfg, probe.other_depth, probe.latent_ref,
                   probe.n_depth_obs, probe.mask_sigma};
  CHECK(probe2.value() > lb.total + 1e-4);
}

TEST_CASE("object fitting is deterministic") {
  SdfShape observed = make_sphere(0.22, Se3Scale(Quat(), {0.03, -0.02, 0.7}, 1.0));
  SdfShape start = observed;
  start.placement.translation += Vec3{0.02, -0.015, 0.03};
  Scene base = one_object_scene(observed, start, false, true);
  base.objects[0].init.extent = {0.01, 0.01, 0.01};
  base.fit = FitConfig{};
  base.fit.iters_object = 30;
  base.fit.restarts_object = 2;
  base.fit.seed = 11;

  auto run = [&]() {
    Scene s = base;
    std::vector<FitResult> res = fit_object(s, s.fit);
    REQUIRE(res.size() == 1);
    return std::make_pair(s.objects[0].shape.placement, res[0]);
  };
  auto [p1, r1] = run();
  auto [p2, r2] = run();
  for (int k = 0; k < 3; ++k) CHECK(p1.translation[k] == p2.translation[k]);
  CHECK(p1.scale == p2.scale);
  CHECK(p1.rotation.w == p2.rotation.w);
  CHECK(r1.best_restart == r2.best_restart);
  REQUIRE(r1.trace.size() == r2.trace.size());
  for (size_t i = 0; i < r1.trace.size(); ++i)
    for (int c = 0; c < 6; ++c) CHECK(r1.trace[i][c] == r2.trace[i][c]);
  // the fit made progress from the perturbed start
  CHECK(r1.trace.back()[1] <= r1.trace.front()[1]);
  CHECK(r1.any_restart_finished);
}

TEST_CASE("object fitting validates its observations") {
  SdfShape shape = make_sphere(0.22, Se3Scale(Quat(), {0, 0, 0.7}, 1.0));
  Scene s = one_object_scene(shape, shape, false, false);
  s.obs.has_depth = false;
  FitConfig cfg;
  CHECK_THROWS_WITH_AS(fit_object(s, cfg), doctest::Contains("no depth observation"),
                       std::invalid_argument);
  Scene s2 = one_object_scene(shape, shape, false, true);
  s2.obs.has_mask = {0};
  CHECK_THROWS_WITH_AS(fit_object(s2, cfg), doctest::Contains("has no mask observation"),
                       std::invalid_argument);
}

TEST_CASE("reflection fitting validates its inputs") {
  FitConfig cfg;
  Scene s;
  s.camera = Camera(30, 30, 12, 12, 24, 24, Se3Scale());
  CHECK_THROWS_WITH_AS(fit_human(s, cfg), doctest::Contains("scene has no emitter"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(eval_human(s, cfg, nullptr), doctest::Contains("scene has no emitter"),
                       std::invalid_argument);

  SceneEmitter e;
  e.model.skeleton = default17_skeleton();
  e.model.pose.assign(48, 0.0);
  e.model.placement = Se3Scale(Quat(), {0.1, 0, 0.4}, 0.3);
  s.emitter = e;
  CHECK_THROWS_WITH_AS(fit_human(s, cfg), doctest::Contains("no silhouette observation"),
                       std::invalid_argument);

  s.obs.silhouette = SoftImage(24, 24);
  s.obs.has_silhouette = true;
  CHECK_THROWS_WITH_AS(fit_human(s, cfg), doctest::Contains("no mirror objects"),
                       std::invalid_argument);

  SceneObject o;
  o.shape = make_rounded_box({0.5, 0.5, 0.01}, 0.003, Se3Scale(Quat(), {0, 0, 0.9}, 1.0));
  s.objects.push_back(o);
  s.obs.silhouette = SoftImage(16, 24);
  CHECK_THROWS_WITH_AS(fit_human(s, cfg), doctest::Contains("dims differ from camera"),
                       std::invalid_argument);

  s.obs.silhouette = SoftImage(24, 24);
  s.obs.silhouette.values[5] = 0.4;
  CHECK_THROWS_WITH_AS(fit_human(s, cfg), doctest::Contains("must be binary"),
                       std::invalid_argument);
}

}  // TEST_SUITE
