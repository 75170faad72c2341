#include <cmath>
#include <filesystem>
#include <random>

#include "mirrorpose/scene.hpp"

namespace mirrorpose {

namespace {

uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Quat random_rotation_within(std::mt19937_64& rng, double max_angle) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec3 axis{g(rng), g(rng), g(rng)};
  double n = norm(axis);
  if (n < 1e-9) axis = {1, 0, 0}, n = 1;
  std::uniform_real_distribution<double> u(0.0, max_angle);
  return Quat::from_axis_angle(axis * (u(rng) / n));
}

Vec3 random_in_box(std::mt19937_64& rng, const Vec3& half) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return {u(rng) * half.x, u(rng) * half.y, u(rng) * half.z};
}

// Sample an analytic shape's local field onto grid nodes.
SdfShape grid_from_shape(const SdfShape& analytic, int n, const Vec3& bmin, const Vec3& bmax,
                         const Se3Scale& placement) {
  SdfShape local = analytic;
  local.placement = Se3Scale();  // sample in the shape frame
  std::vector<double> values(static_cast<size_t>(n) * n * n);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        Vec3 p{bmin.x + (bmax.x - bmin.x) * i / (n - 1), bmin.y + (bmax.y - bmin.y) * j / (n - 1),
               bmin.z + (bmax.z - bmin.z) * k / (n - 1)};
        values[(static_cast<size_t>(k) * n + j) * n + i] = sdf_eval(local, p);
      }
  return make_grid(n, n, n, bmin, bmax, std::move(values), placement);
}

Camera standard_camera(int wh, double focal) {
  return Camera(focal, focal, wh / 2.0, wh / 2.0, wh, wh, Se3Scale());
}

// Mild articulated reference pose: bent elbows, raised arms, one knee.
std::vector<double> reference_pose(int joints) {
  std::vector<double> pose(3 * (joints - 1), 0.0);
  auto set = [&](int joint, const Vec3& aa) {
    pose[3 * (joint - 1) + 0] = aa.x;
    pose[3 * (joint - 1) + 1] = aa.y;
    pose[3 * (joint - 1) + 2] = aa.z;
  };
  set(1, {0.10, 0.0, 0.0});    // spine lean
  set(3, {0.0, 0.15, 0.0});    // neck turn
  set(5, {0.0, 0.0, 0.25});    // l_shoulder raise
  set(6, {0.0, 0.0, 0.50});    // l_elbow bend
  set(8, {0.0, 0.0, -0.25});   // r_shoulder raise
  set(9, {0.0, 0.0, -0.50});   // r_elbow bend
  set(12, {0.30, 0.0, 0.0});   // l_knee bend
  set(15, {0.15, 0.0, 0.0});   // r_knee bend
  return pose;
}

struct PresetScene {
  Scene gt;
  bool has_emitter = false;
};

PresetScene build_preset(const std::string& preset, const std::string& grid_file) {
  PresetScene ps;
  Scene& s = ps.gt;
  s.version = 1;

  if (preset == "object-bowl" || preset == "object-box") {
    s.camera = standard_camera(96, 120.0);
    // matches the observation renders, so rim convergence agrees with them
    s.render.sphere_steps = 128;
    s.render.trace_eps = 1e-6;
    s.render.t_max = 3.0;
    s.render.smoothing = false;
    s.render.edge_sampling = false;
    s.render.mask_sigma = 5e-3;
    s.fit.iters_object = 300;
    s.fit.restarts_object = 5;
    // dense depth carries the metric signal; the coverage term only keeps
    // the silhouette on target, and its pixel-footprint artifacts must not
    // outvote depth
    s.fit.w_depth = 50.0;

    SceneObject o;
    if (preset == "object-bowl") {
      Quat q = Quat::from_axis_angle(normalized(Vec3{1.0, 0.15, 0.0}) * 2.8);
      o.shape = make_bowl(0.16, 0.145, 0.05, Se3Scale(q, {0.02, -0.01, 0.55}, 1.0));
      o.shape.name = "bowl";
    } else {
      Quat q = Quat::from_axis_angle(normalized(Vec3{0.3, 1.0, 0.2}) * 0.7);
      o.shape = make_rounded_box({0.10, 0.07, 0.05}, 0.015, Se3Scale(q, {-0.02, 0.01, 0.50}, 1.0));
      o.shape.name = "box";
    }
    o.optimize_pose = true;
    o.optimize_shape = false;
    o.init.extent = {0.1, 0.1, 0.1};
    o.init.rot_max_deg = 30.0;
    o.init.scale_min = 0.85;
    o.init.scale_max = 1.15;
    o.mask_path = "mask_0.pgm";
    s.objects.push_back(o);
    s.obs.depth_path = "depth.pfm";
    return ps;
  }

  if (preset == "plane-mirror" || preset == "panel-mirror" || preset == "bowl-mirror") {
    // long lens: the reflected figure is small, and IoU on a coarse grid is
    // quantization-bound unless the figure covers a few hundred pixels
    s.camera = standard_camera(128, 200.0);
    s.render.sphere_steps = 64;
    s.render.trace_eps = 1e-6;
    s.render.t_max = 5.0;
    s.render.smoothing = true;
    s.render.smooth_delta = 0.5;
    s.render.sigma = 1e-4;
    s.render.edge_sampling = true;
    s.render.ray_budget = 2048;
    s.fit.iters_human = 2000;
    s.fit.restarts_human = 8;
    // light regularizer: plausible poses are not near-zero poses, and the
    // default weight drags bent elbows and knees toward straight
    s.fit.w_prior_human = 3e-4;
    s.fit.sigma0 = 1e-2;
    s.fit.sigma_floor = 1e-5;
    s.fit.sigma_anneal_every = 100;
    s.fit.sigma_anneal_factor = 0.5;

    SceneObject mirror;
    SceneEmitter em;
    em.model.skeleton = default17_skeleton();
    em.model.segments = 8;
    em.model.pose = reference_pose(em.model.skeleton.size());

    if (preset == "plane-mirror") {
      mirror.shape = make_rounded_box({0.45, 0.45, 0.005}, 0.002, Se3Scale(Quat(), {0, 0, 0.9}, 1.0));
      mirror.shape.name = "panel";
      em.model.placement = Se3Scale(Quat::from_axis_angle(Vec3{0, 0.4, 0}), {0.28, 0.0, 0.38}, 0.28);
    } else if (preset == "panel-mirror") {
      mirror.shape = make_sphere(3.0, Se3Scale(Quat(), {0, 0, 3.8}, 1.0));
      mirror.shape.name = "panel";
      em.model.placement = Se3Scale(Quat::from_axis_angle(Vec3{0, 0.4, 0}), {0.30, 0.0, 0.35}, 0.28);
    } else {
      SdfShape analytic = make_bowl(0.5, 0.44, 0.25, Se3Scale());
      Quat open_to_camera = Quat::from_axis_angle(Vec3{3.14159265358979323846, 0, 0});
      mirror.shape = grid_from_shape(analytic, 48, {-0.55, -0.55, -0.55}, {0.55, 0.55, 0.3},
                                     Se3Scale(open_to_camera, {0, 0, 0.6}, 1.0));
      mirror.shape.name = "bowl";
      mirror.grid_path = grid_file;
      em.model.placement =
          Se3Scale(Quat::from_axis_angle(Vec3{0, 2.8, 0}), {0.12, 0.02, 0.30}, 0.30);
    }
    mirror.optimize_pose = false;
    mirror.optimize_shape = false;
    s.objects.push_back(mirror);

    em.init.extent = {0.05, 0.05, 0.05};
    em.init.rot_max_deg = 15.0;
    em.init.pose_std = 0.25;
    s.emitter = em;
    s.obs.silhouette_path = "silhouette.pgm";
    s.obs.gt_joints_path = "gt_joints.csv";
    ps.has_emitter = true;
    return ps;
  }
  throw std::invalid_argument("unknown preset '" + preset + "'; available: object-bowl, "
                              "object-box, plane-mirror, panel-mirror, bowl-mirror");
}

}  // namespace

std::vector<std::string> synthetic_presets() {
  return {"object-bowl", "object-box", "plane-mirror", "panel-mirror", "bowl-mirror"};
}

SoftImage render_hard_silhouette(const ReflectionCache& cache, const TriMesh& mesh) {
  SoftImage img(cache.width, cache.height);
  Vec3 lo, hi;
  mesh.bbox(lo, hi);
  Vec3 center = (lo + hi) * 0.5;
  double radius = norm(hi - lo) * 0.5 + 1e-9;
  size_t n = cache.rays.size();
  for (size_t i = 0; i < n; ++i) {
    if (!cache.valid[i]) continue;
    const Ray& r = cache.rays[i];
    Vec3 w = center - r.origin;
    double along = dot(w, r.dir);
    double off2 = norm2(w) - (along > 0 ? along * along : 0.0);
    if (off2 > radius * radius) continue;
    for (const auto& tri : mesh.triangles) {
      double t;
      if (ray_triangle_intersect(r, mesh.vertices[tri[0]], mesh.vertices[tri[1]],
                                 mesh.vertices[tri[2]], t)) {
        img.values[i] = 1.0;
        break;
      }
    }
  }
  return img;
}

void make_synthetic(const std::string& preset, const std::string& out_dir, uint64_t seed,
                    double depth_noise, double hole_frac) {
  if (depth_noise < 0 || !(hole_frac >= 0 && hole_frac < 1))
    throw std::invalid_argument("make_synthetic: depth_noise >= 0, hole_frac in [0,1) required");
  std::filesystem::create_directories(out_dir);
  PresetScene ps = build_preset(preset, "mirror_grid.sdfgrid");
  Scene& gt = ps.gt;
  gt.seed = seed;
  gt.fit.seed = seed;
  gt.dir = out_dir;
  std::mt19937_64 rng(mix64(seed ^ 0x73796e7468ULL));

  for (const SceneObject& o : gt.objects)
    if (o.shape.family == SdfFamily::Grid)
      save_sdf_grid(out_dir + "/" + o.grid_path, o.shape);

  // Observations rendered from ground truth at extra trace depth.
  RenderConfig obs_cfg = gt.render;
  obs_cfg.sphere_steps = std::max(obs_cfg.sphere_steps, 128);

  if (!gt.obs.depth_path.empty()) {
    std::vector<SdfShape> shapes;
    for (const SceneObject& o : gt.objects) shapes.push_back(o.shape);
    DepthMaskRender dm = render_depth_mask(shapes, gt.camera, obs_cfg);
    std::normal_distribution<double> noise(0.0, depth_noise);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (double& d : dm.depth.values) {
      if (d == kInf) continue;
      if (hole_frac > 0 && u01(rng) < hole_frac) {
        d = kInf;
        continue;
      }
      if (depth_noise > 0) d = std::max(1e-6, d + noise(rng));
    }
    save_pfm(out_dir + "/" + gt.obs.depth_path, dm.depth);
    for (size_t i = 0; i < gt.objects.size(); ++i) {
      if (gt.objects[i].mask_path.empty()) continue;
      SoftImage hard(dm.depth.width, dm.depth.height);
      for (size_t px = 0; px < hard.values.size(); ++px)
        hard.values[px] = dm.identity[px] == static_cast<int>(i) ? 1.0 : 0.0;
      save_pgm(out_dir + "/" + gt.objects[i].mask_path, hard);
    }
  }

  if (ps.has_emitter) {
    std::vector<SdfShape> mirrors;
    for (const SceneObject& o : gt.objects) mirrors.push_back(o.shape);
    ReflectionCache cache = build_reflection_cache(mirrors, gt.camera, obs_cfg);
    EmitterForward fwd = emitter_forward(gt.emitter->model);
    SoftImage sil = render_hard_silhouette(cache, fwd.mesh);
    save_pgm(out_dir + "/" + gt.obs.silhouette_path, sil);

    std::vector<Vec3> joints = joint_positions(gt.emitter->model);
    std::vector<std::pair<std::string, Vec3>> rows;
    for (size_t j = 0; j < joints.size(); ++j)
      rows.emplace_back(gt.emitter->model.skeleton.joints[j].name, joints[j]);
    save_joints_csv(out_dir + "/" + gt.obs.gt_joints_path, rows);
  }

  save_scene(gt, out_dir + "/gt_scene.toml");

  // Starting-point scene: placements perturbed inside 0.6x the restart
  // sampling bounds so the truth stays inside the declared volume.
  Scene start = gt;
  for (SceneObject& o : start.objects) {
    if (!o.optimize_pose) continue;
    Se3Scale& pl = o.shape.placement;
    pl.translation = pl.translation + random_in_box(rng, o.init.extent * 0.6);
    pl.rotation =
        (random_rotation_within(rng, o.init.rot_max_deg * (3.14159265358979323846 / 180.0) * 0.6) *
         pl.rotation)
            .normalized();
    double span = std::min(o.init.scale_max - 1.0, 1.0 - o.init.scale_min) * 0.6;
    std::uniform_real_distribution<double> u(-span, span);
    pl.scale *= 1.0 + u(rng);
  }
  if (start.emitter) {
    Se3Scale& pl = start.emitter->model.placement;
    pl.translation = pl.translation + random_in_box(rng, start.emitter->init.extent * 0.6);
    pl.rotation = (random_rotation_within(
                       rng, start.emitter->init.rot_max_deg * (3.14159265358979323846 / 180.0) * 0.6) *
                   pl.rotation)
                      .normalized();
    std::fill(start.emitter->model.pose.begin(), start.emitter->model.pose.end(), 0.0);
  }
  save_scene(start, out_dir + "/scene.toml");
}

}  // namespace mirrorpose
