#include <cmath>

#include "mirrorpose/scene.hpp"

namespace mirrorpose {

namespace {

constexpr double kMinSize = 1e-3;

void project_latent(SdfFamily family, std::vector<double>& l) {
  switch (family) {
    case SdfFamily::Sphere:
      l[0] = std::max(l[0], kMinSize);
      break;
    case SdfFamily::Ellipsoid:
      for (int i = 0; i < 3; ++i) l[i] = std::max(l[i], kMinSize);
      break;
    case SdfFamily::RoundedBox:
      for (int i = 0; i < 3; ++i) l[i] = std::max(l[i], kMinSize);
      l[3] = std::max(l[3], 1e-4);
      break;
    case SdfFamily::Bowl:
      l[1] = std::max(l[1], kMinSize);
      l[0] = std::max(l[0], l[1] + kMinSize);
      break;
    case SdfFamily::Grid:
      break;
  }
}

ParamVector pack_object(const SceneObject& o) {
  ParamVector p;
  if (o.optimize_pose) {
    const Vec3& t = o.shape.placement.translation;
    p.append("translation", {t.x, t.y, t.z});
    p.append("rotation", {0, 0, 0});
    p.append("scale", {o.shape.placement.scale});
  }
  if (o.optimize_shape) p.append("latent", o.shape.latent.data(), static_cast<int>(o.shape.latent.size()));
  return p;
}

// Writes params into the shape; the rotation segment is an axis-angle
// increment that is folded into the quaternion and zeroed, so its gradient
// is always taken at zero.
void apply_object(SceneObject& o, ParamVector& p) {
  if (o.optimize_pose) {
    double* t = p.seg("translation");
    o.shape.placement.translation = {t[0], t[1], t[2]};
    double* r = p.seg("rotation");
    Vec3 delta{r[0], r[1], r[2]};
    if (norm2(delta) > 0) {
      o.shape.placement.rotation =
          (Quat::from_axis_angle(delta) * o.shape.placement.rotation).normalized();
      r[0] = r[1] = r[2] = 0;
    }
    double* s = p.seg("scale");
    s[0] = std::clamp(s[0], kMinSize, 1e6);
    o.shape.placement.scale = s[0];
  }
  if (o.optimize_shape) {
    double* l = p.seg("latent");
    std::vector<double> lat(l, l + o.shape.latent.size());
    project_latent(o.shape.family, lat);
    std::copy(lat.begin(), lat.end(), l);
    o.shape.latent = lat;
  }
}

Vec3 sample_box(std::mt19937_64& rng, const Vec3& center, const Vec3& extent) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return {center.x + u(rng) * extent.x, center.y + u(rng) * extent.y,
          center.z + u(rng) * extent.z};
}

Quat sample_rotation(std::mt19937_64& rng, const Quat& base, double max_deg) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec3 axis{u(rng), u(rng), u(rng)};
  double n = norm(axis);
  if (n < 1e-9) axis = {1, 0, 0}, n = 1;
  std::uniform_real_distribution<double> ua(0.0, max_deg * M_PI / 180.0);
  return (Quat::from_axis_angle(axis / n * ua(rng)) * base).normalized();
}

void sample_object_restart(std::mt19937_64& rng, const SceneObject& declared, SceneObject& o) {
  const InitBounds& ib = declared.init;
  Vec3 c = ib.center_set ? ib.center : declared.shape.placement.translation;
  if (o.optimize_pose) {
    o.shape.placement.translation = sample_box(rng, c, ib.extent);
    o.shape.placement.rotation = sample_rotation(rng, declared.shape.placement.rotation, ib.rot_max_deg);
    std::uniform_real_distribution<double> us(ib.scale_min, ib.scale_max);
    o.shape.placement.scale = declared.shape.placement.scale * us(rng);
  }
  if (o.optimize_shape) {
    std::uniform_real_distribution<double> ul(-ib.latent_rel, ib.latent_rel);
    for (size_t i = 0; i < o.shape.latent.size(); ++i)
      o.shape.latent[i] = declared.shape.latent[i] * (1.0 + ul(rng));
    project_latent(o.shape.family, o.shape.latent);
  }
}

}  // namespace

// Depth + mask loss of one object against the observations, other objects
// held fixed via their precomputed depth. The mask value is a logistic of the
// signed ray clearance on both sides of the boundary, so it crosses 0.5
// continuously when the silhouette edge moves over a pixel. Normalizers are
// observation-side constants so they do not enter the gradient.
LossBreakdown object_fit_loss(const SceneObject& o, size_t obs_index, const Scene& scene,
                              const FitConfig& cfg, const std::vector<double>& other_depth,
                              const std::vector<double>& latent_ref, int n_depth_obs,
                              double mask_sigma, ParamVector* grad) {
  const Camera& cam = scene.camera;
  const RenderConfig& rc = scene.render;
  const SoftImage& m_obs_img = scene.obs.masks[obs_index];
  LossBreakdown lb;
  double inv_nd = n_depth_obs > 0 ? 1.0 / n_depth_obs : 0.0;
  double inv_nm = 1.0 / (static_cast<double>(cam.width) * cam.height);

  double* g_t = nullptr;
  double* g_r = nullptr;
  double* g_s = nullptr;
  double* g_l = nullptr;
  if (grad) {
    if (o.optimize_pose) {
      g_t = grad->seg("translation");
      g_r = grad->seg("rotation");
      g_s = grad->seg("scale");
    }
    if (o.optimize_shape) g_l = grad->seg("latent");
  }

  auto add_param = [&](const SdfParamGrad& pg, double coeff) {
    if (g_t) {
      for (int i = 0; i < 3; ++i) g_t[i] += coeff * pg.d_translation[i];
      for (int i = 0; i < 3; ++i) g_r[i] += coeff * pg.d_rotation[i];
      g_s[0] += coeff * pg.d_scale;
    }
    if (g_l)
      for (auto& [i, w] : pg.d_latent) g_l[i] += coeff * w;
  };

  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      size_t i = static_cast<size_t>(y) * cam.width + x;
      Ray ray = camera_ray(cam, x, y);
      TraceExtras ex;
      SdfHit hit = sphere_trace(o.shape, ray, rc.sphere_steps, rc.trace_eps, rc.t_max, &ex);
      double m_obs = m_obs_img.values[i];
      double d_obs = scene.obs.depth.values[i];
      // Continue past the closest approach even when the trace did not
      // converge: a step-starved grazing ray must see the same interior dip
      // as its converged neighbors or the mask value jumps between them.
      double mv = ex.min_value, mt = ex.min_t;
      if (mv < 0.05) {
        double t_in;
        double g_in = sdf_interior_min(o.shape, ray, hit.converged ? hit.depth : ex.min_t,
                                       rc.t_max, &t_in);
        if (g_in < mv) {
          mv = g_in;
          mt = t_in;
        }
      }
      // the band scales with the object so that growing the scene cannot
      // sharpen the soft edge against a binary observation and cash that in
      double ms = mask_sigma * o.shape.placement.scale;
      double m = 1.0 / (1.0 + std::exp(std::clamp(mv / ms, -500.0, 500.0)));
      double dm = m - m_obs;
      lb.mask += cfg.w_mask * dm * dm * inv_nm;
      if (grad) {
        double slope = m * (1.0 - m);
        if (slope > 1e-14) {
          SdfParamGrad pg = sdf_param_grad(o.shape, ray.at(mt));
          add_param(pg, -2.0 * cfg.w_mask * dm * inv_nm * slope / ms);
          if (g_s)
            g_s[0] += 2.0 * cfg.w_mask * dm * inv_nm * slope * mv / (ms * o.shape.placement.scale);
        }
      }
      if (hit.converged && std::isfinite(d_obs) && hit.depth < other_depth[i]) {
        // quadratic core, linear tails: occlusion edges flip residuals by
        // whole surface gaps, and squaring those swamps the in-surface signal
        double resid = hit.depth - d_obs;
        double cap = cfg.depth_cap;
        double rho, drho;
        if (std::abs(resid) < cap) {
          rho = resid * resid;
          drho = 2.0 * resid;
        } else {
          rho = cap * (2.0 * std::abs(resid) - cap);
          drho = resid > 0 ? 2.0 * cap : -2.0 * cap;
        }
        lb.depth += cfg.w_depth * rho * inv_nd;
        if (grad) {
          double denom = dot(sdf_gradient(o.shape, hit.point), ray.dir);
          if (std::abs(denom) > 1e-9) {
            SdfParamGrad pg = sdf_param_grad(o.shape, hit.point);
            // dt/dtheta = -dG/dtheta / (grad G . d)
            add_param(pg, -cfg.w_depth * drho * inv_nd / denom);
          }
        }
      }
    }

  if (o.optimize_shape) {
    for (size_t i = 0; i < o.shape.latent.size(); ++i) {
      double d = o.shape.latent[i] - latent_ref[i];
      lb.prior += cfg.w_prior_object * d * d;
      if (g_l) g_l[i] += 2.0 * cfg.w_prior_object * d;
    }
  }
  lb.total = lb.depth + lb.mask + lb.prior;
  return lb;
}

namespace {

// Cosine learning-rate decay to 1% of the base rate; full-batch Adam
// otherwise keeps oscillating at the lr scale near the optimum.
double lr_at(const FitConfig& cfg, int k, int total) {
  double f = total > 1 ? static_cast<double>(k) / (total - 1) : 1.0;
  double floor_lr = 0.01 * cfg.lr;
  return floor_lr + 0.5 * (cfg.lr - floor_lr) * (1.0 + std::cos(M_PI * f));
}

uint64_t mix_seed(uint64_t seed, uint64_t salt) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

std::vector<FitResult> fit_object(Scene& scene, const FitConfig& cfg) {
  cfg.validate();
  scene.validate();
  if (!scene.obs.has_depth) throw std::invalid_argument("fit_object: scene has no depth observation");
  const Camera& cam = scene.camera;
  size_t npx = static_cast<size_t>(cam.width) * cam.height;
  if (scene.obs.depth.values.size() != npx)
    throw std::invalid_argument("fit_object: depth observation dims differ from camera");

  int n_depth_obs = 0;
  for (double d : scene.obs.depth.values)
    if (std::isfinite(d)) ++n_depth_obs;

  // Per-object direct depth, for occlusion checks while one object moves.
  std::vector<std::vector<double>> obj_depth(scene.objects.size(),
                                             std::vector<double>(npx, kInf));
  for (size_t o = 0; o < scene.objects.size(); ++o)
    for (int y = 0; y < cam.height; ++y)
      for (int x = 0; x < cam.width; ++x) {
        SdfHit h = sphere_trace(scene.objects[o].shape, camera_ray(cam, x, y),
                                scene.render.sphere_steps, scene.render.trace_eps,
                                scene.render.t_max);
        if (h.converged) obj_depth[o][static_cast<size_t>(y) * cam.width + x] = h.depth;
      }

  std::vector<FitResult> results;
  for (size_t oi = 0; oi < scene.objects.size(); ++oi) {
    SceneObject& target = scene.objects[oi];
    if (!target.optimize_pose && !target.optimize_shape) continue;
    if (oi >= scene.obs.masks.size() || !scene.obs.has_mask[oi])
      throw std::invalid_argument("fit_object: object '" + target.shape.name +
                                  "' has no mask observation");

    std::vector<double> other_depth(npx, kInf);
    for (size_t o = 0; o < scene.objects.size(); ++o)
      if (o != oi)
        for (size_t i = 0; i < npx; ++i) other_depth[i] = std::min(other_depth[i], obj_depth[o][i]);

    const SceneObject declared = target;
    FitResult best;
    SceneObject best_obj = declared;

    for (int r = 0; r < cfg.restarts_object; ++r) {
      SceneObject work = declared;
      if (r > 0) {
        std::mt19937_64 rng(mix_seed(cfg.seed, 1000 * (oi + 1) + r));
        sample_object_restart(rng, declared, work);
      }
      ParamVector params = pack_object(work);
      AdamState st;
      std::vector<std::array<double, 6>> trace;
      bool diverged = false;
      for (int it = 0; it < cfg.iters_object; ++it) {
        // the band stays at the configured width: narrowing it below the
        // pixel pitch lets straight silhouette edges snap to inter-pixel
        // corridors where every rim pixel saturates
        ParamVector grad = params.zeros_like();
        LossBreakdown lb = object_fit_loss(work, oi, scene, cfg, other_depth, declared.shape.latent,
                                       n_depth_obs, scene.render.mask_sigma, &grad);
        if (!std::isfinite(lb.total)) {
          diverged = true;
          break;
        }
        trace.push_back({static_cast<double>(it), lb.total, lb.depth, lb.mask, 0.0, lb.prior});
        FitConfig step = cfg;
        step.lr = lr_at(cfg, it, cfg.iters_object);
        adam_step(st, params, grad, step);
        apply_object(work, params);
      }
      if (diverged) continue;
      LossBreakdown fin = object_fit_loss(work, oi, scene, cfg, other_depth, declared.shape.latent,
                                      n_depth_obs, scene.render.mask_sigma, nullptr);
      if (!std::isfinite(fin.total)) continue;
      if (!best.any_restart_finished || fin.total < best.loss.total) {
        best.any_restart_finished = true;
        best.loss = fin;
        best.best_restart = r;
        best.params = params;
        best.trace = std::move(trace);
        best.iterations = cfg.iters_object;
        best_obj = work;
      }
    }
    if (!best.any_restart_finished)
      throw std::runtime_error("fit_object: every restart diverged for '" +
                               declared.shape.name + "'");
    // refresh this object's depth so later objects see the fitted geometry
    target = best_obj;
    for (int y = 0; y < cam.height; ++y)
      for (int x = 0; x < cam.width; ++x) {
        size_t i = static_cast<size_t>(y) * cam.width + x;
        SdfHit h = sphere_trace(target.shape, camera_ray(cam, x, y), scene.render.sphere_steps,
                                scene.render.trace_eps, scene.render.t_max);
        obj_depth[oi][i] = h.converged ? h.depth : kInf;
      }
    results.push_back(std::move(best));
  }
  return results;
}

// --- stage 2 -------------------------------------------------------------------

namespace {

ParamVector pack_emitter(const EmitterModel& m) {
  ParamVector p;
  const Vec3& t = m.placement.translation;
  p.append("translation", {t.x, t.y, t.z});
  p.append("rotation", {0, 0, 0});
  p.append("pose", m.pose.data(), static_cast<int>(m.pose.size()));
  return p;
}

void apply_emitter(EmitterModel& m, ParamVector& p) {
  double* t = p.seg("translation");
  m.placement.translation = {t[0], t[1], t[2]};
  double* r = p.seg("rotation");
  Vec3 delta{r[0], r[1], r[2]};
  if (norm2(delta) > 0) {
    m.placement.rotation = (Quat::from_axis_angle(delta) * m.placement.rotation).normalized();
    r[0] = r[1] = r[2] = 0;
  }
  double* z = p.seg("pose");
  int joints = static_cast<int>(m.pose.size()) / 3;
  for (int j = 0; j < joints; ++j) {
    Vec3 aa{z[3 * j], z[3 * j + 1], z[3 * j + 2]};
    double n = norm(aa);
    double cap = M_PI - 1e-3;
    if (n > cap) {
      aa *= cap / n;
      z[3 * j] = aa.x;
      z[3 * j + 1] = aa.y;
      z[3 * j + 2] = aa.z;
    }
    m.pose[3 * j] = z[3 * j];
    m.pose[3 * j + 1] = z[3 * j + 1];
    m.pose[3 * j + 2] = z[3 * j + 2];
  }
}

void sample_emitter_restart(std::mt19937_64& rng, const SceneEmitter& declared, EmitterModel& m) {
  const InitBounds& ib = declared.init;
  Vec3 c = ib.center_set ? ib.center : declared.model.placement.translation;
  m.placement.translation = sample_box(rng, c, ib.extent);
  m.placement.rotation = sample_rotation(rng, declared.model.placement.rotation, ib.rot_max_deg);
  std::normal_distribution<double> g(0.0, ib.pose_std);
  int joints = static_cast<int>(m.pose.size()) / 3;
  for (int j = 0; j < joints; ++j) {
    Vec3 aa{declared.model.pose[3 * j] + g(rng), declared.model.pose[3 * j + 1] + g(rng),
            declared.model.pose[3 * j + 2] + g(rng)};
    double n = norm(aa);
    double cap = M_PI * 0.9;
    if (n > cap) aa *= cap / n;
    m.pose[3 * j] = aa.x;
    m.pose[3 * j + 1] = aa.y;
    m.pose[3 * j + 2] = aa.z;
  }
}

std::vector<PixelRC> uniform_sample(int budget, int w, int h, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> ux(0, w - 1), uy(0, h - 1);
  std::vector<uint8_t> seen(static_cast<size_t>(w) * h, 0);
  std::vector<PixelRC> out;
  out.reserve(budget);
  for (int i = 0; i < budget; ++i) {
    PixelRC p{ux(rng), uy(rng)};
    size_t idx = static_cast<size_t>(p.y) * w + p.x;
    if (!seen[idx]) {
      seen[idx] = 1;
      out.push_back(p);
    }
  }
  return out;
}

std::vector<SdfShape> mirror_shapes(const Scene& scene) {
  std::vector<SdfShape> mirrors;
  mirrors.reserve(scene.objects.size());
  for (const auto& o : scene.objects) mirrors.push_back(o.shape);
  return mirrors;
}

LossBreakdown eval_human_impl(const Scene& scene, const FitConfig& cfg, const EmitterModel& model,
                              const ReflectionCache& cache, double* iou_out) {
  RenderConfig rc = scene.render;
  rc.sigma = cfg.sigma_floor;
  EmitterForward fwd = emitter_forward(model);
  ReflectionRender rr =
      render_reflection_sampled(cache, fwd, scene.camera, rc, nullptr, false);
  SoftImage img = rr.to_image(scene.camera.width, scene.camera.height);
  LossBreakdown lb;
  lb.silhouette = loss_silhouette(img, scene.obs.silhouette);
  lb.prior = cfg.w_prior_human * pose_prior(model);
  lb.total = lb.silhouette + lb.prior;
  if (iou_out) *iou_out = iou_hard(img, scene.obs.silhouette);
  return lb;
}

}  // namespace

LossBreakdown eval_human(const Scene& scene, const FitConfig& cfg, double* iou_out) {
  if (!scene.emitter) throw std::invalid_argument("eval_human: scene has no emitter");
  if (!scene.obs.has_silhouette)
    throw std::invalid_argument("eval_human: scene has no silhouette observation");
  ReflectionCache cache = build_reflection_cache(mirror_shapes(scene), scene.camera, scene.render);
  return eval_human_impl(scene, cfg, scene.emitter->model, cache, iou_out);
}

FitResult fit_human(Scene& scene, const FitConfig& cfg) {
  cfg.validate();
  scene.validate();
  if (!scene.emitter) throw std::invalid_argument("fit_human: scene has no emitter");
  if (!scene.obs.has_silhouette)
    throw std::invalid_argument("fit_human: scene has no silhouette observation");
  if (scene.objects.empty()) throw std::invalid_argument("fit_human: scene has no mirror objects");
  const SoftImage& observed = scene.obs.silhouette;
  if (observed.width != scene.camera.width || observed.height != scene.camera.height)
    throw std::invalid_argument("fit_human: silhouette dims differ from camera");
  if (!observed.is_binary()) throw std::invalid_argument("fit_human: silhouette must be binary");

  std::vector<SdfShape> mirrors = mirror_shapes(scene);
  ReflectionCache cache = build_reflection_cache(mirrors, scene.camera, scene.render);

  const SceneEmitter declared = *scene.emitter;
  FitResult best;
  EmitterModel best_model = declared.model;

  for (int r = 0; r < cfg.restarts_human; ++r) {
    EmitterModel model = declared.model;
    std::mt19937_64 rng(mix_seed(cfg.seed, 777 + r));
    if (r > 0) sample_emitter_restart(rng, declared, model);
    ParamVector params = pack_emitter(model);
    AdamState st;
    std::vector<std::array<double, 6>> trace;
    bool diverged = false;

    for (int k = 0; k < cfg.iters_human; ++k) {
      RenderConfig rc = scene.render;
      rc.sigma = cfg.sigma_at(k);
      std::vector<PixelRC> pixels =
          rc.edge_sampling ? edge_sample_rays(observed, k, rc, rng)
                           : uniform_sample(rc.ray_budget, observed.width, observed.height, rng);
      EmitterForward fwd = emitter_forward(model);
      ReflectionRender rr = render_reflection_sampled(cache, fwd, scene.camera, rc, &pixels, true);
      std::vector<double> obs_vals(pixels.size());
      for (size_t i = 0; i < pixels.size(); ++i) obs_vals[i] = observed.at(pixels[i].x, pixels[i].y);
      std::vector<double> d_vals;
      double l_sil = loss_silhouette_sampled(rr.values, obs_vals, &d_vals);
      double l_prior = cfg.w_prior_human * pose_prior(model);
      double total = l_sil + l_prior;
      if (!std::isfinite(total)) {
        diverged = true;
        break;
      }
      trace.push_back({static_cast<double>(k), total, 0.0, 0.0, l_sil, l_prior});

      std::vector<Vec3> d_verts = reflection_backward(rr, fwd, d_vals);
      EmitterGrads eg = emitter_backward(model, fwd, d_verts);
      ParamVector grad = params.zeros_like();
      double* gt = grad.seg("translation");
      for (int i = 0; i < 3; ++i) gt[i] = eg.d_translation[i];
      double* gr = grad.seg("rotation");
      for (int i = 0; i < 3; ++i) gr[i] = eg.d_rotation[i];
      double* gz = grad.seg("pose");
      for (size_t i = 0; i < eg.d_pose.size(); ++i)
        gz[i] = eg.d_pose[i] + 2.0 * cfg.w_prior_human * model.pose[i];
      FitConfig step = cfg;
      step.lr = lr_at(cfg, k, cfg.iters_human);
      adam_step(st, params, grad, step);
      apply_emitter(model, params);
    }
    if (diverged) continue;

    LossBreakdown fin = eval_human_impl(scene, cfg, model, cache, nullptr);
    if (!std::isfinite(fin.total)) continue;
    if (!best.any_restart_finished || fin.total < best.loss.total) {
      best.any_restart_finished = true;
      best.loss = fin;
      best.best_restart = r;
      best.params = params;
      best.trace = std::move(trace);
      best.iterations = cfg.iters_human;
      best_model = model;
    }
  }
  if (!best.any_restart_finished) throw std::runtime_error("fit_human: every restart diverged");
  scene.emitter->model = best_model;
  return best;
}

std::vector<AblationRow> ablate_run(const Scene& scene,
                                    const std::vector<std::string>& variants) {
  if (scene.obs.gt_joints_path.empty())
    throw std::invalid_argument("ablate_run: scene has no reference joints");
  const std::string& jp = scene.obs.gt_joints_path;
  bool absolute = !jp.empty() && jp[0] == '/';
  auto gt_named =
      load_joints_csv(absolute || scene.dir.empty() ? jp : scene.dir + "/" + jp);
  std::vector<Vec3> gt;
  gt.reserve(gt_named.size());
  for (auto& [name, p] : gt_named) gt.push_back(p);

  std::vector<AblationRow> rows;
  for (const std::string& v : variants) {
    AblationRow row;
    row.variant = v;
    Scene s = scene;
    // identical budget per variant; capped so a 4-variant sweep stays tractable
    s.fit.restarts_human = std::min(s.fit.restarts_human, 4);
    if (v == "full") {
    } else if (v == "no_edge_sampling") {
      s.render.edge_sampling = false;
    } else if (v == "sphere_steps_1") {
      s.render.sphere_steps = 1;
    } else if (v == "no_smoothing") {
      s.render.smoothing = false;
    } else {
      throw std::invalid_argument("ablate_run: unknown variant '" + v + "'");
    }
    try {
      FitResult fr = fit_human(s, s.fit);
      std::vector<Vec3> joints = joint_positions(s.emitter->model);
      row.metric = keypoint_metric(joints, gt);
      double iou = 0;
      eval_human(s, s.fit, &iou);
      row.metric.iou = iou;
      row.final_loss = fr.loss.total;
    } catch (const std::exception& e) {
      row.failed = true;
      std::fprintf(stderr, "ablate: variant %s failed: %s\n", v.c_str(), e.what());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace mirrorpose
