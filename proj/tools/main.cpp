#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "CLI11.hpp"
#include "mirrorpose/scene.hpp"

using namespace mirrorpose;

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string num_vec(const Vec3& v) { return num(v.x) + " " + num(v.y) + " " + num(v.z); }

Scene load_scene(const std::string& path, const std::optional<uint64_t>& seed) {
  Scene s = parse_scene(path);
  if (seed) {
    s.seed = *seed;
    s.fit.seed = *seed;
  }
  return s;
}

// Rewrites file references to absolute so the scene can be saved elsewhere.
void absolutize_paths(Scene& s) {
  auto fix = [&](std::string& p) {
    if (p.empty() || p[0] == '/') return;
    p = std::filesystem::absolute(std::filesystem::path(s.dir) / p).string();
  };
  fix(s.obs.depth_path);
  fix(s.obs.silhouette_path);
  fix(s.obs.gt_joints_path);
  for (SceneObject& o : s.objects) {
    fix(o.mask_path);
    fix(o.grid_path);
  }
}

void write_trace(const std::string& path, const FitResult& fr) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& row : fr.trace)
    rows.push_back({std::to_string(static_cast<long long>(row[0])), num(row[1]), num(row[2]),
                    num(row[3]), num(row[4]), num(row[5])});
  save_csv(path, {"iteration", "total", "depth", "mask", "silhouette", "prior"}, rows);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  f << text;
}

std::string placement_text(const Se3Scale& pl) {
  const Quat& q = pl.rotation;
  return "position " + num_vec(pl.translation) + "\nrotation " + num(q.w) + " " + num(q.x) + " " +
         num(q.y) + " " + num(q.z) + "\nscale " + num(pl.scale) + "\n";
}

int cmd_render(const std::string& scene_path, const std::string& out,
               const std::optional<uint64_t>& seed) {
  Scene s = load_scene(scene_path, seed);
  std::filesystem::create_directories(out);
  std::vector<SdfShape> shapes;
  for (const SceneObject& o : s.objects) shapes.push_back(o.shape);

  if (!s.objects.empty()) {
    DepthMaskRender dm = render_depth_mask(shapes, s.camera, s.render);
    save_pfm(out + "/depth.pfm", dm.depth);
    for (size_t i = 0; i < s.objects.size(); ++i) {
      SoftImage hard(dm.depth.width, dm.depth.height);
      for (size_t px = 0; px < hard.values.size(); ++px)
        hard.values[px] = dm.identity[px] == static_cast<int>(i) ? 1.0 : 0.0;
      save_pgm(out + "/mask_" + std::to_string(i) + ".pgm", hard);
    }
    std::printf("wrote depth.pfm and %zu mask(s)\n", s.objects.size());
  }
  if (s.emitter) {
    ReflectionCache cache = build_reflection_cache(shapes, s.camera, s.render);
    SoftImage soft = render_reflection(shapes, s.emitter->model, s.camera, s.render);
    SoftImage hard(soft.width, soft.height);
    int on = 0;
    for (size_t i = 0; i < soft.values.size(); ++i) {
      hard.values[i] = soft.values[i] >= 0.5 ? 1.0 : 0.0;
      on += hard.values[i] > 0.5;
    }
    save_pgm(out + "/reflection.pgm", hard);
    int mirror_px = 0;
    for (uint8_t v : cache.valid) mirror_px += v;
    std::printf("wrote reflection.pgm (%d lit pixels, %d mirror pixels)\n", on, mirror_px);
  }
  return 0;
}

int cmd_fit_object(const std::string& scene_path, const std::string& out,
                   const std::optional<uint64_t>& seed) {
  Scene s = load_scene(scene_path, seed);
  std::filesystem::create_directories(out);
  std::vector<FitResult> results = fit_object(s, s.fit);

  std::string report;
  size_t ri = 0;
  for (size_t i = 0; i < s.objects.size(); ++i) {
    const SceneObject& o = s.objects[i];
    if (!o.optimize_pose && !o.optimize_shape) continue;
    const FitResult& fr = results[ri];
    report += "object " + std::to_string(i) + " (" + o.shape.name + ")\n";
    report += "  family " + std::string(family_name(o.shape.family)) + "\n";
    report += "  best_restart " + std::to_string(fr.best_restart) + "\n";
    report += "  loss total " + num(fr.loss.total) + " depth " + num(fr.loss.depth) + " mask " +
              num(fr.loss.mask) + " prior " + num(fr.loss.prior) + "\n";
    report += placement_text(o.shape.placement);
    if (o.optimize_shape && o.shape.family != SdfFamily::Grid) {
      report += "latent";
      for (double v : o.shape.latent) report += " " + num(v);
      report += "\n";
    }
    report += "\n";
    write_trace(out + "/fit_object_trace_" + std::to_string(i) + ".csv", fr);
    ++ri;
  }
  write_text(out + "/fit_object_report.txt", report);
  absolutize_paths(s);
  save_scene(s, out + "/fitted_scene.toml");
  std::printf("%s", report.c_str());
  std::printf("fitted %zu object(s); wrote fitted_scene.toml\n", results.size());
  return 0;
}

int cmd_fit_human(const std::string& scene_path, const std::string& out,
                  const std::optional<uint64_t>& seed) {
  Scene s = load_scene(scene_path, seed);
  std::filesystem::create_directories(out);
  FitResult fr = fit_human(s, s.fit);
  double iou = 0;
  LossBreakdown fin = eval_human(s, s.fit, &iou);

  std::string report = "emitter fit\n";
  report += "  best_restart " + std::to_string(fr.best_restart) + "\n";
  report += "  loss total " + num(fin.total) + " silhouette " + num(fin.silhouette) + " prior " +
            num(fin.prior) + "\n";
  report += "  hard_iou " + num(iou) + "\n";
  report += placement_text(s.emitter->model.placement);
  report += "pose";
  for (double v : s.emitter->model.pose) report += " " + num(v);
  report += "\n";
  write_text(out + "/fit_human_report.txt", report);
  write_trace(out + "/fit_human_trace.csv", fr);

  std::vector<Vec3> joints = joint_positions(s.emitter->model);
  std::vector<std::pair<std::string, Vec3>> rows;
  for (size_t j = 0; j < joints.size(); ++j)
    rows.emplace_back(s.emitter->model.skeleton.joints[j].name, joints[j]);
  save_joints_csv(out + "/fitted_joints.csv", rows);

  std::vector<SdfShape> shapes;
  for (const SceneObject& o : s.objects) shapes.push_back(o.shape);
  ReflectionCache cache = build_reflection_cache(shapes, s.camera, s.render);
  EmitterForward fwd = emitter_forward(s.emitter->model);
  save_pgm(out + "/fitted_silhouette.pgm", render_hard_silhouette(cache, fwd.mesh));

  absolutize_paths(s);
  save_scene(s, out + "/fitted_scene.toml");
  std::printf("%s", report.c_str());
  return 0;
}

int cmd_gradcheck(const std::string& out, uint64_t seed) {
  std::filesystem::create_directories(out);
  std::mt19937_64 rng(seed ^ 0x67726164ULL);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<std::vector<std::string>> rows;
  bool all_pass = true;

  auto record = [&](const std::string& family, const GradReport& rep, double tol) {
    for (const GradEntry& e : rep.entries)
      rows.push_back({family, e.name, num(e.analytic), num(e.numeric), num(e.rel_err)});
    bool pass = rep.max_rel_err <= tol;
    all_pass = all_pass && pass;
    std::printf("%-28s max_rel_err %.3e tol %.0e %s\n", family.c_str(), rep.max_rel_err, tol,
                pass ? "PASS" : "FAIL");
  };

  // ray-triangle squared distance vs vertices
  {
    double worst = 0;
    GradReport agg;
    for (int c = 0; c < 20; ++c) {
      Ray ray(Vec3{u(rng), u(rng), u(rng)}, Vec3{u(rng), u(rng), u(rng) + 1.5});
      Vec3 v[3];
      for (auto& vk : v) vk = Vec3{u(rng) + 2.0, u(rng) + 2.0, u(rng)};
      RayTriWitness w = ray_triangle_distance_witness(ray, v[0], v[1], v[2]);
      if (w.intersects || w.dist < 0.05) continue;  // d^2 grad is zero or kinked there
      ParamVector at;
      for (int k = 0; k < 3; ++k) at.append("v" + std::to_string(k), {v[k].x, v[k].y, v[k].z});
      DiffLoss loss;
      loss.value = [&ray](const ParamVector& p) {
        Vec3 a{p.x[0], p.x[1], p.x[2]}, b{p.x[3], p.x[4], p.x[5]}, c2{p.x[6], p.x[7], p.x[8]};
        RayTriWitness ww = ray_triangle_distance_witness(ray, a, b, c2);
        return ww.dist * ww.dist;
      };
      loss.gradient = [&ray](const ParamVector& p) {
        Vec3 a{p.x[0], p.x[1], p.x[2]}, b{p.x[3], p.x[4], p.x[5]}, c2{p.x[6], p.x[7], p.x[8]};
        RayTriWitness ww = ray_triangle_distance_witness(ray, a, b, c2);
        Vec3 g[3];
        accumulate_d2_vertex_grads(ww, 1.0, g[0], g[1], g[2]);
        ParamVector out = p.zeros_like();
        for (int k = 0; k < 3; ++k)
          for (int d = 0; d < 3; ++d) out.x[3 * k + d] = g[k][d];
        return out;
      };
      GradReport rep = gradcheck(loss, at, 1e-6, 1e-4);
      if (rep.max_rel_err > worst) {
        worst = rep.max_rel_err;
        agg = rep;
      }
    }
    agg.max_rel_err = worst;
    record("ray_triangle_d2/vertices", agg, 1e-4);
  }

  // sphere-trace depth vs shape translation
  {
    double worst = 0;
    GradReport agg;
    for (int c = 0; c < 10; ++c) {
      Se3Scale pl(Quat::from_axis_angle(Vec3{u(rng), u(rng), u(rng)} * 0.5),
                  Vec3{0.2 * u(rng), 0.2 * u(rng), 2.0 + 0.3 * u(rng)}, 1.0);
      SdfShape shape = c % 2 == 0 ? make_sphere(0.5, pl)
                                  : make_rounded_box({0.4, 0.3, 0.25}, 0.05, pl);
      Ray ray(Vec3{0.05 * u(rng), 0.05 * u(rng), 0}, Vec3{0.1 * u(rng), 0.1 * u(rng), 1.0});
      ParamVector at;
      const Vec3& t = shape.placement.translation;
      at.append("translation", {t.x, t.y, t.z});
      auto depth_of = [&](const ParamVector& p) {
        SdfShape sh = shape;
        sh.placement.translation = {p.x[0], p.x[1], p.x[2]};
        SdfHit h = sphere_trace(sh, ray, 256, 1e-10, 50.0);
        if (!h.converged) throw std::runtime_error("gradcheck ray missed");
        return h.depth;
      };
      DiffLoss loss;
      loss.value = depth_of;
      loss.gradient = [&](const ParamVector& p) {
        SdfShape sh = shape;
        sh.placement.translation = {p.x[0], p.x[1], p.x[2]};
        SdfHit h = sphere_trace(sh, ray, 256, 1e-10, 50.0);
        if (!h.converged) throw std::runtime_error("gradcheck ray missed");
        Vec3 gw = sdf_gradient(sh, h.point);
        double denom = dot(gw, ray.dir);
        SdfParamGrad pg = sdf_param_grad(sh, h.point);
        ParamVector out = p.zeros_like();
        for (int d = 0; d < 3; ++d) out.x[d] = -pg.d_translation[d] / denom;
        return out;
      };
      GradReport rep = gradcheck(loss, at, 1e-6, 1e-3);
      if (rep.max_rel_err > worst) {
        worst = rep.max_rel_err;
        agg = rep;
      }
    }
    agg.max_rel_err = worst;
    record("trace_depth/translation", agg, 1e-3);
  }

  // full silhouette loss vs emitter translation on a plane-mirror fixture
  {
    Camera cam(40.0, 40.0, 16.0, 16.0, 32, 32, Se3Scale());
    std::vector<SdfShape> mirrors = {
        make_rounded_box({0.6, 0.6, 0.005}, 0.002, Se3Scale(Quat(), {0, 0, 0.9}, 1.0))};
    RenderConfig rc;
    rc.sigma = 1e-3;
    rc.trace_eps = 1e-6;
    rc.sphere_steps = 128;
    rc.edge_sampling = false;
    ReflectionCache cache = build_reflection_cache(mirrors, cam, rc);

    EmitterModel em;
    em.skeleton = default17_skeleton();
    em.pose.assign(3 * (em.skeleton.size() - 1), 0.0);
    em.placement = Se3Scale(Quat::from_axis_angle(Vec3{0, 0.4, 0}), {0.3, 0.0, 0.4}, 0.3);

    EmitterModel shifted = em;
    shifted.placement.translation = shifted.placement.translation + Vec3{0.03, -0.02, 0.01};
    SoftImage observed = render_hard_silhouette(cache, emitter_forward(shifted).mesh);

    std::vector<PixelRC> pixels;
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) pixels.push_back({x, y});
    std::vector<double> obs_vals(pixels.size());
    for (size_t i = 0; i < pixels.size(); ++i) obs_vals[i] = observed.at(pixels[i].x, pixels[i].y);

    ParamVector at;
    const Vec3& t = em.placement.translation;
    at.append("translation", {t.x, t.y, t.z});
    auto render_vals = [&](const EmitterModel& m, ReflectionRender* keep) {
      EmitterForward fwd = emitter_forward(m);
      ReflectionRender rr = render_reflection_sampled(cache, fwd, cam, rc, &pixels, keep != nullptr);
      if (keep) *keep = rr;
      return rr.values;
    };
    DiffLoss loss;
    loss.value = [&](const ParamVector& p) {
      EmitterModel m = em;
      m.placement.translation = {p.x[0], p.x[1], p.x[2]};
      return loss_silhouette_sampled(render_vals(m, nullptr), obs_vals, nullptr);
    };
    loss.gradient = [&](const ParamVector& p) {
      EmitterModel m = em;
      m.placement.translation = {p.x[0], p.x[1], p.x[2]};
      EmitterForward fwd = emitter_forward(m);
      ReflectionRender rr = render_reflection_sampled(cache, fwd, cam, rc, &pixels, true);
      std::vector<double> d_vals;
      loss_silhouette_sampled(rr.values, obs_vals, &d_vals);
      std::vector<Vec3> dv = reflection_backward(rr, fwd, d_vals);
      EmitterGrads eg = emitter_backward(m, fwd, dv);
      ParamVector out = p.zeros_like();
      for (int d = 0; d < 3; ++d) out.x[d] = eg.d_translation[d];
      return out;
    };
    GradReport rep = gradcheck(loss, at, 1e-6, 1e-2);
    record("silhouette_loss/translation", rep, 1e-2);
  }

  save_csv(out + "/gradcheck.csv", {"family", "coordinate", "analytic", "numeric", "rel_err"},
           rows);
  std::printf("wrote gradcheck.csv (%zu rows)\n", rows.size());
  return all_pass ? 0 : 1;
}

int cmd_ablate(const std::string& scene_path, const std::string& out,
               const std::optional<uint64_t>& seed, std::vector<std::string> variants) {
  Scene s = load_scene(scene_path, seed);
  if (variants.empty())
    variants = {"full", "no_edge_sampling", "sphere_steps_1", "no_smoothing"};
  std::vector<AblationRow> table = ablate_run(s, variants);
  std::filesystem::create_directories(out);
  std::vector<std::vector<std::string>> rows;
  for (const AblationRow& r : table) {
    rows.push_back({r.variant, num(r.metric.mean_norm_err), num(r.metric.mean_err),
                    num(r.metric.norm_const), num(r.metric.iou), num(r.final_loss),
                    r.failed ? "1" : "0"});
    std::printf("%-18s mean_norm_err %-12.6g iou %-10.6g loss %-12.6g%s\n", r.variant.c_str(),
                r.metric.mean_norm_err, r.metric.iou, r.final_loss, r.failed ? " FAILED" : "");
  }
  save_csv(out + "/ablation.csv",
           {"variant", "mean_norm_err", "mean_err", "norm_const", "iou", "final_loss", "failed"},
           rows);
  return 0;
}

int cmd_export_mesh(const std::string& scene_path, const std::string& out, int resolution) {
  Scene s = parse_scene(scene_path);
  std::filesystem::create_directories(out);
  for (size_t i = 0; i < s.objects.size(); ++i) {
    const SdfShape& sh = s.objects[i].shape;
    double local_r = 0;
    switch (sh.family) {
      case SdfFamily::Sphere: local_r = sh.latent[0]; break;
      case SdfFamily::Ellipsoid:
        local_r = std::max({sh.latent[0], sh.latent[1], sh.latent[2]});
        break;
      case SdfFamily::RoundedBox:
        local_r = norm(Vec3{sh.latent[0], sh.latent[1], sh.latent[2]}) + sh.latent[3];
        break;
      case SdfFamily::Bowl: local_r = sh.latent[0]; break;
      case SdfFamily::Grid:
        local_r = std::max(norm(sh.grid.bmin), norm(sh.grid.bmax));
        break;
    }
    double half = sh.placement.scale * local_r * 1.1 + 1e-6;
    Vec3 c = sh.placement.translation;
    TriMesh mesh = marching_cubes(sh, c - Vec3{half, half, half}, c + Vec3{half, half, half},
                                  resolution);
    std::string path = out + "/object_" + std::to_string(i) + ".obj";
    export_obj(path, mesh);
    std::printf("object %zu: %zu vertices, %zu triangles -> %s\n", i, mesh.vertices.size(),
                mesh.triangles.size(), path.c_str());
  }
  if (s.emitter) {
    EmitterForward fwd = emitter_forward(s.emitter->model);
    export_obj(out + "/emitter.obj", fwd.mesh);
    std::printf("emitter: %zu vertices, %zu triangles -> emitter.obj\n", fwd.mesh.vertices.size(),
                fwd.mesh.triangles.size());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SDF mirror renderer and analysis-by-synthesis fitter"};
  app.require_subcommand(1);

  std::string scene_path, out_dir = ".";
  std::optional<uint64_t> seed;
  int threads = 1;
  int resolution = 48;
  double depth_noise = 0.0, hole_frac = 0.0;
  std::string preset;
  std::vector<std::string> variants;

  auto add_common = [&](CLI::App* cmd, bool needs_scene) {
    if (needs_scene)
      cmd->add_option("--scene", scene_path, "scene file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--seed", seed, "override the scene seed");
    cmd->add_option("--threads", threads, "worker threads (current build runs single-threaded)")
        ->check(CLI::PositiveNumber);
  };

  CLI::App* render = app.add_subcommand("render", "render the scene as declared");
  add_common(render, true);
  CLI::App* fit_obj = app.add_subcommand("fit-object", "fit object pose/scale/shape to depth+masks");
  add_common(fit_obj, true);
  CLI::App* fit_hum = app.add_subcommand("fit-human", "fit emitter placement/pose to the silhouette");
  add_common(fit_hum, true);
  CLI::App* gradchk = app.add_subcommand("gradcheck", "finite-difference audit of the gradients");
  add_common(gradchk, false);
  CLI::App* ablate = app.add_subcommand("ablate", "run fit-human across ablation variants");
  add_common(ablate, true);
  ablate->add_option("--variant", variants,
                     "variants to run (full, no_edge_sampling, sphere_steps_1, no_smoothing)");
  CLI::App* exportm = app.add_subcommand("export-mesh", "extract zero-surface meshes to OBJ");
  exportm->add_option("--scene", scene_path, "scene file")->required()->check(CLI::ExistingFile);
  exportm->add_option("--out", out_dir, "output directory");
  exportm->add_option("--resolution", resolution, "marching grid resolution")
      ->check(CLI::Range(2, 512));
  CLI::App* makes = app.add_subcommand("make-synthetic", "generate a synthetic scene with ground truth");
  makes->add_option("--preset", preset, "one of: object-bowl, object-box, plane-mirror, panel-mirror, bowl-mirror")
      ->required();
  makes->add_option("--out", out_dir, "output directory")->required();
  makes->add_option("--seed", seed, "generation seed");
  makes->add_option("--depth-noise", depth_noise, "gaussian depth noise sigma in meters")
      ->check(CLI::NonNegativeNumber);
  makes->add_option("--hole-frac", hole_frac, "fraction of depth pixels dropped to the sentinel")
      ->check(CLI::Range(0.0, 0.999));

  CLI11_PARSE(app, argc, argv);

  try {
    if (render->parsed()) return cmd_render(scene_path, out_dir, seed);
    if (fit_obj->parsed()) return cmd_fit_object(scene_path, out_dir, seed);
    if (fit_hum->parsed()) return cmd_fit_human(scene_path, out_dir, seed);
    if (gradchk->parsed()) return cmd_gradcheck(out_dir, seed.value_or(42));
    if (ablate->parsed()) return cmd_ablate(scene_path, out_dir, seed, variants);
    if (exportm->parsed()) return cmd_export_mesh(scene_path, out_dir, resolution);
    if (makes->parsed()) {
      make_synthetic(preset, out_dir, seed.value_or(42), depth_noise, hole_frac);
      std::printf("wrote %s scene to %s\n", preset.c_str(), out_dir.c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
