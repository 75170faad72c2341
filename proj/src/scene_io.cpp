#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mirrorpose/scene.hpp"

namespace mirrorpose {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void fail(const std::string& path, int line, const std::string& msg) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + msg);
}

struct KvParser {
  const std::string& path;
  int line = 0;

  double num(const std::string& v, const std::string& key) const {
    try {
      size_t used = 0;
      double d = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument("");
      return d;
    } catch (...) {
      fail(path, line, "bad number '" + v + "' for " + key);
    }
  }
  int integer(const std::string& v, const std::string& key) const {
    double d = num(v, key);
    int i = static_cast<int>(d);
    if (d != i) fail(path, line, key + " must be an integer");
    return i;
  }
  bool boolean(const std::string& v, const std::string& key) const {
    if (v == "true") return true;
    if (v == "false") return false;
    fail(path, line, key + " must be true or false");
  }
  std::vector<double> nums(const std::string& v, const std::string& key, int want = -1) const {
    std::istringstream is(v);
    std::vector<double> out;
    std::string tok;
    while (is >> tok) out.push_back(num(tok, key));
    if (want >= 0 && static_cast<int>(out.size()) != want)
      fail(path, line, key + " needs " + std::to_string(want) + " values, got " +
                           std::to_string(out.size()));
    return out;
  }
  Vec3 vec3(const std::string& v, const std::string& key) const {
    auto n = nums(v, key, 3);
    return {n[0], n[1], n[2]};
  }
  Quat quat(const std::string& v, const std::string& key) const {
    auto n = nums(v, key, 4);
    try {
      return Quat(n[0], n[1], n[2], n[3]).normalized();
    } catch (const std::exception& e) {
      fail(path, line, std::string(key) + ": " + e.what());
    }
  }
};

std::string dirname_of(const std::string& path) {
  size_t p = path.find_last_of('/');
  return p == std::string::npos ? std::string(".") : path.substr(0, p);
}

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string fmt_vec(const Vec3& v) { return fmt(v.x) + " " + fmt(v.y) + " " + fmt(v.z); }
std::string fmt_quat(const Quat& q) {
  return fmt(q.w) + " " + fmt(q.x) + " " + fmt(q.y) + " " + fmt(q.z);
}

struct PendingObject {
  SceneObject obj;
  bool has_family = false, has_latent = false;
  std::vector<double> latent;
  int line = 0;
};

struct PendingEmitter {
  SceneEmitter em;
  std::vector<Joint> joints;
  std::vector<double> pose;
  std::string skeleton = "default17";
  int segments = 8;
  Vec3 position{0, 0, 0};
  Quat rotation;
  double scale = 1.0;
  bool present = false;
};

}  // namespace

Scene parse_scene(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open scene '" + path + "'");
  Scene scene;
  scene.dir = dirname_of(path);

  enum class Sec { Top, Camera, Render, Fit, Observations, Object, Emitter };
  Sec sec = Sec::Top;
  KvParser kv{path};

  // camera fields gathered before construction
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;
  Vec3 cam_pos{0, 0, 0};
  Quat cam_rot;
  bool have_camera_section = false;

  std::vector<PendingObject> objects;
  PendingEmitter pe;
  bool seen_version = false;

  std::string line;
  int lineno = 0;
  auto finish_object = [&](PendingObject& po) {
    if (!po.has_family) fail(path, po.line, "[[objects]] block missing 'family'");
    if (po.obj.shape.family == SdfFamily::Grid) {
      if (po.obj.grid_path.empty()) fail(path, po.line, "grid object needs 'grid_file'");
      if (po.has_latent) fail(path, po.line, "grid objects take values from 'grid_file', not 'latent'");
    } else {
      if (!po.has_latent) fail(path, po.line, "[[objects]] block missing 'latent'");
      po.obj.shape.latent = po.latent;
      try {
        po.obj.shape.validate();
      } catch (const std::exception& e) {
        fail(path, po.line, e.what());
      }
    }
  };

  while (std::getline(f, line)) {
    ++lineno;
    kv.line = lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;

    if (t == "[[objects]]") {
      if (!objects.empty()) finish_object(objects.back());
      objects.emplace_back();
      objects.back().line = lineno;
      sec = Sec::Object;
      continue;
    }
    if (t[0] == '[') {
      if (!objects.empty() && sec == Sec::Object) finish_object(objects.back());
      if (t == "[camera]") {
        sec = Sec::Camera;
        have_camera_section = true;
      } else if (t == "[render]")
        sec = Sec::Render;
      else if (t == "[fit]")
        sec = Sec::Fit;
      else if (t == "[observations]")
        sec = Sec::Observations;
      else if (t == "[emitter]") {
        sec = Sec::Emitter;
        pe.present = true;
      } else
        fail(path, lineno, "unknown section " + t);
      continue;
    }

    size_t eq = t.find('=');
    if (eq == std::string::npos) fail(path, lineno, "expected 'key = value', got '" + t + "'");
    std::string key = trim(t.substr(0, eq));
    std::string val = trim(t.substr(eq + 1));
    if (key.empty()) fail(path, lineno, "empty key");
    if (val.empty()) fail(path, lineno, "empty value for '" + key + "'");

    switch (sec) {
      case Sec::Top: {
        if (key == "version") {
          int v = kv.integer(val, key);
          if (v != 1) fail(path, lineno, "unsupported version " + std::to_string(v));
          scene.version = v;
          seen_version = true;
        } else if (key == "seed") {
          scene.seed = static_cast<uint64_t>(kv.num(val, key));
        } else {
          fail(path, lineno, "unknown top-level key '" + key + "'");
        }
        break;
      }
      case Sec::Camera: {
        if (key == "fx") fx = kv.num(val, key);
        else if (key == "fy") fy = kv.num(val, key);
        else if (key == "cx") cx = kv.num(val, key);
        else if (key == "cy") cy = kv.num(val, key);
        else if (key == "width") width = kv.integer(val, key);
        else if (key == "height") height = kv.integer(val, key);
        else if (key == "position") cam_pos = kv.vec3(val, key);
        else if (key == "rotation") cam_rot = kv.quat(val, key);
        else fail(path, lineno, "unknown key '" + key + "' in [camera]");
        break;
      }
      case Sec::Render: {
        RenderConfig& r = scene.render;
        if (key == "sigma") r.sigma = kv.num(val, key);
        else if (key == "influence_cutoff") r.influence_cutoff = kv.num(val, key);
        else if (key == "sphere_steps") r.sphere_steps = kv.integer(val, key);
        else if (key == "trace_eps") r.trace_eps = kv.num(val, key);
        else if (key == "t_max") r.t_max = kv.num(val, key);
        else if (key == "smoothing") r.smoothing = kv.boolean(val, key);
        else if (key == "smooth_delta") r.smooth_delta = kv.num(val, key);
        else if (key == "mask_sigma") r.mask_sigma = kv.num(val, key);
        else if (key == "edge_sampling") r.edge_sampling = kv.boolean(val, key);
        else if (key == "ray_budget") r.ray_budget = kv.integer(val, key);
        else if (key == "uniform_floor") r.uniform_floor = kv.num(val, key);
        else if (key == "uniform_decay_iters") r.uniform_decay_iters = kv.num(val, key);
        else if (key == "edge_std0") r.edge_std0 = kv.num(val, key);
        else if (key == "edge_std_decay") r.edge_std_decay = kv.num(val, key);
        else if (key == "edge_std_floor") r.edge_std_floor = kv.num(val, key);
        else fail(path, lineno, "unknown key '" + key + "' in [render]");
        break;
      }
      case Sec::Fit: {
        FitConfig& c = scene.fit;
        if (key == "lr") c.lr = kv.num(val, key);
        else if (key == "beta1") c.beta1 = kv.num(val, key);
        else if (key == "beta2") c.beta2 = kv.num(val, key);
        else if (key == "epsilon") c.eps = kv.num(val, key);
        else if (key == "iters_object") c.iters_object = kv.integer(val, key);
        else if (key == "iters_human") c.iters_human = kv.integer(val, key);
        else if (key == "restarts_object") c.restarts_object = kv.integer(val, key);
        else if (key == "restarts_human") c.restarts_human = kv.integer(val, key);
        else if (key == "w_depth") c.w_depth = kv.num(val, key);
        else if (key == "w_mask") c.w_mask = kv.num(val, key);
        else if (key == "w_prior_object") c.w_prior_object = kv.num(val, key);
        else if (key == "w_prior_human") c.w_prior_human = kv.num(val, key);
        else if (key == "depth_cap") c.depth_cap = kv.num(val, key);
        else if (key == "sigma0") c.sigma0 = kv.num(val, key);
        else if (key == "sigma_floor") c.sigma_floor = kv.num(val, key);
        else if (key == "sigma_anneal_every") c.sigma_anneal_every = kv.integer(val, key);
        else if (key == "sigma_anneal_factor") c.sigma_anneal_factor = kv.num(val, key);
        else fail(path, lineno, "unknown key '" + key + "' in [fit]");
        break;
      }
      case Sec::Observations: {
        if (key == "depth") scene.obs.depth_path = val;
        else if (key == "silhouette") scene.obs.silhouette_path = val;
        else if (key == "gt_joints") scene.obs.gt_joints_path = val;
        else fail(path, lineno, "unknown key '" + key + "' in [observations]");
        break;
      }
      case Sec::Object: {
        PendingObject& po = objects.back();
        SceneObject& o = po.obj;
        if (key == "name") o.shape.name = val;
        else if (key == "family") {
          try {
            o.shape.family = family_from_name(val);
          } catch (const std::exception& e) {
            fail(path, lineno, e.what());
          }
          po.has_family = true;
        } else if (key == "latent") {
          po.latent = kv.nums(val, key);
          po.has_latent = true;
        } else if (key == "position") o.shape.placement.translation = kv.vec3(val, key);
        else if (key == "rotation") o.shape.placement.rotation = kv.quat(val, key);
        else if (key == "scale") {
          double s = kv.num(val, key);
          if (!(s > 0)) fail(path, lineno, "scale must be positive");
          o.shape.placement.scale = s;
        } else if (key == "optimize") {
          if (val == "none") o.optimize_pose = o.optimize_shape = false;
          else if (val == "pose") o.optimize_pose = true, o.optimize_shape = false;
          else if (val == "pose+shape") o.optimize_pose = o.optimize_shape = true;
          else fail(path, lineno, "optimize must be none, pose, or pose+shape");
        } else if (key == "mask") o.mask_path = val;
        else if (key == "grid_file") o.grid_path = val;
        else if (key == "init_center") {
          o.init.center = kv.vec3(val, key);
          o.init.center_set = true;
        } else if (key == "init_extent") o.init.extent = kv.vec3(val, key);
        else if (key == "init_rot_max_deg") o.init.rot_max_deg = kv.num(val, key);
        else if (key == "init_scale_min") o.init.scale_min = kv.num(val, key);
        else if (key == "init_scale_max") o.init.scale_max = kv.num(val, key);
        else if (key == "init_latent_rel") o.init.latent_rel = kv.num(val, key);
        else fail(path, lineno, "unknown key '" + key + "' in [[objects]]");
        break;
      }
      case Sec::Emitter: {
        if (key == "skeleton") {
          if (val != "default17" && val != "custom")
            fail(path, lineno, "skeleton must be default17 or custom");
          pe.skeleton = val;
        } else if (key == "joint") {
          std::istringstream is(val);
          Joint j;
          std::string parent_tok;
          if (!(is >> j.name >> parent_tok >> j.offset.x >> j.offset.y >> j.offset.z >> j.radius))
            fail(path, lineno, "joint needs: name parent ox oy oz radius");
          j.parent = parent_tok == "-" ? -1 : kv.integer(parent_tok, "joint parent");
          pe.joints.push_back(j);
        } else if (key == "segments") pe.segments = kv.integer(val, key);
        else if (key == "pose") pe.pose = kv.nums(val, key);
        else if (key == "position") pe.position = kv.vec3(val, key);
        else if (key == "rotation") pe.rotation = kv.quat(val, key);
        else if (key == "scale") pe.scale = kv.num(val, key);
        else if (key == "init_center") {
          pe.em.init.center = kv.vec3(val, key);
          pe.em.init.center_set = true;
        } else if (key == "init_extent") pe.em.init.extent = kv.vec3(val, key);
        else if (key == "init_rot_max_deg") pe.em.init.rot_max_deg = kv.num(val, key);
        else if (key == "init_pose_std") pe.em.init.pose_std = kv.num(val, key);
        else fail(path, lineno, "unknown key '" + key + "' in [emitter]");
        break;
      }
    }
  }
  if (!objects.empty() && sec == Sec::Object) finish_object(objects.back());
  if (!seen_version) throw std::runtime_error(path + ": missing 'version'");
  if (!have_camera_section) throw std::runtime_error(path + ": missing [camera]");
  try {
    scene.camera = Camera(fx, fy, cx, cy, width, height, Se3Scale(cam_rot, cam_pos, 1.0));
    scene.render.validate();
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  scene.fit.seed = scene.seed;

  // Attach objects, loading grid payloads. Absolute paths bypass the scene dir.
  auto resolve = [&](const std::string& rel) {
    return rel.size() && rel[0] == '/' ? rel : scene.dir + "/" + rel;
  };
  for (PendingObject& po : objects) {
    if (po.obj.shape.family == SdfFamily::Grid) {
      SdfShape g = load_sdf_grid(resolve(po.obj.grid_path), po.obj.shape.placement);
      g.name = po.obj.shape.name;
      po.obj.shape = g;
    }
    scene.objects.push_back(std::move(po.obj));
  }

  if (pe.present) {
    SceneEmitter se = pe.em;
    se.skeleton_name = pe.skeleton;
    if (pe.skeleton == "default17") {
      if (!pe.joints.empty())
        throw std::runtime_error(path + ": joint lines conflict with skeleton = default17");
      se.model.skeleton = default17_skeleton();
    } else {
      se.model.skeleton.joints = pe.joints;
      se.model.skeleton.validate();
    }
    se.model.segments = pe.segments;
    int want = 3 * (se.model.skeleton.size() - 1);
    if (pe.pose.empty()) pe.pose.assign(want, 0.0);
    if (static_cast<int>(pe.pose.size()) != want)
      throw std::runtime_error(path + ": pose needs " + std::to_string(want) + " values");
    se.model.pose = pe.pose;
    se.model.placement = Se3Scale(pe.rotation, pe.position, pe.scale);
    se.model.validate();
    scene.emitter = std::move(se);
  }

  // Observations; referenced files must exist now.
  if (!scene.obs.depth_path.empty()) {
    scene.obs.depth = load_pfm(resolve(scene.obs.depth_path));
    if (scene.obs.depth.width != width || scene.obs.depth.height != height)
      throw std::runtime_error(path + ": depth observation dims differ from camera");
    scene.obs.has_depth = true;
  }
  if (!scene.obs.silhouette_path.empty()) {
    scene.obs.silhouette = load_pgm(resolve(scene.obs.silhouette_path));
    if (scene.obs.silhouette.width != width || scene.obs.silhouette.height != height)
      throw std::runtime_error(path + ": silhouette observation dims differ from camera");
    scene.obs.has_silhouette = true;
  }
  if (!scene.obs.gt_joints_path.empty()) load_joints_csv(resolve(scene.obs.gt_joints_path));
  scene.obs.masks.assign(scene.objects.size(), SoftImage());
  scene.obs.has_mask.assign(scene.objects.size(), 0);
  for (size_t i = 0; i < scene.objects.size(); ++i) {
    if (scene.objects[i].mask_path.empty()) continue;
    scene.obs.masks[i] = load_pgm(resolve(scene.objects[i].mask_path));
    if (scene.obs.masks[i].width != width || scene.obs.masks[i].height != height)
      throw std::runtime_error(path + ": mask dims differ from camera for object " +
                               std::to_string(i));
    scene.obs.has_mask[i] = 1;
  }
  scene.validate();
  return scene;
}

void Scene::validate() const {
  if (version != 1) throw std::invalid_argument("Scene: unsupported version");
  if (camera.width <= 0 || camera.height <= 0) throw std::invalid_argument("Scene: camera not set");
  render.validate();
  for (const auto& o : objects) o.shape.validate();
  if (emitter) emitter->model.validate();
  if (obs.has_depth &&
      obs.depth.values.size() != static_cast<size_t>(camera.width) * camera.height)
    throw std::invalid_argument("Scene: depth dims mismatch");
}

std::string serialize_scene(const Scene& scene) {
  std::ostringstream out;
  out << "version = " << scene.version << "\n";
  out << "seed = " << scene.seed << "\n";
  out << "\n[camera]\n";
  out << "fx = " << fmt(scene.camera.fx) << "\n";
  out << "fy = " << fmt(scene.camera.fy) << "\n";
  out << "cx = " << fmt(scene.camera.cx) << "\n";
  out << "cy = " << fmt(scene.camera.cy) << "\n";
  out << "width = " << scene.camera.width << "\n";
  out << "height = " << scene.camera.height << "\n";
  out << "position = " << fmt_vec(scene.camera.pose.translation) << "\n";
  out << "rotation = " << fmt_quat(scene.camera.pose.rotation) << "\n";

  const RenderConfig& r = scene.render;
  out << "\n[render]\n";
  out << "sigma = " << fmt(r.sigma) << "\n";
  out << "influence_cutoff = " << fmt(r.influence_cutoff) << "\n";
  out << "sphere_steps = " << r.sphere_steps << "\n";
  out << "trace_eps = " << fmt(r.trace_eps) << "\n";
  out << "t_max = " << fmt(r.t_max) << "\n";
  out << "smoothing = " << (r.smoothing ? "true" : "false") << "\n";
  out << "smooth_delta = " << fmt(r.smooth_delta) << "\n";
  out << "mask_sigma = " << fmt(r.mask_sigma) << "\n";
  out << "edge_sampling = " << (r.edge_sampling ? "true" : "false") << "\n";
  out << "ray_budget = " << r.ray_budget << "\n";
  out << "uniform_floor = " << fmt(r.uniform_floor) << "\n";
  out << "uniform_decay_iters = " << fmt(r.uniform_decay_iters) << "\n";
  out << "edge_std0 = " << fmt(r.edge_std0) << "\n";
  out << "edge_std_decay = " << fmt(r.edge_std_decay) << "\n";
  out << "edge_std_floor = " << fmt(r.edge_std_floor) << "\n";

  const FitConfig& c = scene.fit;
  out << "\n[fit]\n";
  out << "lr = " << fmt(c.lr) << "\n";
  out << "beta1 = " << fmt(c.beta1) << "\n";
  out << "beta2 = " << fmt(c.beta2) << "\n";
  out << "epsilon = " << fmt(c.eps) << "\n";
  out << "iters_object = " << c.iters_object << "\n";
  out << "iters_human = " << c.iters_human << "\n";
  out << "restarts_object = " << c.restarts_object << "\n";
  out << "restarts_human = " << c.restarts_human << "\n";
  out << "w_depth = " << fmt(c.w_depth) << "\n";
  out << "w_mask = " << fmt(c.w_mask) << "\n";
  out << "w_prior_object = " << fmt(c.w_prior_object) << "\n";
  out << "w_prior_human = " << fmt(c.w_prior_human) << "\n";
  out << "depth_cap = " << fmt(c.depth_cap) << "\n";
  out << "sigma0 = " << fmt(c.sigma0) << "\n";
  out << "sigma_floor = " << fmt(c.sigma_floor) << "\n";
  out << "sigma_anneal_every = " << c.sigma_anneal_every << "\n";
  out << "sigma_anneal_factor = " << fmt(c.sigma_anneal_factor) << "\n";

  if (!scene.obs.depth_path.empty() || !scene.obs.silhouette_path.empty() ||
      !scene.obs.gt_joints_path.empty()) {
    out << "\n[observations]\n";
    if (!scene.obs.depth_path.empty()) out << "depth = " << scene.obs.depth_path << "\n";
    if (!scene.obs.silhouette_path.empty())
      out << "silhouette = " << scene.obs.silhouette_path << "\n";
    if (!scene.obs.gt_joints_path.empty())
      out << "gt_joints = " << scene.obs.gt_joints_path << "\n";
  }

  for (const SceneObject& o : scene.objects) {
    out << "\n[[objects]]\n";
    if (!o.shape.name.empty()) out << "name = " << o.shape.name << "\n";
    out << "family = " << family_name(o.shape.family) << "\n";
    if (o.shape.family == SdfFamily::Grid) {
      out << "grid_file = " << o.grid_path << "\n";
    } else {
      out << "latent =";
      for (double v : o.shape.latent) out << " " << fmt(v);
      out << "\n";
    }
    out << "position = " << fmt_vec(o.shape.placement.translation) << "\n";
    out << "rotation = " << fmt_quat(o.shape.placement.rotation) << "\n";
    out << "scale = " << fmt(o.shape.placement.scale) << "\n";
    out << "optimize = "
        << (o.optimize_shape ? "pose+shape" : (o.optimize_pose ? "pose" : "none")) << "\n";
    if (!o.mask_path.empty()) out << "mask = " << o.mask_path << "\n";
    if (o.init.center_set) out << "init_center = " << fmt_vec(o.init.center) << "\n";
    out << "init_extent = " << fmt_vec(o.init.extent) << "\n";
    out << "init_rot_max_deg = " << fmt(o.init.rot_max_deg) << "\n";
    out << "init_scale_min = " << fmt(o.init.scale_min) << "\n";
    out << "init_scale_max = " << fmt(o.init.scale_max) << "\n";
    out << "init_latent_rel = " << fmt(o.init.latent_rel) << "\n";
  }

  if (scene.emitter) {
    const SceneEmitter& e = *scene.emitter;
    out << "\n[emitter]\n";
    out << "skeleton = " << e.skeleton_name << "\n";
    if (e.skeleton_name == "custom") {
      for (const Joint& j : e.model.skeleton.joints)
        out << "joint = " << j.name << " " << (j.parent < 0 ? std::string("-") : std::to_string(j.parent))
            << " " << fmt_vec(j.offset) << " " << fmt(j.radius) << "\n";
    }
    out << "segments = " << e.model.segments << "\n";
    out << "position = " << fmt_vec(e.model.placement.translation) << "\n";
    out << "rotation = " << fmt_quat(e.model.placement.rotation) << "\n";
    out << "scale = " << fmt(e.model.placement.scale) << "\n";
    out << "pose =";
    for (double v : e.model.pose) out << " " << fmt(v);
    out << "\n";
    if (e.init.center_set) out << "init_center = " << fmt_vec(e.init.center) << "\n";
    out << "init_extent = " << fmt_vec(e.init.extent) << "\n";
    out << "init_rot_max_deg = " << fmt(e.init.rot_max_deg) << "\n";
    out << "init_pose_std = " << fmt(e.init.pose_std) << "\n";
  }
  return out.str();
}

void save_scene(const Scene& scene, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  f << serialize_scene(scene);
  if (!f) throw std::runtime_error("short write to '" + path + "'");
}

}  // namespace mirrorpose
