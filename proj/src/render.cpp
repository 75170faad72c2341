#include "mirrorpose/render.hpp"

#include <algorithm>
#include <cmath>

namespace mirrorpose {

void RenderConfig::validate() const {
  if (!(sigma > 0)) throw std::invalid_argument("RenderConfig: sigma must be positive");
  if (sphere_steps < 1) throw std::invalid_argument("RenderConfig: sphere_steps must be >= 1");
  if (!(trace_eps > 0)) throw std::invalid_argument("RenderConfig: trace_eps must be positive");
  if (!(t_max > 0)) throw std::invalid_argument("RenderConfig: t_max must be positive");
  if (!(mask_sigma > 0)) throw std::invalid_argument("RenderConfig: mask_sigma must be positive");
  if (ray_budget < 1) throw std::invalid_argument("RenderConfig: ray_budget must be >= 1");
  if (!(influence_cutoff > 0)) throw std::invalid_argument("RenderConfig: influence_cutoff must be positive");
  if (!(uniform_floor >= 0) || uniform_floor > 1)
    throw std::invalid_argument("RenderConfig: uniform_floor must be in [0, 1]");
  if (!(edge_std_floor > 0) || !(edge_std0 > 0) || !(edge_std_decay > 0) || edge_std_decay > 1)
    throw std::invalid_argument("RenderConfig: bad edge sampling schedule");
}

bool SoftImage::is_binary() const {
  for (double v : values)
    if (std::abs(v) > 1e-12 && std::abs(v - 1.0) > 1e-12) return false;
  return true;
}

Vec3 reflect(const Vec3& r, const Vec3& n) {
  if (!finite(r) || !finite(n)) throw std::invalid_argument("reflect: non-finite input");
  double nn = norm(n);
  if (nn < 1e-300) throw std::invalid_argument("reflect: zero normal");
  Vec3 nh = n / nn;
  return r - nh * (2.0 * dot(r, nh));
}

namespace {
inline double stable_sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}
}  // namespace

double soft_influence(double dist, double lambda, double sigma) {
  if (!(sigma > 0)) throw std::invalid_argument("soft_influence: sigma must be positive");
  if (lambda != 1.0 && lambda != -1.0)
    throw std::invalid_argument("soft_influence: lambda must be +1 or -1");
  if (!(dist >= 0) || !std::isfinite(dist))
    throw std::invalid_argument("soft_influence: distance must be finite and non-negative");
  return stable_sigmoid(lambda * dist * dist / sigma);
}

double aggregate_occupancy(const std::vector<double>& influences) {
  double keep = 1.0;
  for (double x : influences) {
    if (!(x >= 0.0) || !(x <= 1.0))
      throw std::invalid_argument("aggregate_occupancy: influence outside [0, 1]");
    keep *= 1.0 - x;
  }
  return 1.0 - keep;
}

namespace {

Ray camera_ray_f(const Camera& cam, double fx, double fy) {
  double u = (fx - cam.cx) / cam.fx;
  double v = (fy - cam.cy) / cam.fy;
  return Ray(cam.pose.translation, cam.pose.rotation.rotate({u, v, 1.0}));
}

Vec3 smoothed_normal_at(const SdfShape& shape, const Camera& cam, int px, int py,
                        const RenderConfig& cfg, const SdfHit& center) {
  Vec3 acc = center.normal;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) {
      if (dx == 0 && dy == 0) continue;
      Ray r = camera_ray_f(cam, px + 0.5 + dx * cfg.smooth_delta, py + 0.5 + dy * cfg.smooth_delta);
      SdfHit h = sphere_trace(shape, r, cfg.sphere_steps, cfg.trace_eps, cfg.t_max);
      if (h.converged) acc += h.normal;
    }
  double n = norm(acc);
  return n > 1e-12 ? acc / n : center.normal;
}

}  // namespace

Vec3 smoothed_normal(const SdfShape& shape, const Camera& cam, int px, int py,
                     const RenderConfig& cfg) {
  cfg.validate();
  Ray r = camera_ray(cam, px, py);
  SdfHit h = sphere_trace(shape, r, cfg.sphere_steps, cfg.trace_eps, cfg.t_max);
  if (!h.converged)
    throw std::invalid_argument("smoothed_normal: center ray does not hit the shape");
  return smoothed_normal_at(shape, cam, px, py, cfg, h);
}

ReflectionCache build_reflection_cache(const std::vector<SdfShape>& mirrors, const Camera& cam,
                                       const RenderConfig& cfg) {
  cfg.validate();
  ReflectionCache c;
  c.width = cam.width;
  c.height = cam.height;
  size_t n = static_cast<size_t>(cam.width) * cam.height;
  c.valid.assign(n, 0);
  c.rays.assign(n, Ray{});
  c.mirror_id.assign(n, -1);
  c.mirror_depth.assign(n, kInf);
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      size_t i = static_cast<size_t>(y) * cam.width + x;
      Ray r = camera_ray(cam, x, y);
      int idx;
      SdfHit h = scene_trace(mirrors, r, cfg.sphere_steps, cfg.trace_eps, cfg.t_max, &idx);
      if (!h.converged) continue;
      Vec3 nrm =
          cfg.smoothing ? smoothed_normal_at(mirrors[idx], cam, x, y, cfg, h) : h.normal;
      Vec3 rd = reflect(r.dir, nrm);
      c.valid[i] = 1;
      c.rays[i] = Ray(h.point, rd);
      c.mirror_id[i] = idx;
      c.mirror_depth[i] = h.depth;
    }
  return c;
}

SoftImage ReflectionRender::to_image(int width, int height) const {
  SoftImage img(width, height, 0.0);
  for (size_t i = 0; i < pixels.size(); ++i) img.at(pixels[i].x, pixels[i].y) = values[i];
  return img;
}

ReflectionRender render_reflection_sampled(const ReflectionCache& cache,
                                           const EmitterForward& emitter, const Camera& cam,
                                           const RenderConfig& cfg,
                                           const std::vector<PixelRC>* pixels,
                                           bool keep_records) {
  cfg.validate();
  ReflectionRender rr;
  rr.inv_norm2 = 1.0 / (emitter.bound_radius * emitter.bound_radius);
  if (pixels) {
    rr.pixels = *pixels;
  } else {
    rr.pixels.reserve(static_cast<size_t>(cam.width) * cam.height);
    for (int y = 0; y < cam.height; ++y)
      for (int x = 0; x < cam.width; ++x) rr.pixels.push_back({x, y});
  }
  rr.values.resize(rr.pixels.size(), 0.0);
  rr.pixel_term_range.resize(rr.pixels.size(), {0, 0});

  int n_bones = static_cast<int>(emitter.bone_end_joint.size());
  const TriMesh& mesh = emitter.mesh;
  // A miss term at squared normalized distance above the cutoff contributes
  // sigmoid(-cutoff) ~ 1e-13; skipping whole bones behind that bound keeps
  // the product and its gradient intact to machine noise.
  double cull_d = std::sqrt(cfg.influence_cutoff * cfg.sigma / rr.inv_norm2);

  std::vector<ReflectionRender::Term> local_terms;
  for (size_t pi = 0; pi < rr.pixels.size(); ++pi) {
    const PixelRC& p = rr.pixels[pi];
    if (p.x < 0 || p.x >= cache.width || p.y < 0 || p.y >= cache.height)
      throw std::out_of_range("render_reflection: sampled pixel outside image");
    size_t ci = static_cast<size_t>(p.y) * cache.width + p.x;
    int begin_term = static_cast<int>(rr.terms.size());
    if (!cache.valid[ci]) {
      rr.pixel_term_range[pi] = {begin_term, begin_term};
      continue;
    }
    const Ray& ray = cache.rays[ci];

    // whole-emitter reject
    {
      double tc = std::max(0.0, dot(emitter.centroid - ray.origin, ray.dir));
      double d = norm(emitter.centroid - ray.at(tc)) - emitter.bound_radius;
      if (d > cull_d) {
        rr.pixel_term_range[pi] = {begin_term, begin_term};
        continue;
      }
    }

    local_terms.clear();
    double keep = 1.0;
    for (int b = 0; b < n_bones; ++b) {
      double tc = std::max(0.0, dot(emitter.bone_sphere_center[b] - ray.origin, ray.dir));
      double db = norm(emitter.bone_sphere_center[b] - ray.at(tc)) - emitter.bone_sphere_radius[b];
      if (db > cull_d) continue;
      for (int ti = emitter.bone_tri_begin[b]; ti < emitter.bone_tri_begin[b + 1]; ++ti) {
        const auto& tr = mesh.triangles[ti];
        const Vec3 &v0 = mesh.vertices[tr[0]], &v1 = mesh.vertices[tr[1]], &v2 = mesh.vertices[tr[2]];
        RayTriWitness w = ray_triangle_distance_witness(ray, v0, v1, v2);
        double lambda;
        if (w.intersects) {
          // Crossing rays take their lateral distance to the triangle rim:
          // saturates toward 1 deep inside and meets the miss branch at 0.5
          // on the silhouette.
          w = ray_boundary_distance_witness(ray, v0, v1, v2);
          lambda = 1.0;
        } else {
          lambda = -1.0;
        }
        double d2 = w.dist * w.dist * rr.inv_norm2;
        double z = lambda * d2 / cfg.sigma;
        if (lambda < 0 && -z > cfg.influence_cutoff) continue;
        double infl = stable_sigmoid(z);
        keep *= 1.0 - infl;
        if (keep_records) {
          ReflectionRender::Term t;
          t.tri = ti;
          t.infl = infl;
          t.dinfl_dd2 = infl * (1.0 - infl) * lambda * rr.inv_norm2 / cfg.sigma;
          t.wit = w;
          local_terms.push_back(t);
        }
      }
    }
    rr.values[pi] = 1.0 - keep;
    if (keep_records)
      rr.terms.insert(rr.terms.end(), local_terms.begin(), local_terms.end());
    rr.pixel_term_range[pi] = {begin_term, static_cast<int>(rr.terms.size())};
  }
  return rr;
}

SoftImage render_reflection(const std::vector<SdfShape>& mirrors, const EmitterModel& emitter,
                            const Camera& cam, const RenderConfig& cfg) {
  ReflectionCache cache = build_reflection_cache(mirrors, cam, cfg);
  EmitterForward fwd = emitter_forward(emitter);
  ReflectionRender rr = render_reflection_sampled(cache, fwd, cam, cfg, nullptr, false);
  return rr.to_image(cam.width, cam.height);
}

std::vector<Vec3> reflection_backward(const ReflectionRender& rr, const EmitterForward& emitter,
                                      const std::vector<double>& d_values) {
  if (d_values.size() != rr.values.size())
    throw std::invalid_argument("reflection_backward: gradient size mismatch");
  std::vector<Vec3> g(emitter.mesh.vertices.size(), Vec3{0, 0, 0});
  std::vector<double> prefix, suffix;
  for (size_t pi = 0; pi < rr.pixels.size(); ++pi) {
    double dv = d_values[pi];
    if (dv == 0.0) continue;
    auto [b, e] = rr.pixel_term_range[pi];
    int k = e - b;
    if (k == 0) continue;
    prefix.assign(k + 1, 1.0);
    suffix.assign(k + 1, 1.0);
    for (int i = 0; i < k; ++i) prefix[i + 1] = prefix[i] * (1.0 - rr.terms[b + i].infl);
    for (int i = k - 1; i >= 0; --i) suffix[i] = suffix[i + 1] * (1.0 - rr.terms[b + i].infl);
    for (int i = 0; i < k; ++i) {
      const auto& t = rr.terms[b + i];
      // dI/dinfl_i is the leave-one-out product of (1 - infl).
      double coeff = dv * prefix[i] * suffix[i + 1] * t.dinfl_dd2;
      if (coeff == 0.0) continue;
      const auto& tr = emitter.mesh.triangles[t.tri];
      accumulate_d2_vertex_grads(t.wit, coeff, g[tr[0]], g[tr[1]], g[tr[2]]);
    }
  }
  return g;
}

DepthMaskRender render_depth_mask(const std::vector<SdfShape>& objects, const Camera& cam,
                                  const RenderConfig& cfg) {
  cfg.validate();
  DepthMaskRender out;
  out.depth = DepthMap(cam.width, cam.height);
  out.identity.assign(static_cast<size_t>(cam.width) * cam.height, -1);
  out.masks.assign(objects.size(), SoftImage(cam.width, cam.height, 0.0));
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      Ray r = camera_ray(cam, x, y);
      double best_t = kInf;
      int best = -1;
      for (size_t o = 0; o < objects.size(); ++o) {
        TraceExtras ex;
        SdfHit h = sphere_trace(objects[o], r, cfg.sphere_steps, cfg.trace_eps, cfg.t_max, &ex);
        if (h.converged) {
          out.masks[o].at(x, y) = 1.0;
          if (h.depth < best_t) {
            best_t = h.depth;
            best = static_cast<int>(o);
          }
        } else {
          out.masks[o].at(x, y) = stable_sigmoid(-ex.min_value / cfg.mask_sigma);
        }
      }
      out.depth.at(x, y) = best_t;
      out.identity[static_cast<size_t>(y) * cam.width + x] = best;
    }
  return out;
}

std::vector<PixelRC> silhouette_edges(const SoftImage& observed) {
  std::vector<PixelRC> edges;
  for (int y = 0; y < observed.height; ++y)
    for (int x = 0; x < observed.width; ++x) {
      double v = observed.at(x, y);
      bool edge = (x > 0 && observed.at(x - 1, y) != v) ||
                  (x + 1 < observed.width && observed.at(x + 1, y) != v) ||
                  (y > 0 && observed.at(x, y - 1) != v) ||
                  (y + 1 < observed.height && observed.at(x, y + 1) != v);
      if (edge) edges.push_back({x, y});
    }
  return edges;
}

std::vector<PixelRC> edge_sample_rays(const SoftImage& observed, int iteration,
                                      const RenderConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  if (iteration < 0) throw std::invalid_argument("edge_sample_rays: negative iteration");
  if (observed.width <= 0 || observed.height <= 0)
    throw std::invalid_argument("edge_sample_rays: empty image");
  if (!observed.is_binary())
    throw std::invalid_argument("edge_sample_rays: observation must be binary");
  std::vector<PixelRC> edges = silhouette_edges(observed);
  double u_share = std::max(cfg.uniform_floor, 1.0 - iteration / cfg.uniform_decay_iters);
  double band = std::max(cfg.edge_std_floor, cfg.edge_std0 * std::pow(cfg.edge_std_decay, iteration));

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<int> ux(0, observed.width - 1), uy(0, observed.height - 1);
  std::normal_distribution<double> gauss(0.0, band);

  std::vector<uint8_t> seen(static_cast<size_t>(observed.width) * observed.height, 0);
  std::vector<PixelRC> out;
  out.reserve(cfg.ray_budget);
  for (int i = 0; i < cfg.ray_budget; ++i) {
    PixelRC p;
    if (edges.empty() || unif(rng) < u_share) {
      p = {ux(rng), uy(rng)};
    } else {
      const PixelRC& e = edges[std::uniform_int_distribution<size_t>(0, edges.size() - 1)(rng)];
      p.x = std::clamp(static_cast<int>(std::lround(e.x + gauss(rng))), 0, observed.width - 1);
      p.y = std::clamp(static_cast<int>(std::lround(e.y + gauss(rng))), 0, observed.height - 1);
    }
    size_t idx = static_cast<size_t>(p.y) * observed.width + p.x;
    if (!seen[idx]) {
      seen[idx] = 1;
      out.push_back(p);
    }
  }
  return out;
}

}  // namespace mirrorpose
