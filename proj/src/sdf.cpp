#include "mirrorpose/sdf.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace mirrorpose {

namespace {

constexpr double kBowlRounding = 5e-3;

using LatGrad = std::vector<std::pair<int, double>>;

struct SmaxBlend {
  double val, wa, wb;
};

// Quadratic smooth max, C1, blend band of width k. Weights sum to 1 so the
// blended gradient never exceeds unit norm.
SmaxBlend smax(double a, double b, double k) {
  double h = std::max(0.0, 1.0 - std::abs(a - b) / k);
  double val = std::max(a, b) + 0.25 * k * h * h;
  double wa;
  if (a > b)
    wa = 1.0 - 0.5 * h;
  else if (a < b)
    wa = 0.5 * h;
  else
    wa = 0.5;
  return {val, wa, 1.0 - wa};
}

double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

double eval_sphere(const SdfShape& s, const Vec3& q, Vec3* grad, LatGrad* lat) {
  double r = s.latent[0];
  double n = norm(q);
  if (grad) *grad = n > 1e-12 ? q / n : Vec3{0, 0, 0};
  if (lat) lat->push_back({0, -1.0});
  return n - r;
}

double eval_ellipsoid(const SdfShape& s, const Vec3& q, Vec3* grad, LatGrad* lat) {
  Vec3 r{s.latent[0], s.latent[1], s.latent[2]};
  int amin = 0;
  if (r.y < r[amin]) amin = 1;
  if (r.z < r[amin]) amin = 2;
  double m = r[amin];
  Vec3 w{q.x / r.x, q.y / r.y, q.z / r.z};
  double nw = norm(w);
  if (grad) {
    *grad = nw > 1e-12 ? Vec3{m * w.x / (r.x * nw), m * w.y / (r.y * nw), m * w.z / (r.z * nw)}
                       : Vec3{0, 0, 0};
  }
  if (lat) {
    for (int i = 0; i < 3; ++i) {
      double d = nw > 1e-12 ? -m * w[i] * w[i] / (r[i] * nw) : 0.0;
      if (i == amin) d += nw - 1.0;
      lat->push_back({i, d});
    }
  }
  return (nw - 1.0) * m;
}

double eval_rounded_box(const SdfShape& s, const Vec3& q, Vec3* grad, LatGrad* lat) {
  Vec3 h{s.latent[0], s.latent[1], s.latent[2]};
  double rho = s.latent[3];
  Vec3 d{std::abs(q.x) - h.x, std::abs(q.y) - h.y, std::abs(q.z) - h.z};
  Vec3 v{std::max(d.x, 0.0), std::max(d.y, 0.0), std::max(d.z, 0.0)};
  double L = norm(v);
  int amax = 0;
  if (d.y > d[amax]) amax = 1;
  if (d.z > d[amax]) amax = 2;
  if (L > 1e-300) {
    if (grad)
      *grad = Vec3{sign_of(q.x) * v.x / L, sign_of(q.y) * v.y / L, sign_of(q.z) * v.z / L};
    if (lat) {
      for (int i = 0; i < 3; ++i) lat->push_back({i, -v[i] / L});
      lat->push_back({3, -1.0});
    }
    return L - rho;
  }
  if (grad) {
    *grad = Vec3{0, 0, 0};
    (*grad)[amax] = sign_of(q[amax]);
  }
  if (lat) {
    for (int i = 0; i < 3; ++i) lat->push_back({i, i == amax ? -1.0 : 0.0});
    lat->push_back({3, -1.0});
  }
  return d[amax] - rho;
}

double eval_bowl(const SdfShape& s, const Vec3& q, Vec3* grad, LatGrad* lat) {
  double R = s.latent[0], r = s.latent[1], c = s.latent[2];
  double nq = norm(q);
  double a_out = nq - R;      // outside the outer sphere
  double a_in = r - nq;       // inside the inner cavity
  bool outer_active = a_out >= a_in;
  double shell = std::max(a_out, a_in);
  double cutv = q.z - c;
  SmaxBlend b = smax(shell, cutv, kBowlRounding);
  if (grad) {
    Vec3 qh = nq > 1e-12 ? q / nq : Vec3{0, 0, 0};
    Vec3 gs = outer_active ? qh : -qh;
    *grad = gs * b.wa + Vec3{0, 0, b.wb};
  }
  if (lat) {
    lat->push_back({0, outer_active ? -b.wa : 0.0});
    lat->push_back({1, outer_active ? 0.0 : b.wa});
    lat->push_back({2, -b.wb});
  }
  return b.val;
}

inline double grid_value(const SdfShape& s, int i, int j, int k) {
  return s.latent[(static_cast<size_t>(k) * s.grid.ny + j) * s.grid.nx + i];
}

double eval_grid(const SdfShape& s, const Vec3& q, Vec3* grad, LatGrad* lat, bool outside_grad_ok) {
  const GridMeta& g = s.grid;
  bool inside = q.x >= g.bmin.x && q.x <= g.bmax.x && q.y >= g.bmin.y && q.y <= g.bmax.y &&
                q.z >= g.bmin.z && q.z <= g.bmax.z;
  if (!inside) {
    Vec3 ds;  // signed per-axis excess outside the box
    for (int i = 0; i < 3; ++i) {
      if (q[i] > g.bmax[i])
        ds[i] = q[i] - g.bmax[i];
      else if (q[i] < g.bmin[i])
        ds[i] = q[i] - g.bmin[i];
      else
        ds[i] = 0.0;
    }
    double d = norm(ds);
    if (grad || lat) {
      if (!outside_grad_ok)
        throw std::domain_error("sdf_gradient: grid query outside the stored box");
      if (grad) *grad = d > 1e-300 ? ds / d : Vec3{0, 0, 0};
      // No latent dependence outside the box.
    }
    return d + g.boundary_floor;
  }
  double gx = (q.x - g.bmin.x) / (g.bmax.x - g.bmin.x) * (g.nx - 1);
  double gy = (q.y - g.bmin.y) / (g.bmax.y - g.bmin.y) * (g.ny - 1);
  double gz = (q.z - g.bmin.z) / (g.bmax.z - g.bmin.z) * (g.nz - 1);
  int i0 = std::clamp(static_cast<int>(gx), 0, g.nx - 2);
  int j0 = std::clamp(static_cast<int>(gy), 0, g.ny - 2);
  int k0 = std::clamp(static_cast<int>(gz), 0, g.nz - 2);
  double fx = std::clamp(gx - i0, 0.0, 1.0);
  double fy = std::clamp(gy - j0, 0.0, 1.0);
  double fz = std::clamp(gz - k0, 0.0, 1.0);
  double v[2][2][2];
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c) v[a][b][c] = grid_value(s, i0 + a, j0 + b, k0 + c);
  double wx[2] = {1 - fx, fx}, wy[2] = {1 - fy, fy}, wz[2] = {1 - fz, fz};
  double val = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c) val += v[a][b][c] * wx[a] * wy[b] * wz[c];
  if (grad) {
    double sx = (g.nx - 1) / (g.bmax.x - g.bmin.x);
    double sy = (g.ny - 1) / (g.bmax.y - g.bmin.y);
    double sz = (g.nz - 1) / (g.bmax.z - g.bmin.z);
    Vec3 gr{0, 0, 0};
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c) gr.x += (v[1][b][c] - v[0][b][c]) * wy[b] * wz[c];
    for (int a = 0; a < 2; ++a)
      for (int c = 0; c < 2; ++c) gr.y += (v[a][1][c] - v[a][0][c]) * wx[a] * wz[c];
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) gr.z += (v[a][b][1] - v[a][b][0]) * wx[a] * wy[b];
    *grad = {gr.x * sx, gr.y * sy, gr.z * sz};
  }
  if (lat) {
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int c = 0; c < 2; ++c) {
          double w = wx[a] * wy[b] * wz[c];
          if (w != 0.0)
            lat->push_back(
                {(static_cast<int>(k0 + c) * g.ny + (j0 + b)) * g.nx + (i0 + a), w});
        }
  }
  return val;
}

double eval_local_impl(const SdfShape& s, const Vec3& q, Vec3* grad, LatGrad* lat,
                       bool outside_grad_ok) {
  switch (s.family) {
    case SdfFamily::Sphere: return eval_sphere(s, q, grad, lat);
    case SdfFamily::Ellipsoid: return eval_ellipsoid(s, q, grad, lat);
    case SdfFamily::RoundedBox: return eval_rounded_box(s, q, grad, lat);
    case SdfFamily::Bowl: return eval_bowl(s, q, grad, lat);
    case SdfFamily::Grid: return eval_grid(s, q, grad, lat, outside_grad_ok);
  }
  throw std::logic_error("eval_local: unknown family");
}

double family_step_safety(SdfFamily f) {
  switch (f) {
    case SdfFamily::Bowl: return 0.98;  // smooth-max band overestimates by <= k/4
    case SdfFamily::Grid: return 0.9;   // interpolation wiggle between nodes
    default: return 1.0;
  }
}

}  // namespace

const char* family_name(SdfFamily f) {
  switch (f) {
    case SdfFamily::Sphere: return "sphere";
    case SdfFamily::Ellipsoid: return "ellipsoid";
    case SdfFamily::RoundedBox: return "rounded_box";
    case SdfFamily::Bowl: return "bowl";
    case SdfFamily::Grid: return "grid";
  }
  return "?";
}

SdfFamily family_from_name(const std::string& s) {
  if (s == "sphere") return SdfFamily::Sphere;
  if (s == "ellipsoid") return SdfFamily::Ellipsoid;
  if (s == "rounded_box") return SdfFamily::RoundedBox;
  if (s == "bowl") return SdfFamily::Bowl;
  if (s == "grid") return SdfFamily::Grid;
  throw std::invalid_argument("unknown sdf family '" + s + "'");
}

int family_latent_size(SdfFamily f) {
  switch (f) {
    case SdfFamily::Sphere: return 1;
    case SdfFamily::Ellipsoid: return 3;
    case SdfFamily::RoundedBox: return 4;
    case SdfFamily::Bowl: return 3;
    case SdfFamily::Grid: return -1;
  }
  return -1;
}

void SdfShape::validate() const {
  for (double v : latent)
    if (!std::isfinite(v)) throw std::invalid_argument("SdfShape: non-finite latent");
  int want = family_latent_size(family);
  if (want >= 0 && static_cast<int>(latent.size()) != want)
    throw std::invalid_argument(std::string("SdfShape: ") + family_name(family) + " needs " +
                                std::to_string(want) + " latent values");
  switch (family) {
    case SdfFamily::Sphere:
      if (latent[0] <= 0) throw std::invalid_argument("sphere: radius must be positive");
      break;
    case SdfFamily::Ellipsoid:
      for (int i = 0; i < 3; ++i)
        if (latent[i] <= 0) throw std::invalid_argument("ellipsoid: radii must be positive");
      break;
    case SdfFamily::RoundedBox:
      for (int i = 0; i < 4; ++i)
        if (latent[i] <= 0) throw std::invalid_argument("rounded_box: sizes must be positive");
      break;
    case SdfFamily::Bowl:
      if (!(latent[0] > latent[1]) || !(latent[1] > 0))
        throw std::invalid_argument("bowl: need outer > inner > 0");
      break;
    case SdfFamily::Grid: {
      if (grid.nx < 8 || grid.ny < 8 || grid.nz < 8)
        throw std::invalid_argument("grid: resolution must be >= 8 per axis");
      size_t want_n = static_cast<size_t>(grid.nx) * grid.ny * grid.nz;
      if (latent.size() != want_n) throw std::invalid_argument("grid: value count mismatch");
      for (int i = 0; i < 3; ++i)
        if (!(grid.bmax[i] > grid.bmin[i]))
          throw std::invalid_argument("grid: box must have positive extent");
      break;
    }
  }
}

SdfShape make_sphere(double radius, const Se3Scale& placement) {
  SdfShape s;
  s.family = SdfFamily::Sphere;
  s.latent = {radius};
  s.placement = placement;
  s.validate();
  return s;
}

SdfShape make_ellipsoid(const Vec3& radii, const Se3Scale& placement) {
  SdfShape s;
  s.family = SdfFamily::Ellipsoid;
  s.latent = {radii.x, radii.y, radii.z};
  s.placement = placement;
  s.validate();
  return s;
}

SdfShape make_rounded_box(const Vec3& half_extent, double rounding, const Se3Scale& placement) {
  SdfShape s;
  s.family = SdfFamily::RoundedBox;
  s.latent = {half_extent.x, half_extent.y, half_extent.z, rounding};
  s.placement = placement;
  s.validate();
  return s;
}

SdfShape make_bowl(double outer_radius, double inner_radius, double cut_z,
                   const Se3Scale& placement) {
  SdfShape s;
  s.family = SdfFamily::Bowl;
  s.latent = {outer_radius, inner_radius, cut_z};
  s.placement = placement;
  s.validate();
  return s;
}

SdfShape make_grid(int nx, int ny, int nz, const Vec3& bmin, const Vec3& bmax,
                   std::vector<double> values, const Se3Scale& placement) {
  SdfShape s;
  s.family = SdfFamily::Grid;
  s.latent = std::move(values);
  s.placement = placement;
  s.grid.nx = nx;
  s.grid.ny = ny;
  s.grid.nz = nz;
  s.grid.bmin = bmin;
  s.grid.bmax = bmax;
  s.validate();
  // Smallest boundary value, clamped at zero: added to outside-the-box evals
  // so a marching ray cannot converge on the box face itself.
  double m = kInf;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        if (i == 0 || i == nx - 1 || j == 0 || j == ny - 1 || k == 0 || k == nz - 1)
          m = std::min(m, grid_value(s, i, j, k));
  s.grid.boundary_floor = std::max(0.0, m);
  return s;
}

double sdf_local(const SdfShape& shape, const Vec3& q) {
  return eval_local_impl(shape, q, nullptr, nullptr, true);
}

Vec3 sdf_local_grad(const SdfShape& shape, const Vec3& q) {
  Vec3 g;
  eval_local_impl(shape, q, &g, nullptr, false);
  return g;
}

double sdf_eval(const SdfShape& shape, const Vec3& p) {
  Vec3 q = shape.placement.apply_inverse(p);
  return shape.placement.scale * eval_local_impl(shape, q, nullptr, nullptr, true);
}

namespace {
Vec3 world_gradient(const SdfShape& shape, const Vec3& p, bool outside_ok) {
  Vec3 q = shape.placement.apply_inverse(p);
  Vec3 g;
  eval_local_impl(shape, q, &g, nullptr, outside_ok);
  return shape.placement.rotation.rotate(g);
}
}  // namespace

Vec3 sdf_gradient(const SdfShape& shape, const Vec3& p) { return world_gradient(shape, p, false); }

SdfParamGrad sdf_param_grad(const SdfShape& shape, const Vec3& p) {
  const Se3Scale& pl = shape.placement;
  Vec3 q = pl.apply_inverse(p);
  Vec3 gl;
  LatGrad lat;
  double f = eval_local_impl(shape, q, &gl, &lat, true);
  Vec3 gw = pl.rotation.rotate(gl);
  SdfParamGrad out;
  out.d_translation = -gw;
  out.d_rotation = -cross(p - pl.translation, gw);
  out.d_scale = f - dot(gl, q);
  out.d_latent.reserve(lat.size());
  for (auto& [i, w] : lat) out.d_latent.push_back({i, pl.scale * w});
  return out;
}

SdfHit sphere_trace(const SdfShape& shape, const Ray& ray, int max_steps, double eps, double t_max,
                    TraceExtras* extras) {
  if (max_steps < 1) throw std::invalid_argument("sphere_trace: max_steps must be >= 1");
  if (!(eps > 0) || !(t_max > 0)) throw std::invalid_argument("sphere_trace: eps and t_max must be positive");
  double safety = family_step_safety(shape.family);
  SdfHit hit;
  double t = 0.0, g = kInf;
  double min_g = kInf, min_t = 0.0;
  int i = 0;
  for (; i < max_steps; ++i) {
    if (t < 0.0 || t > t_max) break;
    g = sdf_eval(shape, ray.at(t));
    if (g < min_g) {
      min_g = g;
      min_t = t;
    }
    hit.residual = std::abs(g);
    if (std::abs(g) <= eps) {
      hit.depth = t;
      hit.point = ray.at(t);
      Vec3 grad = world_gradient(shape, hit.point, true);
      double gn = norm(grad);
      if (gn > 1e-12) {
        Vec3 n = grad / gn;
        if (std::abs(dot(n, ray.dir)) > 1e-9) {
          hit.normal = n;
          hit.converged = true;
        }
      }
      break;
    }
    t += g * safety;  // signed: overshoot steps back
  }
  if (!hit.converged) hit.depth = kInf;
  if (extras) {
    extras->steps = i;
    // Ternary refinement of the along-ray minimum. Only worthwhile near the
    // surface where a soft mask has any slope.
    if (!hit.converged && min_g < 0.05 && std::isfinite(min_g)) {
      double h = std::max(std::abs(min_g), eps) * 2.0;
      double a = std::max(0.0, min_t - h), b = std::min(t_max, min_t + h);
      for (int it = 0; it < 20; ++it) {
        double m1 = a + (b - a) / 3.0, m2 = b - (b - a) / 3.0;
        if (sdf_eval(shape, ray.at(m1)) < sdf_eval(shape, ray.at(m2)))
          b = m2;
        else
          a = m1;
      }
      double tm = 0.5 * (a + b);
      double gm = sdf_eval(shape, ray.at(tm));
      if (gm < min_g) {
        min_g = gm;
        min_t = tm;
      }
    }
    extras->min_value = hit.converged ? g : min_g;
    extras->min_t = hit.converged ? hit.depth : min_t;
  }
  return hit;
}

// Most-negative field value along the ray past an entry hit, refined around
// the best sample. Gives hit rays a signed boundary clearance, so a soft
// coverage mask built from it stays continuous when the boundary crosses a
// pixel: the hit side runs 1 -> 0.5 as the interior dip vanishes and the
// miss side continues 0.5 -> 0. A hard hit value of 1 would jump there and
// the jump is invisible to the analytic gradient.
double sdf_interior_min(const SdfShape& shape, const Ray& ray, double t_hit, double t_max,
                        double* t_at) {
  double safety = family_step_safety(shape.family);
  double best_g = sdf_eval(shape, ray.at(t_hit)), best_t = t_hit;
  double lo = t_hit, hi = t_hit;
  bool hi_set = false;
  double prev_t = t_hit, prev_g = best_g;
  double t = t_hit;
  for (int i = 0; i < 64 && t <= t_max; ++i) {
    double g = sdf_eval(shape, ray.at(t));
    if (g < best_g) {
      best_g = g;
      lo = prev_t;
      best_t = t;
      hi_set = false;
    } else if (!hi_set && t > best_t) {
      hi = t;
      hi_set = true;
    }
    // 5cm of clearance is outside any mask sigma in use; a dip beyond such a
    // bump cannot matter, and stopping keeps the step budget on the dips.
    if (g > 0.05) break;
    double step = std::max(std::abs(g) * safety, 1e-4);
    // Grazing crossings have a long span with tiny |g|; plain sphere steps
    // stall there. Jump toward the secant zero estimate instead, the ternary
    // pass below recovers the exact dip inside the bracket.
    if (i > 0 && g > 0 && prev_g > g)
      step = std::max(step, std::min(g * (t - prev_t) / (prev_g - g) + 1e-4, 0.05));
    prev_t = t;
    prev_g = g;
    t += step;
  }
  if (!hi_set) hi = std::min(t_max, best_t + std::max(std::abs(best_g) * safety, 1e-4));
  for (int it = 0; it < 20; ++it) {
    double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
    if (sdf_eval(shape, ray.at(m1)) < sdf_eval(shape, ray.at(m2)))
      hi = m2;
    else
      lo = m1;
  }
  double tm = 0.5 * (lo + hi);
  double gm = sdf_eval(shape, ray.at(tm));
  if (gm < best_g) {
    best_g = gm;
    best_t = tm;
  }
  if (t_at) *t_at = best_t;
  return best_g;
}

SdfHit scene_trace(const std::vector<SdfShape>& shapes, const Ray& ray, int max_steps, double eps,
                   double t_max, int* hit_index) {
  SdfHit best;
  int idx = -1;
  for (size_t i = 0; i < shapes.size(); ++i) {
    SdfHit h = sphere_trace(shapes[i], ray, max_steps, eps, t_max);
    if (h.converged && h.depth < best.depth) {
      best = h;
      idx = static_cast<int>(i);
    }
  }
  if (hit_index) *hit_index = idx;
  if (idx < 0) best.converged = false;
  return best;
}

// --- file io ----------------------------------------------------------------

SdfShape load_sdf_grid(const std::string& path, const Se3Scale& placement) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open sdf grid '" + path + "'");
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error(path + ": missing header");
  std::istringstream hs(line);
  std::string magic;
  int nx, ny, nz;
  double x0, y0, z0, x1, y1, z1;
  if (!(hs >> magic >> nx >> ny >> nz >> x0 >> y0 >> z0 >> x1 >> y1 >> z1) || magic != "SDFGRID")
    throw std::runtime_error(path + ": bad SDFGRID header '" + line + "'");
  size_t n = static_cast<size_t>(nx) * ny * nz;
  std::vector<float> raw(n);
  f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n * sizeof(float)));
  if (static_cast<size_t>(f.gcount()) != n * sizeof(float))
    throw std::runtime_error(path + ": truncated payload, expected " + std::to_string(n) +
                             " floats");
  std::vector<double> vals(n);
  for (size_t i = 0; i < n; ++i) {
    if (!std::isfinite(raw[i])) throw std::runtime_error(path + ": non-finite value in grid");
    vals[i] = raw[i];
  }
  return make_grid(nx, ny, nz, {x0, y0, z0}, {x1, y1, z1}, std::move(vals), placement);
}

void save_sdf_grid(const std::string& path, const SdfShape& s) {
  if (s.family != SdfFamily::Grid) throw std::invalid_argument("save_sdf_grid: not a grid shape");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  char head[256];
  std::snprintf(head, sizeof(head), "SDFGRID %d %d %d %.17g %.17g %.17g %.17g %.17g %.17g\n",
                s.grid.nx, s.grid.ny, s.grid.nz, s.grid.bmin.x, s.grid.bmin.y, s.grid.bmin.z,
                s.grid.bmax.x, s.grid.bmax.y, s.grid.bmax.z);
  f << head;
  std::vector<float> raw(s.latent.size());
  for (size_t i = 0; i < raw.size(); ++i) raw[i] = static_cast<float>(s.latent[i]);
  f.write(reinterpret_cast<const char*>(raw.data()),
          static_cast<std::streamsize>(raw.size() * sizeof(float)));
  if (!f) throw std::runtime_error("short write to '" + path + "'");
}

void export_obj(const std::string& path, const TriMesh& mesh) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  char buf[160];
  for (const Vec3& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "v %.9g %.9g %.9g\n", v.x, v.y, v.z);
    f << buf;
  }
  for (const auto& t : mesh.triangles) {
    std::snprintf(buf, sizeof(buf), "f %d %d %d\n", t[0] + 1, t[1] + 1, t[2] + 1);
    f << buf;
  }
  if (!f) throw std::runtime_error("short write to '" + path + "'");
}

TriMesh import_obj(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  TriMesh m;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v.x >> v.y >> v.z))
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad vertex");
      m.vertices.push_back(v);
    } else if (tag == "f") {
      std::array<int, 3> t;
      if (!(ls >> t[0] >> t[1] >> t[2]))
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad face");
      for (int& i : t) --i;
      m.triangles.push_back(t);
    }
  }
  m.validate();
  return m;
}

}  // namespace mirrorpose
