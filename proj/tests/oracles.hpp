#pragma once

// Independent reference implementations that generate expected values for the
// tests. They deliberately avoid the closest-feature, adjoint, and culling
// logic under test: distances come from dense sampling with local refinement,
// gradients from central finite differences, rasterization from per-triangle
// pixel loops.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <vector>

#include "mirrorpose/geom.hpp"
#include "mirrorpose/render.hpp"

namespace oracles {

using mirrorpose::Camera;
using mirrorpose::Ray;
using mirrorpose::SoftImage;
using mirrorpose::TriMesh;
using mirrorpose::Vec3;

// Exact distance from a point to a semi-infinite ray (projection, clamped).
inline double point_ray_distance(const Vec3& p, const Ray& ray) {
  double t = std::max(0.0, dot(p - ray.origin, ray.dir));
  return norm(p - ray.at(t));
}

// Min distance between a ray and a closed triangle by sampling the triangle
// on a barycentric grid and refining around the best sample. Each triangle
// point gets its exact point-to-ray distance, so only the triangle side is
// discretized; refinement shrinks that error well below 1e-5.
inline double ray_tri_distance(const Ray& ray, const Vec3& v0, const Vec3& v1, const Vec3& v2) {
  auto tri_point = [&](double u, double v) { return v0 * (1.0 - u - v) + v1 * u + v2 * v; };
  int n = 40;
  double best = mirrorpose::kInf, bu = 0, bv = 0;
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n - i; ++j) {
      double u = double(i) / n, v = double(j) / n;
      double d = point_ray_distance(tri_point(u, v), ray);
      if (d < best) { best = d; bu = u; bv = v; }
    }
  double w = 1.0 / n;
  for (int round = 0; round < 9; ++round) {
    int m = 10;
    double cu = bu, cv = bv;
    for (int i = -m; i <= m; ++i)
      for (int j = -m; j <= m; ++j) {
        double u = cu + w * i / m, v = cv + w * j / m;
        if (u < 0 || v < 0 || u + v > 1) continue;
        double d = point_ray_distance(tri_point(u, v), ray);
        if (d < best) { best = d; bu = u; bv = v; }
      }
    w *= 0.3;
  }
  return best;
}

// Central-difference gradient of a scalar function of a flat vector.
inline std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    double keep = x[i];
    x[i] = keep + h;
    double fp = f(x);
    x[i] = keep - h;
    double fm = f(x);
    x[i] = keep;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

// Distance in pixels from (x, y) to the nearest listed edge pixel.
inline double edge_distance(int x, int y, const std::vector<mirrorpose::PixelRC>& edges) {
  double best = mirrorpose::kInf;
  for (const auto& e : edges) {
    double dx = x - e.x, dy = y - e.y;
    best = std::min(best, std::sqrt(dx * dx + dy * dy));
  }
  return best;
}

// Per connected component of the mesh (components joined by shared vertex
// indices): V - E + F, with E counted over unique undirected edges. A closed
// orientable surface without handles gives 2 per component.
inline std::vector<int> euler_characteristics(const TriMesh& mesh) {
  int nv = static_cast<int>(mesh.vertices.size());
  std::vector<int> parent(nv);
  for (int i = 0; i < nv; ++i) parent[i] = i;
  std::function<int(int)> find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (const auto& t : mesh.triangles) {
    parent[find(t[0])] = find(t[1]);
    parent[find(t[1])] = find(t[2]);
  }
  std::map<int, int> comp_v, comp_f;
  std::map<int, std::set<std::pair<int, int>>> comp_e;
  for (int i = 0; i < nv; ++i) comp_v[find(i)]++;
  for (const auto& t : mesh.triangles) {
    int c = find(t[0]);
    comp_f[c]++;
    for (int k = 0; k < 3; ++k) {
      int a = t[k], b = t[(k + 1) % 3];
      comp_e[c].insert({std::min(a, b), std::max(a, b)});
    }
  }
  std::vector<int> chi;
  for (auto& [c, v] : comp_v) {
    if (comp_f.find(c) == comp_f.end()) continue;  // isolated vertices
    chi.push_back(v - static_cast<int>(comp_e[c].size()) + comp_f[c]);
  }
  return chi;
}

// Binary coverage of a mesh seen directly through the camera, restricted to
// pixels marked valid (empty valid list means all pixels). Loops triangles
// over their projected pixel bounding boxes; hit semantics come from the
// closed-triangle intersection kernel, nothing else is shared with the
// reflection renderer.
inline SoftImage rasterize_direct(const Camera& cam, const TriMesh& mesh,
                                  const std::vector<uint8_t>& valid) {
  SoftImage img(cam.width, cam.height);
  auto project = [&](const Vec3& p, double& px, double& py) {
    Vec3 q = cam.pose.apply_inverse(p);
    if (q.z <= 1e-9) return false;
    px = cam.fx * q.x / q.z + cam.cx;
    py = cam.fy * q.y / q.z + cam.cy;
    return true;
  };
  for (const auto& t : mesh.triangles) {
    const Vec3 &a = mesh.vertices[t[0]], &b = mesh.vertices[t[1]], &c = mesh.vertices[t[2]];
    double x0 = mirrorpose::kInf, x1 = -mirrorpose::kInf, y0 = mirrorpose::kInf, y1 = -mirrorpose::kInf;
    bool front = true;
    for (const Vec3* v : {&a, &b, &c}) {
      double px, py;
      if (!project(*v, px, py)) { front = false; break; }
      x0 = std::min(x0, px); x1 = std::max(x1, px);
      y0 = std::min(y0, py); y1 = std::max(y1, py);
    }
    if (!front) continue;
    int ix0 = std::max(0, static_cast<int>(std::floor(x0)) - 1);
    int ix1 = std::min(cam.width - 1, static_cast<int>(std::ceil(x1)) + 1);
    int iy0 = std::max(0, static_cast<int>(std::floor(y0)) - 1);
    int iy1 = std::min(cam.height - 1, static_cast<int>(std::ceil(y1)) + 1);
    for (int y = iy0; y <= iy1; ++y)
      for (int x = ix0; x <= ix1; ++x) {
        if (img.at(x, y) > 0.5) continue;
        if (!valid.empty() && !valid[static_cast<size_t>(y) * cam.width + x]) continue;
        double tt;
        if (mirrorpose::ray_triangle_intersect(mirrorpose::camera_ray(cam, x, y), a, b, c, tt))
          img.at(x, y) = 1.0;
      }
  }
  return img;
}

}  // namespace oracles
