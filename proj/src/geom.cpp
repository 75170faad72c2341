#include "mirrorpose/geom.hpp"

#include <algorithm>

namespace mirrorpose {

Mat3 rotation_exp(const Vec3& v) {
  double t2 = norm2(v);
  double t = std::sqrt(t2);
  double a, b;  // R = I + a K + b K^2
  if (t < 1e-6) {
    a = 1.0 - t2 / 6.0;
    b = 0.5 - t2 / 24.0;
  } else {
    a = std::sin(t) / t;
    b = (1.0 - std::cos(t)) / t2;
  }
  Mat3 K = skew(v);
  return Mat3::identity() + K * a + (K * K) * b;
}

std::array<Mat3, 3> rotation_exp_jacobian(const Vec3& v) {
  std::array<Mat3, 3> J;
  double t2 = norm2(v);
  if (t2 < 1e-16) {
    J[0] = skew({1, 0, 0});
    J[1] = skew({0, 1, 0});
    J[2] = skew({0, 0, 1});
    return J;
  }
  Mat3 R = rotation_exp(v);
  Mat3 K = skew(v);
  Mat3 ImR = Mat3::identity() + R * (-1.0);
  for (int k = 0; k < 3; ++k) {
    Vec3 ek{k == 0 ? 1.0 : 0.0, k == 1 ? 1.0 : 0.0, k == 2 ? 1.0 : 0.0};
    Vec3 w = cross(v, ImR * ek);
    J[k] = ((K * v[k] + skew(w)) * (1.0 / t2)) * R;
  }
  return J;
}

Ray camera_ray(const Camera& cam, int px, int py) {
  if (px < 0 || px >= cam.width || py < 0 || py >= cam.height)
    throw std::out_of_range("camera_ray: pixel (" + std::to_string(px) + "," + std::to_string(py) +
                            ") outside " + std::to_string(cam.width) + "x" + std::to_string(cam.height));
  double u = (px + 0.5 - cam.cx) / cam.fx;
  double v = (py + 0.5 - cam.cy) / cam.fy;
  Vec3 d_world = cam.pose.rotation.rotate({u, v, 1.0});
  return Ray(cam.pose.translation, d_world);
}

void TriMesh::validate() const {
  int n = static_cast<int>(vertices.size());
  for (const Vec3& v : vertices)
    if (!finite(v)) throw std::invalid_argument("TriMesh: non-finite vertex");
  for (const auto& t : triangles) {
    for (int i : t)
      if (i < 0 || i >= n) throw std::invalid_argument("TriMesh: triangle index out of range");
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
      throw std::invalid_argument("TriMesh: repeated index in triangle");
  }
}

void TriMesh::bbox(Vec3& lo, Vec3& hi) const {
  lo = {kInf, kInf, kInf};
  hi = {-kInf, -kInf, -kInf};
  for (const Vec3& v : vertices)
    for (int i = 0; i < 3; ++i) {
      lo[i] = std::min(lo[i], v[i]);
      hi[i] = std::max(hi[i], v[i]);
    }
}

double TriMesh::area() const {
  double a = 0.0;
  for (const auto& t : triangles)
    a += 0.5 * norm(cross(vertices[t[1]] - vertices[t[0]], vertices[t[2]] - vertices[t[0]]));
  return a;
}

bool ray_triangle_intersect(const Ray& ray, const Vec3& v0, const Vec3& v1, const Vec3& v2,
                            double& t_out) {
  Vec3 e1 = v1 - v0, e2 = v2 - v0;
  Vec3 pvec = cross(ray.dir, e2);
  double det = dot(e1, pvec);
  // Determinant scales with edge lengths; compare against that scale.
  double det_scale = std::sqrt(norm2(e1) * norm2(e2));
  if (std::abs(det) <= 1e-12 * det_scale) return false;
  double inv = 1.0 / det;
  Vec3 tvec = ray.origin - v0;
  double u = dot(tvec, pvec) * inv;
  const double b = 1e-10;  // closed triangle: grazing the boundary counts
  if (u < -b || u > 1.0 + b) return false;
  Vec3 qvec = cross(tvec, e1);
  double v = dot(ray.dir, qvec) * inv;
  if (v < -b || u + v > 1.0 + b) return false;
  double t = dot(e2, qvec) * inv;
  if (t < 0.0) return false;
  t_out = t;
  return true;
}

Vec3 closest_point_segment(const Vec3& p, const Vec3& a, const Vec3& b, double& s_out) {
  Vec3 e = b - a;
  double ee = dot(e, e);
  if (ee < 1e-300) {
    s_out = 0.0;
    return a;
  }
  s_out = std::clamp(dot(p - a, e) / ee, 0.0, 1.0);
  return a + e * s_out;
}

Vec3 closest_point_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c,
                            std::array<double, 3>& bary) {
  // Ericson, Real-Time Collision Detection 5.1.5 (voronoi regions).
  Vec3 ab = b - a, ac = c - a, ap = p - a;
  double d1 = dot(ab, ap), d2 = dot(ac, ap);
  if (d1 <= 0.0 && d2 <= 0.0) { bary = {1, 0, 0}; return a; }
  Vec3 bp = p - b;
  double d3 = dot(ab, bp), d4 = dot(ac, bp);
  if (d3 >= 0.0 && d4 <= d3) { bary = {0, 1, 0}; return b; }
  double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    double denom = d1 - d3;
    double v = denom > 0.0 ? d1 / denom : 0.0;
    bary = {1 - v, v, 0};
    return a + ab * v;
  }
  Vec3 cp = p - c;
  double d5 = dot(ab, cp), d6 = dot(ac, cp);
  if (d6 >= 0.0 && d5 <= d6) { bary = {0, 0, 1}; return c; }
  double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    double denom = d2 - d6;
    double w = denom > 0.0 ? d2 / denom : 0.0;
    bary = {1 - w, 0, w};
    return a + ac * w;
  }
  double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    double denom = (d4 - d3) + (d5 - d6);
    double w = denom > 0.0 ? (d4 - d3) / denom : 0.0;
    bary = {0, 1 - w, w};
    return b + (c - b) * w;
  }
  double sum = va + vb + vc;
  if (!(sum > 1e-300)) {
    // Degenerate (collinear) triangle: fall back to the best edge.
    double best = kInf;
    Vec3 best_pt = a;
    bary = {1, 0, 0};
    const Vec3* vs[3] = {&a, &b, &c};
    const int e0[3] = {0, 1, 2}, e1i[3] = {1, 2, 0};
    for (int e = 0; e < 3; ++e) {
      double s;
      Vec3 q = closest_point_segment(p, *vs[e0[e]], *vs[e1i[e]], s);
      double d = norm2(p - q);
      if (d < best) {
        best = d;
        best_pt = q;
        bary = {0, 0, 0};
        bary[e0[e]] = 1 - s;
        bary[e1i[e]] = s;
      }
    }
    return best_pt;
  }
  double inv = 1.0 / sum;
  double v = vb * inv, w = vc * inv;
  bary = {1 - v - w, v, w};
  return a + ab * v + ac * w;
}

namespace {

struct RaySegCand {
  double d2 = kInf;
  double t = 0.0;
  double s = 0.0;
};

// Exact minimum of |o + t u - (a + s e)|^2 over t >= 0, s in [0,1]. The
// objective is convex, so the optimum is interior or on one of the three
// boundary edges, each solved in closed form.
RaySegCand ray_segment_closest(const Ray& ray, const Vec3& a, const Vec3& b) {
  Vec3 e = b - a;
  Vec3 w0 = ray.origin - a;
  double ue = dot(ray.dir, e);
  double ee = dot(e, e);
  double w0u = dot(w0, ray.dir);
  double w0e = dot(w0, e);
  RaySegCand best;
  auto consider = [&](double t, double s) {
    Vec3 diff = w0 + ray.dir * t - e * s;
    double d2 = dot(diff, diff);
    if (d2 < best.d2) best = {d2, t, s};
  };
  consider(std::max(0.0, -w0u), 0.0);
  consider(std::max(0.0, dot(b - ray.origin, ray.dir)), 1.0);
  consider(0.0, ee > 1e-300 ? std::clamp(w0e / ee, 0.0, 1.0) : 0.0);
  double denom = ee - ue * ue;
  if (denom > 1e-300) {
    double s = (w0e - w0u * ue) / denom;
    if (s > 0.0 && s < 1.0) {
      double t = s * ue - w0u;
      if (t > 0.0) consider(t, s);
    }
  }
  return best;
}

void consider_edges(const Ray& ray, const Vec3& v0, const Vec3& v1, const Vec3& v2,
                    RayTriWitness& w) {
  const Vec3* vs[3] = {&v0, &v1, &v2};
  const int ea[3] = {0, 1, 2}, eb[3] = {1, 2, 0};
  double best_d2 = w.dist < kInf ? w.dist * w.dist : kInf;
  for (int e = 0; e < 3; ++e) {
    RaySegCand c = ray_segment_closest(ray, *vs[ea[e]], *vs[eb[e]]);
    if (c.d2 < best_d2) {
      best_d2 = c.d2;
      w.dist = std::sqrt(c.d2);
      w.t = c.t;
      w.point_ray = ray.at(c.t);
      w.point_tri = *vs[ea[e]] + (*vs[eb[e]] - *vs[ea[e]]) * c.s;
      w.bary = {0, 0, 0};
      w.bary[ea[e]] = 1 - c.s;
      w.bary[eb[e]] = c.s;
    }
  }
}

}  // namespace

RayTriWitness ray_triangle_distance_witness(const Ray& ray, const Vec3& v0, const Vec3& v1,
                                            const Vec3& v2) {
  RayTriWitness w;
  double t_hit;
  if (ray_triangle_intersect(ray, v0, v1, v2, t_hit)) {
    w.dist = 0.0;
    w.t = t_hit;
    w.intersects = true;
    w.point_ray = ray.at(t_hit);
    w.point_tri = closest_point_triangle(w.point_ray, v0, v1, v2, w.bary);
    return w;
  }

  consider_edges(ray, v0, v1, v2, w);

  // Origin against the whole triangle covers the t = 0 face of the domain.
  {
    std::array<double, 3> bary;
    Vec3 q = closest_point_triangle(ray.origin, v0, v1, v2, bary);
    double d2 = norm2(ray.origin - q);
    if (d2 < w.dist * w.dist) {
      w.dist = std::sqrt(d2);
      w.t = 0.0;
      w.point_ray = ray.origin;
      w.point_tri = q;
      w.bary = bary;
    }
  }

  // Parallel ray passing over the interior: the closest feature can be an
  // interior point at perpendicular distance |h|, which no edge or origin
  // candidate sees.
  Vec3 n = cross(v1 - v0, v2 - v0);
  double nn = norm(n);
  if (nn > 1e-300) {
    Vec3 nh = n / nn;
    if (std::abs(dot(ray.dir, nh)) < 1e-9) {
      double h = dot(ray.origin - v0, nh);
      Vec3 foot0 = ray.origin - nh * h;
      double tlo = 0.0, thi = kInf;
      const Vec3* vs[3] = {&v0, &v1, &v2};
      bool ok = true;
      for (int e = 0; e < 3 && ok; ++e) {
        const Vec3& p = *vs[e];
        const Vec3& q = *vs[(e + 1) % 3];
        const Vec3& r = *vs[(e + 2) % 3];
        Vec3 m = cross(nh, q - p);
        if (dot(m, r - p) < 0.0) m = -m;  // inward regardless of winding
        double c0 = dot(foot0 - p, m);
        double c1 = dot(ray.dir, m);
        if (std::abs(c1) < 1e-14) {
          if (c0 < 0.0) ok = false;
        } else if (c1 > 0.0) {
          tlo = std::max(tlo, -c0 / c1);
        } else {
          thi = std::min(thi, -c0 / c1);
        }
      }
      if (ok && tlo <= thi) {
        double d = std::abs(h);
        if (d < w.dist) {
          double tmid = std::isfinite(thi) ? 0.5 * (tlo + thi) : tlo;
          w.dist = d;
          w.t = tmid;
          w.point_ray = ray.at(tmid);
          w.point_tri = closest_point_triangle(w.point_ray, v0, v1, v2, w.bary);
        }
      }
    }
  }
  return w;
}

RayTriWitness ray_boundary_distance_witness(const Ray& ray, const Vec3& v0, const Vec3& v1,
                                            const Vec3& v2) {
  RayTriWitness w;
  consider_edges(ray, v0, v1, v2, w);
  double tt;
  w.intersects = ray_triangle_intersect(ray, v0, v1, v2, tt);
  return w;
}

}  // namespace mirrorpose
