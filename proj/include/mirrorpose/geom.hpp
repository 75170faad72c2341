#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace mirrorpose {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3() = default;
  Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  double& operator[](int i) { return (&x)[i]; }
  double operator[](int i) const { return (&x)[i]; }

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }
inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm2(const Vec3& v) { return dot(v, v); }
inline double norm(const Vec3& v) { return std::sqrt(norm2(v)); }
inline Vec3 hadamard(const Vec3& a, const Vec3& b) { return {a.x * b.x, a.y * b.y, a.z * b.z}; }
inline bool finite(const Vec3& v) {
  return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

// Throws on (near-)zero input; callers that can legitimately see zero vectors
// must check first.
inline Vec3 normalized(const Vec3& v) {
  double n = norm(v);
  if (n < 1e-300) throw std::invalid_argument("normalized: zero-length vector");
  return v / n;
}

// Column-major is never exposed; storage is row-major m[r*3+c].
struct Mat3 {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  double& operator()(int r, int c) { return m[r * 3 + c]; }
  double operator()(int r, int c) const { return m[r * 3 + c]; }

  static Mat3 identity() { return Mat3{}; }
  static Mat3 zero() {
    Mat3 z;
    z.m.fill(0.0);
    return z;
  }

  Vec3 col(int c) const { return {m[c], m[3 + c], m[6 + c]}; }
  Vec3 row(int r) const { return {m[r * 3], m[r * 3 + 1], m[r * 3 + 2]}; }

  Mat3 transposed() const {
    Mat3 t;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) t(r, c) = (*this)(c, r);
    return t;
  }

  Vec3 operator*(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
            m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }

  Mat3 operator*(const Mat3& o) const {
    Mat3 r = Mat3::zero();
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k) {
        double a = (*this)(i, k);
        for (int j = 0; j < 3; ++j) r(i, j) += a * o(k, j);
      }
    return r;
  }

  Mat3 operator+(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 9; ++i) r.m[i] = m[i] + o.m[i];
    return r;
  }

  Mat3 operator*(double s) const {
    Mat3 r;
    for (int i = 0; i < 9; ++i) r.m[i] = m[i] * s;
    return r;
  }
};

inline Mat3 skew(const Vec3& v) {
  Mat3 s = Mat3::zero();
  s(0, 1) = -v.z; s(0, 2) = v.y;
  s(1, 0) = v.z;  s(1, 2) = -v.x;
  s(2, 0) = -v.y; s(2, 1) = v.x;
  return s;
}

inline Mat3 outer(const Vec3& a, const Vec3& b) {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r(i, j) = a[i] * b[j];
  return r;
}

inline double frobenius_dot(const Mat3& a, const Mat3& b) {
  double s = 0.0;
  for (int i = 0; i < 9; ++i) s += a.m[i] * b.m[i];
  return s;
}

// Rodrigues. Small-angle branch keeps the map smooth through v = 0.
Mat3 rotation_exp(const Vec3& v);

// d/dv_k exp([v]x), the three Jacobian slices of Rodrigues at v.
std::array<Mat3, 3> rotation_exp_jacobian(const Vec3& v);

// Unit quaternion, scalar first. Kept normalized by every mutating entry point.
struct Quat {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

  Quat() = default;
  Quat(double w_, double x_, double y_, double z_) : w(w_), x(x_), y(y_), z(z_) {}

  static Quat from_axis_angle(const Vec3& aa) {
    double t = norm(aa);
    if (t < 1e-12) {
      // sin(t/2)/t ~ 1/2 - t^2/48
      double k = 0.5 - t * t / 48.0;
      return Quat(std::cos(t * 0.5), aa.x * k, aa.y * k, aa.z * k).normalized();
    }
    double h = t * 0.5, s = std::sin(h) / t;
    return Quat(std::cos(h), aa.x * s, aa.y * s, aa.z * s).normalized();
  }

  Quat normalized() const {
    double n = std::sqrt(w * w + x * x + y * y + z * z);
    if (n < 1e-300) throw std::invalid_argument("Quat: zero norm");
    return {w / n, x / n, y / n, z / n};
  }

  Quat conjugate() const { return {w, -x, -y, -z}; }

  Quat operator*(const Quat& o) const {
    return {w * o.w - x * o.x - y * o.y - z * o.z,
            w * o.x + x * o.w + y * o.z - z * o.y,
            w * o.y - x * o.z + y * o.w + z * o.x,
            w * o.z + x * o.y - y * o.x + z * o.w};
  }

  Vec3 rotate(const Vec3& v) const {
    // q v q* expanded; cheaper than building the matrix for one vector.
    Vec3 u{x, y, z};
    Vec3 t = 2.0 * cross(u, v);
    return v + w * t + cross(u, t);
  }

  Mat3 to_mat3() const {
    Mat3 r;
    double xx = x * x, yy = y * y, zz = z * z;
    double xy = x * y, xz = x * z, yz = y * z;
    double wx = w * x, wy = w * y, wz = w * z;
    r(0, 0) = 1 - 2 * (yy + zz); r(0, 1) = 2 * (xy - wz);     r(0, 2) = 2 * (xz + wy);
    r(1, 0) = 2 * (xy + wz);     r(1, 1) = 1 - 2 * (xx + zz); r(1, 2) = 2 * (yz - wx);
    r(2, 0) = 2 * (xz - wy);     r(2, 1) = 2 * (yz + wx);     r(2, 2) = 1 - 2 * (xx + yy);
    return r;
  }
};

// Similarity transform p -> s * R(q) * p + T. scale must stay positive.
struct Se3Scale {
  Quat rotation;
  Vec3 translation;
  double scale = 1.0;

  Se3Scale() = default;
  Se3Scale(const Quat& q, const Vec3& t, double s) : rotation(q.normalized()), translation(t), scale(s) {
    if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("Se3Scale: scale must be positive and finite");
  }

  Vec3 apply(const Vec3& p) const { return rotation.rotate(p) * scale + translation; }
  Vec3 apply_inverse(const Vec3& p) const {
    return rotation.conjugate().rotate((p - translation) / scale);
  }
  // Directions ignore translation; scale kept so lengths transform consistently.
  Vec3 apply_dir(const Vec3& d) const { return rotation.rotate(d) * scale; }
};

struct Ray {
  Vec3 origin;
  Vec3 dir;  // unit

  Ray() : dir(0, 0, 1) {}
  Ray(const Vec3& o, const Vec3& d) : origin(o), dir(normalized(d)) {
    if (!finite(o)) throw std::invalid_argument("Ray: non-finite origin");
  }
  Vec3 at(double t) const { return origin + dir * t; }
};

// Pinhole, no distortion. pose maps camera coordinates to world (scale 1),
// camera looks down +z with x right, y down.
struct Camera {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;
  Se3Scale pose;

  Camera() = default;
  Camera(double fx_, double fy_, double cx_, double cy_, int w, int h, const Se3Scale& pose_)
      : fx(fx_), fy(fy_), cx(cx_), cy(cy_), width(w), height(h), pose(pose_) {
    if (!(fx > 0) || !(fy > 0)) throw std::invalid_argument("Camera: focal lengths must be positive");
    if (w <= 0 || h <= 0) throw std::invalid_argument("Camera: image dims must be positive");
    if (pose_.scale != 1.0) throw std::invalid_argument("Camera: pose scale must be 1");
  }
};

// Ray through pixel center (px + 0.5, py + 0.5), world frame, unit direction.
Ray camera_ray(const Camera& cam, int px, int py);

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;

  void validate() const;
  void bbox(Vec3& lo, Vec3& hi) const;
  double area() const;
};

// --- ray/triangle kernels -------------------------------------------------

// Closed-triangle intersection (boundary counts as a hit). Returns false for
// rays parallel to the plane even if coplanar; the distance kernel owns that case.
bool ray_triangle_intersect(const Ray& ray, const Vec3& v0, const Vec3& v1, const Vec3& v2,
                            double& t_out);

// Closest-pair witness between a ray (t >= 0) and a closed triangle.
// bary are barycentric coordinates of the closest triangle point; for an
// intersecting pair dist = 0 and both points coincide at the hit.
struct RayTriWitness {
  double dist = kInf;
  double t = 0.0;           // ray parameter of closest approach
  Vec3 point_ray;
  Vec3 point_tri;
  std::array<double, 3> bary{0, 0, 0};
  bool intersects = false;
};

RayTriWitness ray_triangle_distance_witness(const Ray& ray, const Vec3& v0, const Vec3& v1,
                                            const Vec3& v2);

inline double ray_triangle_distance(const Ray& ray, const Vec3& v0, const Vec3& v1, const Vec3& v2) {
  return ray_triangle_distance_witness(ray, v0, v1, v2).dist;
}

// Closest-pair witness between a ray and the triangle boundary (its three
// edges). Equal to the closed-triangle distance except when the closest
// feature is interior: a crossing ray gets the lateral distance to the
// nearest edge instead of zero, which is what a soft inside-coverage term
// wants (saturates deep inside, continuous across the silhouette).
RayTriWitness ray_boundary_distance_witness(const Ray& ray, const Vec3& v0, const Vec3& v1,
                                            const Vec3& v2);

// d(d^2)/d(vertex_k) = -2 * bary_k * (point_ray - point_tri); valid for both
// witness kinds, including at contact where it is the limit from outside.
inline void accumulate_d2_vertex_grads(const RayTriWitness& w, double coeff, Vec3& g0, Vec3& g1,
                                       Vec3& g2) {
  Vec3 delta = (w.point_ray - w.point_tri) * (-2.0 * coeff);
  g0 += delta * w.bary[0];
  g1 += delta * w.bary[1];
  g2 += delta * w.bary[2];
}

// Closest point on segment [a,b] to point p; s_out in [0,1].
Vec3 closest_point_segment(const Vec3& p, const Vec3& a, const Vec3& b, double& s_out);

// Closest point on a closed triangle to p, with barycentrics.
Vec3 closest_point_triangle(const Vec3& p, const Vec3& v0, const Vec3& v1, const Vec3& v2,
                            std::array<double, 3>& bary_out);

}  // namespace mirrorpose
