#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mirrorpose/geom.hpp"

namespace mirrorpose {

enum class SdfFamily { Sphere, Ellipsoid, RoundedBox, Bowl, Grid };

const char* family_name(SdfFamily f);
SdfFamily family_from_name(const std::string& s);
int family_latent_size(SdfFamily f);  // -1 for Grid (data dependent)

struct GridMeta {
  int nx = 0, ny = 0, nz = 0;
  Vec3 bmin, bmax;
  // Safe offset added to outside-the-box evals so a marching ray cannot
  // mistake the box face for the surface: min(0-clamped) boundary value.
  double boundary_floor = 0.0;
};

// A signed-distance shape: local field f placed by a similarity transform,
// world field G(p) = scale * f(R^-1 (p - T) / scale).
struct SdfShape {
  SdfFamily family = SdfFamily::Sphere;
  std::vector<double> latent;  // Sphere: r | Ellipsoid: rx ry rz |
                               // RoundedBox: hx hy hz rho | Bowl: R_out r_in cut_z |
                               // Grid: node values, x fastest
  Se3Scale placement;
  GridMeta grid;  // Grid family only
  std::string name;

  void validate() const;
};

SdfShape make_sphere(double radius, const Se3Scale& placement);
SdfShape make_ellipsoid(const Vec3& radii, const Se3Scale& placement);
SdfShape make_rounded_box(const Vec3& half_extent, double rounding, const Se3Scale& placement);
SdfShape make_bowl(double outer_radius, double inner_radius, double cut_z, const Se3Scale& placement);
SdfShape make_grid(int nx, int ny, int nz, const Vec3& bmin, const Vec3& bmax,
                   std::vector<double> values, const Se3Scale& placement);

// Local field value at q (shape frame). Grid outside its box returns the
// distance to the box plus the precomputed boundary floor.
double sdf_local(const SdfShape& shape, const Vec3& q);
// Local gradient df/dq. Throws std::domain_error for Grid outside its box.
Vec3 sdf_local_grad(const SdfShape& shape, const Vec3& q);

double sdf_eval(const SdfShape& shape, const Vec3& p);
// World gradient dG/dp = R df/dq. Not normalized.
Vec3 sdf_gradient(const SdfShape& shape, const Vec3& p);

// dG at fixed world point p with respect to the placement and latent.
// d_rotation is with respect to a left-applied axis-angle increment
// (R <- exp([delta]x) R at delta = 0).
struct SdfParamGrad {
  Vec3 d_translation;
  Vec3 d_rotation;
  double d_scale = 0.0;
  std::vector<std::pair<int, double>> d_latent;
};
SdfParamGrad sdf_param_grad(const SdfShape& shape, const Vec3& p);

struct SdfHit {
  Vec3 point;
  double depth = kInf;
  Vec3 normal;
  bool converged = false;
  double residual = kInf;
};

struct TraceExtras {
  double min_value = kInf;  // smallest field value seen along the ray
  double min_t = 0.0;
  int steps = 0;
};

// Signed sphere tracing from t = 0. Steps by the field value (scaled by a
// per-family safety factor for the approximate fields), converges when
// |G| <= eps. A tangential graze (|n.d| <= 1e-9 at the hit) reports
// non-converged. extras, if given, receives the refined minimum of G along
// the ray for soft-mask use.
SdfHit sphere_trace(const SdfShape& shape, const Ray& ray, int max_steps, double eps,
                    double t_max = 50.0, TraceExtras* extras = nullptr);

// Smallest field value along the ray from t_hit on (the start value when
// nothing lower is found), with its parameter in t_at. Signed counterpart of
// TraceExtras::min_value for rays that reach or nearly reach the surface.
double sdf_interior_min(const SdfShape& shape, const Ray& ray, double t_hit, double t_max,
                        double* t_at = nullptr);

// Nearest converged hit over a shape union; hit_index = -1 on miss.
SdfHit scene_trace(const std::vector<SdfShape>& shapes, const Ray& ray, int max_steps, double eps,
                   double t_max, int* hit_index = nullptr);

// Zero level set extraction over [lo, hi] with `resolution` cells per axis
// (>= 8). Cells are split into six tetrahedra sharing the main diagonal, so
// neighboring cells agree on face diagonals and the surface has no cracks.
// Vertices are deduplicated by grid edge; degenerate triangles are dropped.
TriMesh marching_cubes(const SdfShape& shape, const Vec3& lo, const Vec3& hi, int resolution);

// SDFGRID container: one ASCII header line
//   SDFGRID nx ny nz xmin ymin zmin xmax ymax zmax
// followed by nx*ny*nz little-endian 32-bit floats, x fastest.
SdfShape load_sdf_grid(const std::string& path, const Se3Scale& placement);
void save_sdf_grid(const std::string& path, const SdfShape& grid_shape);

// Wavefront OBJ, v/f records only, 1-based indices.
void export_obj(const std::string& path, const TriMesh& mesh);
TriMesh import_obj(const std::string& path);

}  // namespace mirrorpose
