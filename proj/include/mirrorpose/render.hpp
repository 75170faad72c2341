#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "mirrorpose/emitter.hpp"
#include "mirrorpose/sdf.hpp"

namespace mirrorpose {

struct RenderConfig {
  // soft silhouette
  double sigma = 1e-2;          // influence temperature on normalized squared distance
  double influence_cutoff = 30.0;  // drop miss terms with d~^2/sigma above this
  // sphere tracing
  int sphere_steps = 64;
  double trace_eps = 1e-4;
  double t_max = 50.0;
  // mirror normal smoothing (average over rays of the 8 neighboring
  // sub-pixel offsets)
  bool smoothing = true;
  double smooth_delta = 0.5;  // neighbor offset in pixels
  // per-object soft masks on missed rays
  double mask_sigma = 5e-4;
  // silhouette pixel sampling schedule
  bool edge_sampling = true;
  int ray_budget = 1024;
  double uniform_floor = 0.1;
  double uniform_decay_iters = 500.0;
  double edge_std0 = 8.0;
  double edge_std_decay = 0.99;
  double edge_std_floor = 1.0;

  void validate() const;
};

struct SoftImage {
  int width = 0, height = 0;
  std::vector<double> values;  // row-major, y * width + x

  SoftImage() = default;
  SoftImage(int w, int h, double v = 0.0)
      : width(w), height(h), values(static_cast<size_t>(w) * h, v) {}
  double& at(int x, int y) { return values[static_cast<size_t>(y) * width + x]; }
  double at(int x, int y) const { return values[static_cast<size_t>(y) * width + x]; }
  bool is_binary() const;
};

struct DepthMap {
  int width = 0, height = 0;
  std::vector<double> values;  // kInf where no surface

  DepthMap() = default;
  DepthMap(int w, int h) : width(w), height(h), values(static_cast<size_t>(w) * h, kInf) {}
  double& at(int x, int y) { return values[static_cast<size_t>(y) * width + x]; }
  double at(int x, int y) const { return values[static_cast<size_t>(y) * width + x]; }
};

struct PixelRC {
  int x = 0, y = 0;
};

// Mirror reflection of direction r about (unnormalized) surface normal n.
Vec3 reflect(const Vec3& r, const Vec3& n);

// sigmoid(lambda * d^2 / sigma); lambda is +1 (crossing) or -1 (miss).
double soft_influence(double dist, double lambda, double sigma);

// 1 - prod(1 - x_i) over per-triangle influences in [0, 1].
double aggregate_occupancy(const std::vector<double>& influences);

// Normal at the mirror hit of pixel (px, py), averaged over the hits of the
// eight neighboring rays offset by cfg.smooth_delta pixels. Throws if the
// center ray misses the shape.
Vec3 smoothed_normal(const SdfShape& shape, const Camera& cam, int px, int py,
                     const RenderConfig& cfg);

// Per-pixel mirror hits and reflected rays. Mirrors are static during human
// fitting, so this is built once and reused across iterations.
struct ReflectionCache {
  int width = 0, height = 0;
  std::vector<uint8_t> valid;
  std::vector<Ray> rays;
  std::vector<int> mirror_id;
  std::vector<double> mirror_depth;
};

ReflectionCache build_reflection_cache(const std::vector<SdfShape>& mirrors, const Camera& cam,
                                       const RenderConfig& cfg);

// One soft-silhouette evaluation, optionally restricted to a pixel subset and
// optionally keeping per-term records for the backward pass.
struct ReflectionRender {
  std::vector<PixelRC> pixels;
  std::vector<double> values;  // aligned with pixels

  struct Term {
    int tri;
    double infl;
    double dinfl_dd2;  // d infl / d (raw squared distance)
    RayTriWitness wit;
  };
  std::vector<Term> terms;
  std::vector<std::pair<int, int>> pixel_term_range;
  double inv_norm2 = 1.0;  // 1 / bound_radius^2 (stop-grad normalizer)

  SoftImage to_image(int width, int height) const;
};

ReflectionRender render_reflection_sampled(const ReflectionCache& cache,
                                           const EmitterForward& emitter, const Camera& cam,
                                           const RenderConfig& cfg,
                                           const std::vector<PixelRC>* pixels,
                                           bool keep_records);

// Full-frame convenience wrapper: trace mirrors, reflect, soft-rasterize.
SoftImage render_reflection(const std::vector<SdfShape>& mirrors, const EmitterModel& emitter,
                            const Camera& cam, const RenderConfig& cfg);

// dL/d(world vertex) from dL/d(pixel value); requires keep_records.
std::vector<Vec3> reflection_backward(const ReflectionRender& rr, const EmitterForward& emitter,
                                      const std::vector<double>& d_values);

// Depth and per-object soft masks of directly visible objects.
struct DepthMaskRender {
  DepthMap depth;
  std::vector<SoftImage> masks;  // one per object
  std::vector<int> identity;     // nearest object per pixel, -1 where none
};

DepthMaskRender render_depth_mask(const std::vector<SdfShape>& objects, const Camera& cam,
                                  const RenderConfig& cfg);

// Pixels where a binary image changes against a 4-neighbor.
std::vector<PixelRC> silhouette_edges(const SoftImage& observed);

// Mixture of uniform and edge-concentrated pixel samples; the uniform share
// decays to uniform_floor and the edge bandwidth anneals toward
// edge_std_floor as the iteration count grows. Deduplicated. A blank image
// falls back to uniform sampling.
std::vector<PixelRC> edge_sample_rays(const SoftImage& observed, int iteration,
                                      const RenderConfig& cfg, std::mt19937_64& rng);

}  // namespace mirrorpose
