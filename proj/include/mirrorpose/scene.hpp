#pragma once

#include <optional>

#include "mirrorpose/optimize.hpp"

namespace mirrorpose {

// Restart sampling volume around the declared values.
struct InitBounds {
  Vec3 center{0, 0, 0};
  bool center_set = false;  // center defaults to the declared translation
  Vec3 extent{0.05, 0.05, 0.05};
  double rot_max_deg = 20.0;
  double scale_min = 0.9, scale_max = 1.1;
  double latent_rel = 0.15;  // object latent: uniform relative half-range
  double pose_std = 0.25;    // emitter pose: gaussian stddev per coordinate
};

struct SceneObject {
  SdfShape shape;
  bool optimize_pose = true;    // translation, rotation, scale
  bool optimize_shape = false;  // family latent
  InitBounds init;
  std::string mask_path;  // per-object binary mask observation
  std::string grid_path;  // grid payload file (grid family only)
};

struct SceneEmitter {
  EmitterModel model;
  InitBounds init;
  std::string skeleton_name = "default17";  // "custom" round-trips joint lines
};

struct Observations {
  DepthMap depth;
  bool has_depth = false;
  std::string depth_path;
  std::vector<SoftImage> masks;  // aligned with scene objects
  std::vector<uint8_t> has_mask;
  SoftImage silhouette;
  bool has_silhouette = false;
  std::string silhouette_path;
  std::string gt_joints_path;  // reference joints for ablation metrics
};

struct Scene {
  int version = 1;
  uint64_t seed = 42;
  Camera camera;
  RenderConfig render;
  FitConfig fit;
  std::vector<SceneObject> objects;
  std::optional<SceneEmitter> emitter;
  Observations obs;
  std::string dir;  // directory of the scene file, base for relative paths

  void validate() const;
};

// Line-oriented `key = value` text with [section] and repeatable [[objects]]
// blocks. Unknown keys and sections are errors with line numbers. Referenced
// observation and grid files are loaded relative to the scene file.
Scene parse_scene(const std::string& path);
std::string serialize_scene(const Scene& scene);
void save_scene(const Scene& scene, const std::string& path);

// --- image and table io -------------------------------------------------------

// 8-bit binary PGM (P5, maxval 255). Loading maps >= 128 to 1.
SoftImage load_pgm(const std::string& path);
void save_pgm(const std::string& path, const SoftImage& img);

// Grayscale PFM ('Pf'), little-endian (negative scale), rows bottom to top.
// The no-surface sentinel is written as 1e30 and restored to +inf.
DepthMap load_pfm(const std::string& path);
void save_pfm(const std::string& path, const DepthMap& depth);

// RFC 4180 csv with a header row.
void save_csv(const std::string& path, const std::vector<std::string>& header,
              const std::vector<std::vector<std::string>>& rows);

std::vector<std::pair<std::string, Vec3>> load_joints_csv(const std::string& path);
void save_joints_csv(const std::string& path,
                     const std::vector<std::pair<std::string, Vec3>>& joints);

// --- fitting ------------------------------------------------------------------

// Stage 1: per-object pose/scale/shape against depth and mask observations.
// Objects with both optimize flags off are skipped. The scene's objects are
// updated to the best restart.
std::vector<FitResult> fit_object(Scene& scene, const FitConfig& cfg);

// One-object loss underlying fit_object: squared depth residuals over rays
// that hit the object in front of other_depth, plus a soft coverage mask
// term. grad (optional) must be packed as fit_object packs parameters.
LossBreakdown object_fit_loss(const SceneObject& o, size_t obs_index, const Scene& scene,
                              const FitConfig& cfg, const std::vector<double>& other_depth,
                              const std::vector<double>& latent_ref, int n_depth_obs,
                              double mask_sigma, ParamVector* grad);

// Stage 2: emitter placement and pose against the binary reflection
// silhouette, holding objects fixed. Updates scene.emitter.
FitResult fit_human(Scene& scene, const FitConfig& cfg);

// Whole-image silhouette loss of the current scene emitter at sigma_floor,
// plus hard IoU; used for reporting and restart selection.
LossBreakdown eval_human(const Scene& scene, const FitConfig& cfg, double* iou_out);

struct AblationRow {
  std::string variant;
  MetricReport metric;
  double final_loss = kInf;
  bool failed = false;
};

// Runs fit_human once per variant under identical seeds and budgets.
// Variants: full, no_edge_sampling, sphere_steps_1, no_smoothing.
std::vector<AblationRow> ablate_run(const Scene& scene, const std::vector<std::string>& variants);

// --- synthetic scenes -----------------------------------------------------------

// Writes a ready-to-fit scene directory: scene.toml (perturbed starting
// point), gt_scene.toml (exact), rendered observations, and reference joints
// where an emitter is present. depth_noise is a gaussian sigma in meters;
// hole_frac knocks out that fraction of valid depth pixels.
void make_synthetic(const std::string& preset, const std::string& out_dir, uint64_t seed,
                    double depth_noise, double hole_frac);

std::vector<std::string> synthetic_presets();

// Binary reflection silhouette: 1 where the reflected ray intersects the
// emitter mesh at all. Used to produce observations.
SoftImage render_hard_silhouette(const ReflectionCache& cache, const TriMesh& mesh);

}  // namespace mirrorpose
