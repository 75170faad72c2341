#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "mirrorpose/render.hpp"

namespace mirrorpose {

// Flat parameter vector with named segments so reports and errors can point
// at a specific coordinate.
struct ParamSegment {
  std::string name;
  int offset = 0;
  int length = 0;
};

struct ParamVector {
  std::vector<double> x;
  std::vector<ParamSegment> segments;

  int size() const { return static_cast<int>(x.size()); }
  void append(const std::string& name, const double* v, int n);
  void append(const std::string& name, std::initializer_list<double> v);
  const ParamSegment& find(const std::string& name) const;
  double* seg(const std::string& name);
  const double* seg(const std::string& name) const;
  std::string coord_name(int i) const;
  ParamVector zeros_like() const;
};

struct FitConfig {
  double lr = 0.01;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int iters_object = 300;
  int iters_human = 1400;
  int restarts_object = 5;
  int restarts_human = 8;
  double w_depth = 1.0;
  double w_mask = 1.0;
  double w_prior_object = 1e-3;
  double w_prior_human = 1e-3;
  // depth residuals turn linear past this point: observed and rendered depth
  // both jump at occlusion edges, and an unbounded square across that band
  // swamps the in-surface signal
  double depth_cap = 0.02;
  // silhouette temperature schedule: sigma0 halves every anneal_every
  // iterations down to sigma_floor
  double sigma0 = 1e-2;
  double sigma_floor = 1e-5;
  int sigma_anneal_every = 100;
  double sigma_anneal_factor = 0.5;
  uint64_t seed = 42;

  void validate() const;
  double sigma_at(int iteration) const;
};

struct AdamState {
  std::vector<double> m, v;
  int64_t t = 0;
};

// One bias-corrected Adam update, in place. Non-finite gradients raise an
// error naming the coordinate.
void adam_step(AdamState& st, ParamVector& params, const ParamVector& grad, const FitConfig& cfg);

// 1 - soft IoU. Pixels of `rendered` in [0,1], `observed` binary, same dims.
// An empty union returns 1 with a one-time degenerate-input warning.
double loss_silhouette(const SoftImage& rendered, const SoftImage& observed);

// Same loss restricted to a pixel subset, with dL/d(rendered value).
double loss_silhouette_sampled(const std::vector<double>& rendered,
                               const std::vector<double>& observed,
                               std::vector<double>* d_rendered);

double iou_hard(const SoftImage& rendered, const SoftImage& observed, double threshold = 0.5);

struct LossBreakdown {
  double total = 0, depth = 0, mask = 0, silhouette = 0, prior = 0;
};

struct FitResult {
  ParamVector params;
  LossBreakdown loss;
  int best_restart = -1;
  int iterations = 0;
  bool any_restart_finished = false;
  // winner's loss curve: iteration, total, depth, mask, silhouette, prior
  std::vector<std::array<double, 6>> trace;
};

// Distance between predicted and reference joints, also normalized by the
// reference bounding box diagonal.
struct MetricReport {
  std::vector<double> per_joint;
  double mean_err = 0;
  double norm_const = 1;
  double mean_norm_err = 0;
  double iou = 0;
};

MetricReport keypoint_metric(const std::vector<Vec3>& predicted, const std::vector<Vec3>& reference);

// --- finite-difference audit -------------------------------------------------

struct DiffLoss {
  std::function<double(const ParamVector&)> value;
  std::function<ParamVector(const ParamVector&)> gradient;
};

struct GradEntry {
  int index = 0;
  std::string name;
  double analytic = 0, numeric = 0, rel_err = 0;
};

struct GradReport {
  std::vector<GradEntry> entries;
  double max_rel_err = 0;
  int worst = -1;
  double tol = 0;
  bool pass = false;
};

// Central differences with step h against loss.gradient at `at`.
// rel_err = |a - n| / max(|a|, |n|, 1e-8).
GradReport gradcheck(const DiffLoss& loss, const ParamVector& at, double h, double tol);

}  // namespace mirrorpose
