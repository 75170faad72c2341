#include "mirrorpose/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace mirrorpose {

void ParamVector::append(const std::string& name, const double* v, int n) {
  segments.push_back({name, static_cast<int>(x.size()), n});
  x.insert(x.end(), v, v + n);
}

void ParamVector::append(const std::string& name, std::initializer_list<double> v) {
  append(name, v.begin(), static_cast<int>(v.size()));
}

const ParamSegment& ParamVector::find(const std::string& name) const {
  for (const auto& s : segments)
    if (s.name == name) return s;
  throw std::invalid_argument("ParamVector: no segment '" + name + "'");
}

double* ParamVector::seg(const std::string& name) { return x.data() + find(name).offset; }
const double* ParamVector::seg(const std::string& name) const { return x.data() + find(name).offset; }

std::string ParamVector::coord_name(int i) const {
  for (const auto& s : segments)
    if (i >= s.offset && i < s.offset + s.length)
      return s.name + "[" + std::to_string(i - s.offset) + "]";
  return "param[" + std::to_string(i) + "]";
}

ParamVector ParamVector::zeros_like() const {
  ParamVector z = *this;
  std::fill(z.x.begin(), z.x.end(), 0.0);
  return z;
}

void FitConfig::validate() const {
  if (!(lr > 0)) throw std::invalid_argument("FitConfig: lr must be positive");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1))
    throw std::invalid_argument("FitConfig: betas must be in [0, 1)");
  if (!(eps > 0)) throw std::invalid_argument("FitConfig: eps must be positive");
  if (iters_object < 1 || iters_human < 1)
    throw std::invalid_argument("FitConfig: iteration counts must be >= 1");
  if (restarts_object < 1 || restarts_human < 1)
    throw std::invalid_argument("FitConfig: restart counts must be >= 1");
  if (!(sigma0 > 0) || !(sigma_floor > 0) || sigma_floor > sigma0)
    throw std::invalid_argument("FitConfig: need sigma0 >= sigma_floor > 0");
  if (sigma_anneal_every < 1 || !(sigma_anneal_factor > 0) || sigma_anneal_factor >= 1)
    throw std::invalid_argument("FitConfig: bad sigma schedule");
  if (!(depth_cap > 0)) throw std::invalid_argument("FitConfig: depth_cap must be positive");
}

double FitConfig::sigma_at(int iteration) const {
  double s = sigma0 * std::pow(sigma_anneal_factor, iteration / sigma_anneal_every);
  return std::max(s, sigma_floor);
}

void adam_step(AdamState& st, ParamVector& params, const ParamVector& grad, const FitConfig& cfg) {
  size_t n = params.x.size();
  if (grad.x.size() != n) throw std::invalid_argument("adam_step: gradient size mismatch");
  if (st.m.empty()) {
    st.m.assign(n, 0.0);
    st.v.assign(n, 0.0);
    st.t = 0;
  }
  if (st.m.size() != n) throw std::invalid_argument("adam_step: state size mismatch");
  for (size_t i = 0; i < n; ++i)
    if (!std::isfinite(grad.x[i]))
      throw std::runtime_error("adam_step: non-finite gradient at " +
                               params.coord_name(static_cast<int>(i)));
  ++st.t;
  double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.t));
  double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.t));
  for (size_t i = 0; i < n; ++i) {
    st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * grad.x[i];
    st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * grad.x[i] * grad.x[i];
    double mh = st.m[i] / c1;
    double vh = st.v[i] / c2;
    params.x[i] -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
  }
}

namespace {
void warn_degenerate_once() {
  static bool warned = false;
  if (!warned) {
    std::fprintf(stderr, "warning: silhouette loss over an empty union, returning 1\n");
    warned = true;
  }
}
}  // namespace

double loss_silhouette_sampled(const std::vector<double>& rendered,
                               const std::vector<double>& observed,
                               std::vector<double>* d_rendered) {
  if (rendered.size() != observed.size())
    throw std::invalid_argument("loss_silhouette: size mismatch");
  double inter = 0.0, uni = 0.0;
  for (size_t i = 0; i < rendered.size(); ++i) {
    double r = rendered[i], o = observed[i];
    if (!(r >= 0.0) || !(r <= 1.0)) throw std::invalid_argument("loss_silhouette: rendered value outside [0, 1]");
    inter += r * o;
    uni += r + o - r * o;
  }
  if (uni <= 0.0) {
    warn_degenerate_once();
    if (d_rendered) d_rendered->assign(rendered.size(), 0.0);
    return 1.0;
  }
  if (d_rendered) {
    d_rendered->resize(rendered.size());
    for (size_t i = 0; i < rendered.size(); ++i) {
      double o = observed[i];
      // d/dr [1 - inter/uni]; dinter/dr = o, duni/dr = 1 - o
      (*d_rendered)[i] = -(o * uni - inter * (1.0 - o)) / (uni * uni);
    }
  }
  return 1.0 - inter / uni;
}

double loss_silhouette(const SoftImage& rendered, const SoftImage& observed) {
  if (rendered.width != observed.width || rendered.height != observed.height)
    throw std::invalid_argument("loss_silhouette: image dims differ");
  if (!observed.is_binary())
    throw std::invalid_argument("loss_silhouette: observation must be binary");
  return loss_silhouette_sampled(rendered.values, observed.values, nullptr);
}

double iou_hard(const SoftImage& rendered, const SoftImage& observed, double threshold) {
  if (rendered.width != observed.width || rendered.height != observed.height)
    throw std::invalid_argument("iou_hard: image dims differ");
  double inter = 0, uni = 0;
  for (size_t i = 0; i < rendered.values.size(); ++i) {
    bool r = rendered.values[i] >= threshold;
    bool o = observed.values[i] >= 0.5;
    inter += (r && o) ? 1 : 0;
    uni += (r || o) ? 1 : 0;
  }
  return uni > 0 ? inter / uni : 1.0;
}

MetricReport keypoint_metric(const std::vector<Vec3>& predicted,
                             const std::vector<Vec3>& reference) {
  if (predicted.size() != reference.size() || predicted.empty())
    throw std::invalid_argument("keypoint_metric: joint lists must match and be non-empty");
  MetricReport r;
  Vec3 lo{kInf, kInf, kInf}, hi{-kInf, -kInf, -kInf};
  for (const Vec3& g : reference)
    for (int i = 0; i < 3; ++i) {
      lo[i] = std::min(lo[i], g[i]);
      hi[i] = std::max(hi[i], g[i]);
    }
  r.norm_const = std::max(norm(hi - lo), 1e-9);
  double s = 0;
  for (size_t i = 0; i < predicted.size(); ++i) {
    double d = norm(predicted[i] - reference[i]);
    r.per_joint.push_back(d);
    s += d;
  }
  r.mean_err = s / predicted.size();
  r.mean_norm_err = r.mean_err / r.norm_const;
  return r;
}

GradReport gradcheck(const DiffLoss& loss, const ParamVector& at, double h, double tol) {
  if (!(h > 0)) throw std::invalid_argument("gradcheck: step must be positive");
  if (!loss.value || !loss.gradient) throw std::invalid_argument("gradcheck: missing callbacks");
  GradReport rep;
  rep.tol = tol;
  ParamVector g = loss.gradient(at);
  if (g.x.size() != at.x.size()) throw std::invalid_argument("gradcheck: gradient size mismatch");
  ParamVector probe = at;
  for (int i = 0; i < at.size(); ++i) {
    probe.x[i] = at.x[i] + h;
    double fp = loss.value(probe);
    probe.x[i] = at.x[i] - h;
    double fm = loss.value(probe);
    probe.x[i] = at.x[i];
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw std::runtime_error("gradcheck: non-finite loss probing " + at.coord_name(i));
    double numeric = (fp - fm) / (2.0 * h);
    double analytic = g.x[i];
    double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    double rel = std::abs(analytic - numeric) / scale;
    rep.entries.push_back({i, at.coord_name(i), analytic, numeric, rel});
    if (rel > rep.max_rel_err) {
      rep.max_rel_err = rel;
      rep.worst = i;
    }
  }
  rep.pass = rep.max_rel_err <= tol;
  return rep;
}

}  // namespace mirrorpose
