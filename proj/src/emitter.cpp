#include "mirrorpose/emitter.hpp"

#include <algorithm>
#include <cmath>

namespace mirrorpose {

void Skeleton::validate() const {
  if (joints.empty()) throw std::invalid_argument("Skeleton: no joints");
  if (joints[0].parent != -1) throw std::invalid_argument("Skeleton: joint 0 must be the root");
  for (int i = 0; i < size(); ++i) {
    const Joint& j = joints[i];
    if (i > 0 && (j.parent < 0 || j.parent >= i))
      throw std::invalid_argument("Skeleton: parent of '" + j.name + "' must precede it");
    if (!(j.radius > 0)) throw std::invalid_argument("Skeleton: joint radius must be positive");
    if (!finite(j.offset)) throw std::invalid_argument("Skeleton: non-finite offset");
    if (i > 0 && norm(j.offset) < 1e-9)
      throw std::invalid_argument("Skeleton: zero-length bone at '" + j.name + "'");
  }
}

Skeleton default17_skeleton() {
  Skeleton s;
  auto add = [&](const char* name, int parent, double ox, double oy, double oz, double r) {
    s.joints.push_back({name, parent, {ox, oy, oz}, r});
  };
  add("pelvis", -1, 0, 0, 0, 0.09);
  add("spine", 0, 0, 0.15, 0, 0.082);
  add("chest", 1, 0, 0.15, 0, 0.09);
  add("neck", 2, 0, 0.12, 0, 0.042);
  add("head", 3, 0, 0.14, 0, 0.088);
  add("l_shoulder", 2, 0.16, 0.05, 0, 0.047);
  add("l_elbow", 5, 0.26, 0, 0, 0.04);
  add("l_wrist", 6, 0.25, 0, 0, 0.034);
  add("r_shoulder", 2, -0.16, 0.05, 0, 0.047);
  add("r_elbow", 8, -0.26, 0, 0, 0.04);
  add("r_wrist", 9, -0.25, 0, 0, 0.034);
  add("l_hip", 0, 0.09, -0.06, 0, 0.062);
  add("l_knee", 11, 0, -0.38, 0, 0.055);
  add("l_ankle", 12, 0, -0.38, 0, 0.044);
  add("r_hip", 0, -0.09, -0.06, 0, 0.062);
  add("r_knee", 14, 0, -0.38, 0, 0.055);
  add("r_ankle", 15, 0, -0.38, 0, 0.044);
  s.validate();
  return s;
}

void EmitterModel::validate() const {
  skeleton.validate();
  if (static_cast<int>(pose.size()) != 3 * (skeleton.size() - 1))
    throw std::invalid_argument("EmitterModel: pose needs 3 values per non-root joint");
  for (double v : pose)
    if (!std::isfinite(v)) throw std::invalid_argument("EmitterModel: non-finite pose");
  for (int j = 1; j < skeleton.size(); ++j) {
    Vec3 aa{pose[3 * (j - 1)], pose[3 * (j - 1) + 1], pose[3 * (j - 1) + 2]};
    if (norm(aa) > M_PI + 1e-9)
      throw std::invalid_argument("EmitterModel: joint rotation beyond pi at '" +
                                  skeleton.joints[j].name + "'");
  }
  if (segments < 4) throw std::invalid_argument("EmitterModel: segments must be >= 4");
}

namespace {

// Capsule around the segment 0 -> axis in the parent joint frame.
// 2*s*(s/2) ring vertices plus two poles; 2*s^2 triangles for even s, the
// closed genus-0 count for that vertex budget.
void append_capsule_template(const Vec3& axis, double r, int s, std::vector<Vec3>& verts,
                             std::vector<std::array<int, 3>>& tris) {
  int base = static_cast<int>(verts.size());
  int h = s / 2;
  Vec3 a = normalized(axis);
  Vec3 e = std::abs(a.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
  Vec3 u = normalized(cross(a, e));
  Vec3 v = cross(a, u);

  verts.push_back(a * (-r));  // bottom pole
  // Rings walk from just above the bottom pole to just below the top pole:
  // h rings on the bottom cap (equator last), then h rings mirrored on the
  // top cap starting at its equator.
  for (int m = 1; m <= h; ++m) {
    double phi = -M_PI / 2 + (M_PI / 2) * m / h;
    double cr = r * std::cos(phi), ca = r * std::sin(phi);
    for (int j = 0; j < s; ++j) {
      double th = 2 * M_PI * j / s;
      verts.push_back(a * ca + (u * std::cos(th) + v * std::sin(th)) * cr);
    }
  }
  for (int m = 0; m < h; ++m) {
    double phi = (M_PI / 2) * m / h;
    double cr = r * std::cos(phi), ca = r * std::sin(phi);
    for (int j = 0; j < s; ++j) {
      double th = 2 * M_PI * j / s;
      verts.push_back(axis + a * ca + (u * std::cos(th) + v * std::sin(th)) * cr);
    }
  }
  verts.push_back(axis + a * r);  // top pole

  int rings = 2 * h;
  auto ring_v = [&](int ring, int j) { return base + 1 + ring * s + (j % s); };
  int top_pole = base + 1 + rings * s;
  for (int j = 0; j < s; ++j) tris.push_back({base, ring_v(0, j + 1), ring_v(0, j)});
  for (int ring = 0; ring + 1 < rings; ++ring)
    for (int j = 0; j < s; ++j) {
      int a0 = ring_v(ring, j), a1 = ring_v(ring, j + 1);
      int b0 = ring_v(ring + 1, j), b1 = ring_v(ring + 1, j + 1);
      tris.push_back({a0, a1, b1});
      tris.push_back({a0, b1, b0});
    }
  for (int j = 0; j < s; ++j) tris.push_back({top_pole, ring_v(rings - 1, j), ring_v(rings - 1, j + 1)});
}

}  // namespace

EmitterForward emitter_forward(const EmitterModel& m) {
  m.validate();
  const Skeleton& sk = m.skeleton;
  int J = sk.size();
  EmitterForward f;
  f.joint_rot.resize(J);
  f.joint_pos.resize(J);
  f.local_rot.resize(J);

  f.local_rot[0] = Mat3::identity();
  f.joint_rot[0] = Mat3::identity();
  f.joint_pos[0] = sk.joints[0].offset;
  for (int j = 1; j < J; ++j) {
    Vec3 aa{m.pose[3 * (j - 1)], m.pose[3 * (j - 1) + 1], m.pose[3 * (j - 1) + 2]};
    f.local_rot[j] = rotation_exp(aa);
    int p = sk.joints[j].parent;
    f.joint_rot[j] = f.joint_rot[p] * f.local_rot[j];
    f.joint_pos[j] = f.joint_pos[p] + f.joint_rot[p] * sk.joints[j].offset;
  }

  // One capsule per non-root joint, templated in its parent's frame.
  for (int j = 1; j < J; ++j) {
    int p = sk.joints[j].parent;
    f.bone_end_joint.push_back(j);
    f.bone_vert_begin.push_back(static_cast<int>(f.mesh.vertices.size()));
    f.bone_tri_begin.push_back(static_cast<int>(f.mesh.triangles.size()));
    size_t tpl_begin = f.bone_template.size();
    append_capsule_template(sk.joints[j].offset, sk.joints[j].radius, m.segments, f.bone_template,
                            f.mesh.triangles);
    // append_capsule_template indexed triangles against bone_template growth;
    // those indices are already correct because mesh vertices grow in step.
    Vec3 clo{kInf, kInf, kInf}, chi{-kInf, -kInf, -kInf};
    for (size_t t = tpl_begin; t < f.bone_template.size(); ++t) {
      Vec3 w = m.placement.apply(f.joint_pos[p] + f.joint_rot[p] * f.bone_template[t]);
      f.mesh.vertices.push_back(w);
      for (int c = 0; c < 3; ++c) {
        clo[c] = std::min(clo[c], w[c]);
        chi[c] = std::max(chi[c], w[c]);
      }
    }
    Vec3 center = (clo + chi) * 0.5;
    double r2 = 0.0;
    for (size_t t = f.bone_vert_begin.back(); t < f.mesh.vertices.size(); ++t)
      r2 = std::max(r2, norm2(f.mesh.vertices[t] - center));
    f.bone_sphere_center.push_back(center);
    f.bone_sphere_radius.push_back(std::sqrt(r2));
  }
  f.bone_vert_begin.push_back(static_cast<int>(f.mesh.vertices.size()));
  f.bone_tri_begin.push_back(static_cast<int>(f.mesh.triangles.size()));

  Vec3 c{0, 0, 0};
  for (const Vec3& v : f.mesh.vertices) c += v;
  c = c / static_cast<double>(f.mesh.vertices.size());
  double r2 = 0.0;
  for (const Vec3& v : f.mesh.vertices) r2 = std::max(r2, norm2(v - c));
  f.centroid = c;
  f.bound_radius = std::max(std::sqrt(r2), 1e-6);
  return f;
}

TriMesh build_emitter_mesh(const EmitterModel& m) { return emitter_forward(m).mesh; }

std::vector<Vec3> joint_positions(const EmitterModel& m) {
  m.validate();
  const Skeleton& sk = m.skeleton;
  int J = sk.size();
  std::vector<Mat3> R(J);
  std::vector<Vec3> P(J);
  R[0] = Mat3::identity();
  P[0] = sk.joints[0].offset;
  for (int j = 1; j < J; ++j) {
    int p = sk.joints[j].parent;
    Vec3 aa{m.pose[3 * (j - 1)], m.pose[3 * (j - 1) + 1], m.pose[3 * (j - 1) + 2]};
    R[j] = R[p] * rotation_exp(aa);
    P[j] = P[p] + R[p] * sk.joints[j].offset;
  }
  std::vector<Vec3> out(J);
  for (int j = 0; j < J; ++j) out[j] = m.placement.apply(P[j]);
  return out;
}

EmitterGrads emitter_backward(const EmitterModel& m, const EmitterForward& fwd,
                              const std::vector<Vec3>& d_vertices) {
  const Skeleton& sk = m.skeleton;
  int J = sk.size();
  if (d_vertices.size() != fwd.mesh.vertices.size())
    throw std::invalid_argument("emitter_backward: gradient size mismatch");

  EmitterGrads out;
  out.d_pose.assign(3 * (J - 1), 0.0);

  // Placement gradients straight off the world vertices, then pull the rest
  // back to the model frame and bucket per joint: gP pairs with joint_pos,
  // gR (Frobenius) with joint_rot.
  double s = m.placement.scale;
  const Quat& q = m.placement.rotation;
  std::vector<Vec3> gP(J, Vec3{0, 0, 0});
  std::vector<Mat3> gR(J, Mat3::zero());
  int n_bones = static_cast<int>(fwd.bone_end_joint.size());
  for (int b = 0; b < n_bones; ++b) {
    int j = fwd.bone_end_joint[b];
    int p = sk.joints[j].parent;
    for (int vi = fwd.bone_vert_begin[b]; vi < fwd.bone_vert_begin[b + 1]; ++vi) {
      const Vec3& dv = d_vertices[vi];
      if (dv.x == 0 && dv.y == 0 && dv.z == 0) continue;
      out.d_translation += dv;
      out.d_rotation += cross(fwd.mesh.vertices[vi] - m.placement.translation, dv);
      Vec3 dmodel = q.conjugate().rotate(dv) * s;
      gP[p] += dmodel;
      const Vec3& x = fwd.bone_template[vi];  // template shares mesh indexing
      gR[p] = gR[p] + outer(dmodel, x);
    }
  }

  // Forward-mode sweep per pose coordinate; only the subtree of the turned
  // joint carries nonzero derivatives.
  std::vector<Mat3> dR(J);
  std::vector<Vec3> dP(J);
  std::vector<char> active(J);
  for (int jq = 1; jq < J; ++jq) {
    Vec3 aa{m.pose[3 * (jq - 1)], m.pose[3 * (jq - 1) + 1], m.pose[3 * (jq - 1) + 2]};
    std::array<Mat3, 3> dA = rotation_exp_jacobian(aa);
    for (int k = 0; k < 3; ++k) {
      std::fill(active.begin(), active.end(), 0);
      int p = sk.joints[jq].parent;
      dR[jq] = fwd.joint_rot[p] * dA[k];
      dP[jq] = {0, 0, 0};
      active[jq] = 1;
      double acc = frobenius_dot(dR[jq], gR[jq]);
      for (int j = jq + 1; j < J; ++j) {
        int pj = sk.joints[j].parent;
        if (!active[pj]) continue;
        active[j] = 1;
        dR[j] = dR[pj] * fwd.local_rot[j];
        dP[j] = dP[pj] + dR[pj] * sk.joints[j].offset;
        acc += dot(dP[j], gP[j]) + frobenius_dot(dR[j], gR[j]);
      }
      out.d_pose[3 * (jq - 1) + k] = acc;
    }
  }
  return out;
}

double pose_prior(const EmitterModel& m) {
  double s = 0.0;
  for (double v : m.pose) s += v * v;
  return s;
}

void pose_prior_grad(const EmitterModel& m, double weight, std::vector<double>& grad_inout) {
  if (grad_inout.size() != m.pose.size())
    throw std::invalid_argument("pose_prior_grad: size mismatch");
  for (size_t i = 0; i < m.pose.size(); ++i) grad_inout[i] += 2.0 * weight * m.pose[i];
}

}  // namespace mirrorpose
