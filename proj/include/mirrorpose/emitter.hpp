#pragma once

#include <string>
#include <vector>

#include "mirrorpose/geom.hpp"

namespace mirrorpose {

struct Joint {
  std::string name;
  int parent = -1;  // -1 root; parents precede children in the array
  Vec3 offset;      // joint position in the parent joint frame
  double radius = 0.02;  // capsule radius of the bone that ends at this joint
};

struct Skeleton {
  std::vector<Joint> joints;
  int size() const { return static_cast<int>(joints.size()); }
  void validate() const;
};

// 17 joints, 16 bones: pelvis/spine/chest/neck/head column, two arms from the
// chest, two legs from the pelvis. Model frame is y-up, T pose, meters.
Skeleton default17_skeleton();

struct EmitterModel {
  Skeleton skeleton;
  std::vector<double> pose;  // 3 axis-angle values per non-root joint
  Se3Scale placement;        // model frame to world
  int segments = 8;          // capsule tessellation, >= 4

  void validate() const;
};

// One forward evaluation: kinematics, capsule instancing, world placement.
// Kept around for the backward pass and for per-bone culling.
struct EmitterForward {
  TriMesh mesh;  // world space
  std::vector<Mat3> joint_rot;   // model frame, per joint
  std::vector<Vec3> joint_pos;
  std::vector<Mat3> local_rot;   // exp of each joint's axis-angle (identity for root)
  std::vector<int> bone_end_joint;    // bone b is the capsule ending at this joint
  std::vector<int> bone_vert_begin;   // [b, b+1) vertex range; last entry = total
  std::vector<int> bone_tri_begin;    // triangle range per bone, same layout
  std::vector<Vec3> bone_template;    // template vertices, concatenated per bone
  std::vector<Vec3> bone_sphere_center;  // world bounding sphere per bone
  std::vector<double> bone_sphere_radius;
  Vec3 centroid;        // world mesh centroid
  double bound_radius = 1.0;  // world bounding sphere radius (distance normalizer)
};

EmitterForward emitter_forward(const EmitterModel& m);
TriMesh build_emitter_mesh(const EmitterModel& m);

// World joint positions in skeleton order.
std::vector<Vec3> joint_positions(const EmitterModel& m);

// Pulls dL/d(world vertex) back to placement and pose parameters.
struct EmitterGrads {
  Vec3 d_translation;
  Vec3 d_rotation;  // left axis-angle increment on the placement rotation
  std::vector<double> d_pose;
};
EmitterGrads emitter_backward(const EmitterModel& m, const EmitterForward& fwd,
                              const std::vector<Vec3>& d_vertices);

// Squared norm of the pose vector; keeps joints near the rest pose.
double pose_prior(const EmitterModel& m);
void pose_prior_grad(const EmitterModel& m, double weight, std::vector<double>& grad_inout);

}  // namespace mirrorpose
