#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "layoutpnp/geom.hpp"
#include "layoutpnp/pnp.hpp"

namespace layoutpnp {

using BoxCorners = std::array<Vec3, 8>;
using BottomFace = std::array<Vec3, 4>;

// A rigid 3D asset in its own frame. Corner i of the canonical box built by
// from_extent has x from bit 0, y from bit 1 and z from bit 2 of i, so the
// bottom face is corners 0..3.
struct SceneObject {
  std::string id;
  std::vector<Vec3> keypoints;
  BoxCorners bbox_corners{};
  BottomFace bottom_vertices{};
  std::optional<std::string> mesh_path;

  // Throws InvalidInput when the invariants do not hold.
  void validate() const;

  static SceneObject from_extent(std::string id, const Vec3& lo, const Vec3& hi,
                                 std::vector<Vec3> keypoints);
};

BoxCorners box_corners(const Vec3& lo, const Vec3& hi);
BoxCorners transform_box(const RigidTransform& tr, const BoxCorners& box);

// What the joint optimizer sees of an object: its collision boxes and the
// four vertices that should touch the floor, all in the body frame. A plain
// object has one box; a merged compound has one box per member.
struct Body {
  std::string id;
  std::vector<BoxCorners> boxes;
  BottomFace bottom{};

  static Body from_object(const SceneObject& object);
};

std::vector<Body> to_bodies(std::span<const SceneObject> objects);

struct SiPnpConfig {
  double omega_surface = 1e6;
  double omega_collision = 1e4;
  double learning_rate = 1e-3;
  int steps = 2000;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  bool optimize_plane = true;
  int trace_every = 10;

  void validate() const;
};

struct LossComponents {
  double reprojection = 0.0;
  double surface = 0.0;
  double collision = 0.0;
  double total = 0.0;
};

struct LossTraceEntry {
  int step = 0;
  double reprojection = 0.0;
  double surface = 0.0;
  double collision = 0.0;
  double total = 0.0;
};

struct SceneSolution {
  std::map<std::string, RigidTransform> transforms;
  Plane floor;
  std::vector<LossTraceEntry> loss_trace;
  std::map<std::string, std::vector<std::size_t>> inliers;
  std::map<std::string, double> matching_scores;
  std::vector<std::string> neglected;
  bool diverged = false;
  // Step whose parameters were returned (the lowest total loss seen).
  int selected_step = 0;
};

// Free parameters of the joint problem. Quaternions are stored raw; every
// loss evaluates R(q / |q|) and the plane (n, d) / |n|, so the loss is
// invariant to rescaling either.
struct SceneParams {
  std::vector<Vec4> quaternions;
  std::vector<Vec3> translations;
  Vec4 plane{0.0, 0.0, 1.0, 0.0};

  static SceneParams from(std::span<const RigidTransform> transforms, const Plane& floor);
  std::vector<RigidTransform> transforms() const;

  // [q0 t0 q1 t1 ... plane]; the plane block is present only if requested.
  Eigen::VectorXd flatten(bool with_plane) const;
  static SceneParams unflatten(const Eigen::VectorXd& x, std::size_t n_bodies,
                               const Vec4& plane_if_absent);
};

struct SceneGradient {
  std::vector<Vec4> quaternions;
  std::vector<Vec3> translations;
  std::optional<Vec4> plane;

  Eigen::VectorXd flatten() const;
};

// Per-body correspondence lists, aligned with the body list. Callers pass
// RANSAC inliers only.
using CorrespondenceLists = std::span<const std::vector<Correspondence>>;

// Squared pixel error summed over all bodies and matches.
double reprojection_loss(const CameraIntrinsics& k, std::span<const RigidTransform> transforms,
                         CorrespondenceLists correspondences);

// Squared signed distance of each transformed bottom vertex to the floor.
double surface_loss(std::span<const Body> bodies, std::span<const RigidTransform> transforms,
                    const Plane& floor);
double surface_loss(std::span<const SceneObject> objects,
                    std::span<const RigidTransform> transforms, const Plane& floor);

// IOU of the axis-aligned hulls of two corner sets, in [0, 1].
double bbox_iou_3d(const BoxCorners& a, const BoxCorners& b);

// Sum over unordered body pairs i < j of the IOUs between their boxes.
double collision_loss(std::span<const Body> bodies, std::span<const RigidTransform> transforms);
double collision_loss(std::span<const SceneObject> objects,
                      std::span<const RigidTransform> transforms);

LossComponents total_loss(const CameraIntrinsics& k, std::span<const Body> bodies,
                          std::span<const RigidTransform> transforms, const Plane& floor,
                          CorrespondenceLists correspondences, const SiPnpConfig& cfg);
LossComponents total_loss(const CameraIntrinsics& k, std::span<const Body> bodies,
                          const SceneParams& params, CorrespondenceLists correspondences,
                          const SiPnpConfig& cfg);

// Exact gradient of total_loss at raw parameters. Throws NonFiniteLoss.
SceneGradient gradient(const CameraIntrinsics& k, std::span<const Body> bodies,
                       const SceneParams& params, CorrespondenceLists correspondences,
                       const SiPnpConfig& cfg);

// Adam over all quaternions, translations and (optionally) the floor plane.
// The floor starts as the least-squares plane through the initial bottom
// vertices unless `initial_floor` is given.
SceneSolution optimize(const CameraIntrinsics& k, std::span<const Body> bodies,
                       std::span<const RigidTransform> init, CorrespondenceLists correspondences,
                       const SiPnpConfig& cfg, std::optional<Plane> initial_floor = std::nullopt);

SceneSolution optimize(const CameraIntrinsics& k, std::span<const SceneObject> objects,
                       std::span<const RigidTransform> init, CorrespondenceLists correspondences,
                       const SiPnpConfig& cfg);

Plane initial_floor(std::span<const Body> bodies, std::span<const RigidTransform> transforms);

}  // namespace layoutpnp
