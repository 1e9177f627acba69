#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "layoutpnp/matching.hpp"
#include "layoutpnp/pnp.hpp"
#include "layoutpnp/sipnp.hpp"

namespace layoutpnp {

// Everything needed to lay out one scene image. Each object is matched either
// through precomputed correspondences or through descriptor maps.
struct SceneSpec {
  std::string description;
  std::vector<SceneObject> objects;
  CameraIntrinsics camera;
  std::map<std::string, std::vector<Correspondence>> correspondences;
  std::map<std::string, std::vector<DescriptorMap>> render_descriptors;
  std::optional<DescriptorMap> scene_descriptors;

  void validate() const;
};

struct ArrangeConfig {
  SiPnpConfig sipnp;
  RansacConfig ransac;
  double neglect_threshold = kDefaultNeglectThreshold;
};

// Square image with a 60 degree vertical field of view and a centered
// principal point; the fallback when an image comes without intrinsics.
CameraIntrinsics default_camera(double image_size_px);

// Match, RANSAC, neglect filtering, then joint refinement of the survivors.
// Neglected objects are listed in the solution rather than failing the call;
// throws AllObjectsNeglected when nothing survives.
SceneSolution arrange_scene(const SceneSpec& spec, const ArrangeConfig& cfg = {});

// Correspondences of one scene after per-object matching. Exposed for the CLI
// and for tests that inspect intermediate results.
std::map<std::string, std::vector<Correspondence>> resolve_correspondences(const SceneSpec& spec);

struct CompoundMember {
  SceneObject object;
  RigidTransform relative;  // member frame -> compound frame
};

// Rigid group of already-arranged objects. The compound frame is the frame of
// the first member.
struct CompoundObject {
  std::string id;
  std::vector<CompoundMember> members;

  static CompoundObject single(const SceneObject& object);

  std::vector<Vec3> merged_keypoints() const;
  std::vector<BoxCorners> member_boxes() const;
  // Axis-aligned hull of every member corner, in the compound frame.
  BoxCorners union_bbox() const;
  // Face of the union box on the floor side of the first member.
  BottomFace union_bottom() const;
  // Member-level collision boxes with the union bottom face.
  Body body() const;

  bool contains(const std::string& object_id) const;
};

// Compound in the frame of parts[0], built from the solved transform of each
// part. Throws MissingTransform.
CompoundObject merge_objects(const SceneSolution& solution, std::span<const CompoundObject> parts);
CompoundObject merge_objects(const SceneSolution& solution, std::span<const SceneObject> objects);

// Per-member transforms given the compound's own transform.
std::map<std::string, RigidTransform> decompose(const CompoundObject& compound,
                                                const RigidTransform& compound_transform);

// Data for one round of the iterative pipeline: a fresh image showing the
// compound built so far and one new object. Correspondences are keyed by
// original object id and expressed in that object's own frame.
struct IterationSpec {
  CameraIntrinsics camera;
  std::string new_object;
  std::map<std::string, std::vector<Correspondence>> correspondences;
};

struct IterativeResult {
  SceneSolution solution;
  CompoundObject compound;
  int iterations_accepted = 0;
  int iterations_rejected = 0;
};

// Pairwise merging. The compound starts as `first_object`; each step tries to
// attach its new object. A step whose new object (or compound) is neglected
// is skipped, so the caller can supply a retry later in the list. The final
// transforms are in the camera frame of the last accepted iteration; objects
// never attached are listed as neglected.
IterativeResult arrange_iterative(std::span<const SceneObject> objects,
                                  const std::string& first_object,
                                  std::span<const IterationSpec> steps,
                                  const ArrangeConfig& cfg = {});

// Positions x, y ~ U[-2, 2], z = 0, yaw ~ U[-180, 180] degrees.
std::map<std::string, RigidTransform> baseline_uniform(std::span<const SceneObject> objects,
                                                       std::uint64_t seed);

// The object-frame axis that circular layouts turn toward the center.
inline const Vec3 kForwardAxis = Vec3::UnitX();

// N objects evenly spaced on a circle in the z = 0 plane, each yawed so that
// kForwardAxis points at the center.
std::map<std::string, RigidTransform> baseline_circular(std::span<const SceneObject> objects,
                                                        double radius);

}  // namespace layoutpnp
