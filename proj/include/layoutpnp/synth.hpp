#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "layoutpnp/arrange.hpp"
#include "layoutpnp/geom.hpp"
#include "layoutpnp/pnp.hpp"
#include "layoutpnp/sipnp.hpp"

namespace layoutpnp {

struct SynthConfig {
  int n_objects = 2;
  int keypoints_per_object = 100;
  double noise_sigma_px = 0.0;
  double outlier_fraction = 0.0;
  double scene_extent = 4.0;
  std::uint64_t seed = 0;
  bool place_on_floor = true;
  bool allow_collisions = false;

  double image_width = 640.0;
  double image_height = 480.0;
  double vertical_fov_deg = 60.0;
  double camera_elevation_deg = 30.0;

  // Similarity attached to planted inliers: inlier_similarity plus gaussian
  // jitter, clipped to [-1, 1]. Outliers draw uniformly from the given range.
  double inlier_similarity = 1.0;
  double similarity_jitter = 0.0;
  double outlier_similarity_lo = 0.0;
  double outlier_similarity_hi = 0.3;

  // Objects (by index) whose correspondences are all outliers, as if the
  // object were missing from the image.
  std::vector<int> neglected_objects;

  void validate() const;
};

struct LabeledCorrespondences {
  std::vector<Correspondence> matches;
  std::vector<bool> is_inlier;

  std::size_t outlier_count() const;
};

// Synthetic ground truth. Object poses live in a world frame whose floor is
// z = 0; camera_from_world maps that frame into the camera frame used for
// projection, so the camera-frame pose of object i is
// camera_from_world ∘ true_transforms[id].
struct GroundTruthScene {
  std::vector<SceneObject> objects;
  std::map<std::string, RigidTransform> true_transforms;
  RigidTransform camera_from_world;
  CameraIntrinsics camera;
  std::vector<LabeledCorrespondences> correspondences;
  double scene_extent = 0.0;

  RigidTransform camera_transform(const std::string& id) const;
  std::vector<RigidTransform> camera_transforms() const;
  SceneSpec to_spec() const;
};

// Throws PlacementFailure when objects or camera cannot be placed within the
// bounded number of attempts.
GroundTruthScene generate_scene(const SynthConfig& cfg);

struct PoseError {
  double rotation_deg = 0.0;
  double translation = 0.0;
};

PoseError pose_error(const RigidTransform& truth, const RigidTransform& estimate);

// Camera looking from `eye` toward `target`, x right, y down, z forward.
RigidTransform look_at(const Vec3& eye, const Vec3& target, const Vec3& world_up = Vec3::UnitZ());

// World-frame position of the camera center.
Vec3 camera_center(const RigidTransform& camera_from_world);

// Re-renders the inliers of one object as if the image showed it scaled by
// `image_scale` about its own origin. Pose recovery with the unscaled model
// then lands the object at a different depth along the viewing ray.
void rescale_in_image(GroundTruthScene& scene, std::size_t object_index, double image_scale);

// Scale for rescale_in_image that moves the recovered object origin by
// `height_offset` along the world z axis.
double scale_for_height_offset(const GroundTruthScene& scene, std::size_t object_index,
                               double height_offset);

// Two equal cubes on the floor, side by side, with the image of the second
// rescaled so that its recovered bottom sits `height_offset` off the floor.
GroundTruthScene floating_pair_scene(double height_offset, std::uint64_t seed);

// Two equal cubes on the floor that overlap with the given IOU along the
// viewing direction of a distant camera, with exact correspondences.
GroundTruthScene overlapping_pair_scene(double target_iou, std::uint64_t seed);

// One pairwise-merge step per object after the first in `order`, each with a
// fresh camera that sees every object introduced so far.
std::vector<IterationSpec> generate_iterative_steps(const GroundTruthScene& scene,
                                                    std::span<const std::size_t> order,
                                                    const SynthConfig& cfg);

// Descriptor maps with planted matches: every foreground render entry has a
// scene twin with cosine similarity near `planted_similarity`, plus
// `distractors` unrelated scene entries.
struct PlantedDescriptors {
  DescriptorMap render;
  DescriptorMap scene;
  std::vector<std::size_t> twin_of;  // render index -> scene index
};

PlantedDescriptors planted_descriptors(std::span<const Vec3> object_points,
                                       std::span<const PixelPoint> pixels, int dimension,
                                       int distractors, double planted_similarity,
                                       std::uint64_t seed);

}  // namespace layoutpnp
