#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "layoutpnp/geom.hpp"

namespace layoutpnp {

// One 3D-to-2D match. similarity is the descriptor cosine similarity, 1.0 for
// synthetic data.
struct Correspondence {
  Vec3 object_point = Vec3::Zero();
  PixelPoint image_point;
  double similarity = 1.0;
};

struct RansacConfig {
  // Pixels. Unset means 2% of the image diagonal implied by the intrinsics.
  std::optional<double> inlier_threshold_px;
  int max_iters = 2000;
  double confidence = 0.999;
  std::uint64_t seed = 0;

  double threshold_for(const CameraIntrinsics& k) const;
};

struct RansacResult {
  RigidTransform pose;
  std::vector<std::size_t> inlier_indices;  // ascending
  int iterations_run = 0;
};

// P3P on sample[0..2], candidates ordered by the reprojection error of
// sample[3]. Throws DegenerateGeometry for collinear object points and
// NoSolution when no root yields positive depths.
std::vector<RigidTransform> solve_minimal(const CameraIntrinsics& k,
                                          std::span<const Correspondence, 4> sample);

// Pixel distance between the observation and the projection; +inf when the
// point falls behind the camera.
double reprojection_error_single(const CameraIntrinsics& k, const RigidTransform& tr,
                                 const Correspondence& c);

// Sum of squared reprojection errors over the given subset.
double reprojection_cost(const CameraIntrinsics& k, const RigidTransform& tr,
                         std::span<const Correspondence> corrs,
                         std::span<const std::size_t> subset);

struct RefineOptions {
  int max_iterations = 50;
  double min_step = 1e-14;
};

// Damped Gauss-Newton on the squared reprojection error of `subset`. The
// returned pose never has higher cost than `init`.
RigidTransform refine_pose(const CameraIntrinsics& k, const RigidTransform& init,
                           std::span<const Correspondence> corrs,
                           std::span<const std::size_t> subset,
                           const RefineOptions& options = {});

// Robust pose from >= 4 matches. Throws TooFewCorrespondences or NoConsensus.
RansacResult ransac_pnp(const CameraIntrinsics& k, std::span<const Correspondence> corrs,
                        const RansacConfig& config = {});

}  // namespace layoutpnp
