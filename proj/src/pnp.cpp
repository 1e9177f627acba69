#include "layoutpnp/pnp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Cholesky>

namespace layoutpnp {
namespace {

struct Score {
  std::size_t count = 0;
  double mean_error = std::numeric_limits<double>::infinity();

  bool better_than(const Score& o) const {
    if (count != o.count) return count > o.count;
    return mean_error < o.mean_error;
  }
};

Score score_pose(const CameraIntrinsics& k, const RigidTransform& tr,
                 std::span<const Correspondence> corrs, double threshold,
                 std::vector<std::size_t>* inliers) {
  Score s;
  double sum = 0.0;
  if (inliers) inliers->clear();
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const double e = reprojection_error_single(k, tr, corrs[i]);
    if (e <= threshold) {
      ++s.count;
      sum += e;
      if (inliers) inliers->push_back(i);
    }
  }
  if (s.count > 0) s.mean_error = sum / static_cast<double>(s.count);
  return s;
}

double mean_error(const CameraIntrinsics& k, const RigidTransform& tr,
                  std::span<const Correspondence> corrs,
                  std::span<const std::size_t> subset) {
  double sum = 0.0;
  for (std::size_t i : subset) sum += reprojection_error_single(k, tr, corrs[i]);
  return sum / static_cast<double>(subset.size());
}

// Iterations needed so that an all-inlier sample of size 4 is drawn with the
// requested confidence.
double required_iterations(double inlier_ratio, double confidence) {
  const double w4 = std::pow(inlier_ratio, 4.0);
  if (w4 >= 1.0) return 0.0;
  if (w4 <= 0.0) return std::numeric_limits<double>::infinity();
  return std::log(1.0 - confidence) / std::log(1.0 - w4);
}

}  // namespace

double RansacConfig::threshold_for(const CameraIntrinsics& k) const {
  if (inlier_threshold_px) return *inlier_threshold_px;
  return 0.02 * k.image_diagonal();
}

double reprojection_error_single(const CameraIntrinsics& k, const RigidTransform& tr,
                                 const Correspondence& c) {
  const Vec3 cam = tr.apply(c.object_point);
  if (!(cam.z() > kTolerances.min_depth)) return std::numeric_limits<double>::infinity();
  const double u = (k.fx * cam.x() + k.skew * cam.y()) / cam.z() + k.cx;
  const double v = k.fy * cam.y() / cam.z() + k.cy;
  return std::hypot(u - c.image_point.u, v - c.image_point.v);
}

double reprojection_cost(const CameraIntrinsics& k, const RigidTransform& tr,
                         std::span<const Correspondence> corrs,
                         std::span<const std::size_t> subset) {
  double sum = 0.0;
  for (std::size_t i : subset) {
    const double e = reprojection_error_single(k, tr, corrs[i]);
    sum += e * e;
  }
  return sum;
}

RigidTransform refine_pose(const CameraIntrinsics& k, const RigidTransform& init,
                           std::span<const Correspondence> corrs,
                           std::span<const std::size_t> subset,
                           const RefineOptions& options) {
  using Mat6 = Eigen::Matrix<double, 6, 6>;
  using Vec6 = Eigen::Matrix<double, 6, 1>;

  RigidTransform pose = init;
  double cost = reprojection_cost(k, pose, corrs, subset);
  if (!std::isfinite(cost) || subset.empty()) return init;
  double lambda = 1e-6;

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    Mat6 jtj = Mat6::Zero();
    Vec6 jtr = Vec6::Zero();
    const Mat3 r = pose.rotation_matrix();
    for (std::size_t i : subset) {
      const Vec3 rp = r * corrs[i].object_point;
      const Vec3 x = rp + pose.translation;
      const double iz = 1.0 / x.z();
      Eigen::Matrix<double, 2, 3> dproj;
      dproj << k.fx * iz, k.skew * iz, -(k.fx * x.x() + k.skew * x.y()) * iz * iz,
          0.0, k.fy * iz, -k.fy * x.y() * iz * iz;
      // Left perturbation: x' = exp(w) R p + t + dt.
      Eigen::Matrix<double, 3, 6> dx;
      dx.leftCols<3>() << 0.0, rp.z(), -rp.y(), -rp.z(), 0.0, rp.x(), rp.y(), -rp.x(), 0.0;
      dx.rightCols<3>().setIdentity();
      const Eigen::Matrix<double, 2, 6> j = dproj * dx;
      const Eigen::Vector2d res((k.fx * x.x() + k.skew * x.y()) * iz + k.cx - corrs[i].image_point.u,
                                k.fy * x.y() * iz + k.cy - corrs[i].image_point.v);
      jtj += j.transpose() * j;
      jtr += j.transpose() * res;
    }

    bool accepted = false;
    for (int attempt = 0; attempt < 10 && !accepted; ++attempt) {
      Mat6 a = jtj;
      a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
      const Vec6 step = -a.ldlt().solve(jtr);
      if (!step.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      const Vec3 w = step.head<3>();
      RigidTransform cand{UnitQuaternion::from_axis_angle(w, w.norm()) * pose.rotation,
                          pose.translation + step.tail<3>()};
      const double cand_cost = reprojection_cost(k, cand, corrs, subset);
      if (cand_cost <= cost) {
        const bool tiny = step.norm() < options.min_step ||
                          cost - cand_cost <= 1e-15 * std::max(cost, 1e-300);
        pose = cand;
        cost = cand_cost;
        lambda = std::max(lambda * 0.1, 1e-12);
        accepted = true;
        if (tiny) return pose;
      } else {
        lambda *= 10.0;
      }
    }
    if (!accepted) break;
  }
  return pose;
}

RansacResult ransac_pnp(const CameraIntrinsics& k, std::span<const Correspondence> corrs,
                        const RansacConfig& config) {
  k.validate();
  if (corrs.size() < 4) {
    throw Error(ErrorCode::TooFewCorrespondences, "RANSAC PnP needs at least 4 correspondences");
  }
  const double threshold = config.threshold_for(k);
  const std::size_t n = corrs.size();

  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);

  bool have_best = false;
  RigidTransform best_pose;
  Score best;
  int iterations = 0;
  double needed = std::numeric_limits<double>::infinity();

  for (; iterations < config.max_iters && static_cast<double>(iterations) < needed;) {
    ++iterations;
    std::array<std::size_t, 4> idx{};
    for (std::size_t s = 0; s < 4; ++s) {
      std::size_t candidate;
      do {
        candidate = pick(rng);
      } while (std::find(idx.begin(), idx.begin() + s, candidate) != idx.begin() + s);
      idx[s] = candidate;
    }
    const std::array<Correspondence, 4> sample{corrs[idx[0]], corrs[idx[1]], corrs[idx[2]],
                                               corrs[idx[3]]};
    std::vector<RigidTransform> poses;
    try {
      poses = solve_minimal(k, sample);
    } catch (const Error&) {
      continue;
    }
    const Score s = score_pose(k, poses.front(), corrs, threshold, nullptr);
    if (!have_best || s.better_than(best)) {
      have_best = true;
      best = s;
      best_pose = poses.front();
      needed = required_iterations(static_cast<double>(s.count) / static_cast<double>(n),
                                   config.confidence);
    }
  }

  if (!have_best || best.count < 4) {
    throw Error(ErrorCode::NoConsensus, "RANSAC found no model with at least 4 inliers");
  }

  std::vector<std::size_t> inliers;
  score_pose(k, best_pose, corrs, threshold, &inliers);
  RigidTransform pose = best_pose;
  for (int round = 0; round < 5; ++round) {
    const RigidTransform refined = refine_pose(k, pose, corrs, inliers);
    if (mean_error(k, refined, corrs, inliers) <= mean_error(k, pose, corrs, inliers)) {
      pose = refined;
    }
    std::vector<std::size_t> next;
    score_pose(k, pose, corrs, threshold, &next);
    if (next == inliers) break;
    if (next.size() < 4) break;
    inliers = std::move(next);
  }
  // Reclassify against the returned pose so the inlier set is re-checkable.
  score_pose(k, pose, corrs, threshold, &inliers);
  if (inliers.size() < 4) {
    throw Error(ErrorCode::NoConsensus, "refined model keeps fewer than 4 inliers");
  }
  return {RigidTransform{pose.rotation.canonical(), pose.translation}, std::move(inliers),
          iterations};
}

}  // namespace layoutpnp
