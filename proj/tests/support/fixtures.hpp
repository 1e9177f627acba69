#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "layoutpnp/pnp.hpp"
#include "layoutpnp/sipnp.hpp"

namespace fixtures {

using namespace layoutpnp;

inline UnitQuaternion random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return UnitQuaternion(n(rng), n(rng), n(rng), n(rng));
}

inline Vec3 random_in_box(std::mt19937_64& rng, const Vec3& lo, const Vec3& hi) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return {lo.x() + u(rng) * (hi.x() - lo.x()), lo.y() + u(rng) * (hi.y() - lo.y()),
          lo.z() + u(rng) * (hi.z() - lo.z())};
}

inline CameraIntrinsics test_camera() { return CameraIntrinsics::from_fov(640.0, 480.0, 60.0); }

// Pose placing an object of radius ~1 well inside the default view.
inline RigidTransform random_visible_pose(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> xy(-0.5, 0.5), z(4.0, 6.0);
  return {random_rotation(rng), Vec3(xy(rng), xy(rng), z(rng))};
}

inline std::vector<Correspondence> project_points(const CameraIntrinsics& k, const RigidTransform& tr,
                                                  const std::vector<Vec3>& pts) {
  std::vector<Correspondence> out;
  for (const auto& p : pts) out.push_back({p, project(k, tr, p), 1.0});
  return out;
}

// A random joint-optimization problem: bodies, correspondences (with pixel
// noise), raw parameters with non-unit quaternions and plane, and a config.
struct Problem {
  CameraIntrinsics camera;
  std::vector<Body> bodies;
  std::vector<std::vector<Correspondence>> correspondences;
  SceneParams params;
  SiPnpConfig cfg;
};

inline Problem random_problem(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  Problem p;
  p.camera = test_camera();
  const int bodies = 2 + static_cast<int>(seed % 2);
  const bool crowded = seed % 3 != 0;
  std::vector<RigidTransform> poses;
  for (int i = 0; i < bodies; ++i) {
    const Vec3 size(0.4 + 0.6 * u(rng), 0.4 + 0.6 * u(rng), 0.4 + 0.6 * u(rng));
    const Vec3 lo(-size.x() / 2, -size.y() / 2, 0.0);
    const Vec3 hi(size.x() / 2, size.y() / 2, size.z());
    std::vector<Vec3> kp;
    for (int m = 0; m < 12; ++m) kp.push_back(random_in_box(rng, lo, hi));
    const SceneObject o = SceneObject::from_extent("b" + std::to_string(i), lo, hi, kp);
    p.bodies.push_back(Body::from_object(o));

    RigidTransform pose = random_visible_pose(rng);
    if (crowded && i > 0) {
      pose.translation = poses[0].translation + Vec3(0.4 * (u(rng) - 0.5), 0.4 * (u(rng) - 0.5),
                                                     0.4 * (u(rng) - 0.5));
    }
    poses.push_back(pose);
    std::vector<Correspondence> corrs;
    for (const auto& q : kp) {
      PixelPoint px = project(p.camera, pose, q);
      px.u += 3.0 * n(rng);
      px.v += 3.0 * n(rng);
      corrs.push_back({q, px, 1.0});
    }
    p.correspondences.push_back(std::move(corrs));
  }
  std::vector<Vec3> bottoms;
  for (int i = 0; i < bodies; ++i) {
    for (const auto& b : p.bodies[static_cast<std::size_t>(i)].bottom) {
      bottoms.push_back(poses[static_cast<std::size_t>(i)].apply(b));
    }
  }
  Vec4 plane = fit_plane(bottoms).coeffs();
  for (int a = 0; a < 4; ++a) plane[a] += 0.05 * n(rng);
  plane *= 0.5 + 1.5 * u(rng);
  p.params = SceneParams::from(poses, Plane(plane));
  p.params.plane = plane;
  for (auto& q : p.params.quaternions) q *= 0.5 + 1.5 * u(rng);
  p.cfg.optimize_plane = seed % 4 != 1;
  return p;
}

}  // namespace fixtures
