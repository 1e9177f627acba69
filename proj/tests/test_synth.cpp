#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "layoutpnp/synth.hpp"
#include "support/fixtures.hpp"

using namespace layoutpnp;
using doctest::Approx;

namespace {

bool same_scene(const GroundTruthScene& a, const GroundTruthScene& b) {
  if (a.objects.size() != b.objects.size()) return false;
  for (std::size_t i = 0; i < a.objects.size(); ++i) {
    if (a.objects[i].keypoints != b.objects[i].keypoints) return false;
    const auto& ca = a.correspondences[i].matches;
    const auto& cb = b.correspondences[i].matches;
    if (ca.size() != cb.size()) return false;
    for (std::size_t m = 0; m < ca.size(); ++m) {
      if (ca[m].image_point.u != cb[m].image_point.u || ca[m].image_point.v != cb[m].image_point.v ||
          ca[m].similarity != cb[m].similarity)
        return false;
    }
  }
  return a.camera_from_world.translation == b.camera_from_world.translation;
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("noiseless correspondences reproject exactly") {
  SynthConfig cfg;
  cfg.n_objects = 3;
  cfg.seed = 51;
  const GroundTruthScene gt = generate_scene(cfg);
  REQUIRE(gt.objects.size() == 3);
  for (std::size_t i = 0; i < gt.objects.size(); ++i) {
    const RigidTransform tr = gt.camera_transform(gt.objects[i].id);
    for (const auto& c : gt.correspondences[i].matches) CHECK(reprojection_error_single(gt.camera, tr, c) < 1e-9);
  }
}

TEST_CASE("outlier counting contract") {
  SynthConfig cfg;
  cfg.outlier_fraction = 0.3;
  cfg.keypoints_per_object = 100;
  cfg.seed = 52;
  const GroundTruthScene gt = generate_scene(cfg);
  for (std::size_t i = 0; i < gt.objects.size(); ++i) {
    const auto& lc = gt.correspondences[i];
    CHECK(lc.outlier_count() == 30);
    const RigidTransform tr = gt.camera_transform(gt.objects[i].id);
    for (std::size_t m = 0; m < lc.matches.size(); ++m) {
      const double e = reprojection_error_single(gt.camera, tr, lc.matches[m]);
      if (lc.is_inlier[m]) {
        CHECK(e < 1e-9);
      } else {
        CHECK(e > 0.02 * gt.camera.image_diagonal());
        CHECK(lc.matches[m].image_point.u >= 0.0);
        CHECK(lc.matches[m].image_point.u <= gt.camera.image_width());
      }
    }
  }
}

TEST_CASE("floor placement and visibility") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SynthConfig cfg;
    cfg.n_objects = 4;
    cfg.seed = seed;
    const GroundTruthScene gt = generate_scene(cfg);
    std::vector<Vec3> bottoms;
    std::vector<RigidTransform> world;
    for (const auto& o : gt.objects) {
      const RigidTransform& t = gt.true_transforms.at(o.id);
      world.push_back(t);
      for (const auto& b : o.bottom_vertices) bottoms.push_back(t.apply(b));
      const RigidTransform cam = gt.camera_transform(o.id);
      for (const auto& k : o.keypoints) {
        const Vec3 p = cam.apply(k);
        CHECK(p.z() > 0.0);
        const PixelPoint px = project(gt.camera, cam, k);
        CHECK(px.u >= 0.0);
        CHECK(px.u <= gt.camera.image_width());
        CHECK(px.v >= 0.0);
        CHECK(px.v <= gt.camera.image_height());
      }
    }
    CHECK((fit_plane(bottoms).coeffs() - Vec4(0, 0, 1, 0)).norm() < 1e-9);
    CHECK(collision_loss(gt.objects, world) == 0.0);
    CHECK(collision_loss(gt.objects, gt.camera_transforms()) == 0.0);
  }
}

TEST_CASE("same seed is bit-identical") {
  SynthConfig cfg;
  cfg.noise_sigma_px = 1.0;
  cfg.outlier_fraction = 0.2;
  cfg.seed = 53;
  CHECK(same_scene(generate_scene(cfg), generate_scene(cfg)));
  SynthConfig other = cfg;
  other.seed = 54;
  CHECK_FALSE(same_scene(generate_scene(cfg), generate_scene(other)));
}

TEST_CASE("config validation") {
  SynthConfig cfg;
  cfg.outlier_fraction = 1.0;
  CHECK_THROWS_AS(generate_scene(cfg), Error);
  cfg = SynthConfig{};
  cfg.keypoints_per_object = 7;
  CHECK_THROWS_AS(generate_scene(cfg), Error);
}

TEST_CASE("placement failure is reported") {
  SynthConfig cfg;
  cfg.n_objects = 60;
  cfg.scene_extent = 1.0;
  try {
    generate_scene(cfg);
    FAIL("expected PlacementFailure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PlacementFailure);
  }
}

TEST_CASE("pose_error examples") {
  const RigidTransform a{UnitQuaternion::from_axis_angle(Vec3(1, 2, 3).normalized(), 0.4), Vec3(1, 2, 3)};
  const PoseError same = pose_error(a, a);
  CHECK(same.rotation_deg == Approx(0.0));
  CHECK(same.translation == Approx(0.0));
  const RigidTransform flipped{a.rotation * UnitQuaternion::from_axis_angle(Vec3::UnitZ(), std::numbers::pi),
                               a.translation};
  CHECK(pose_error(a, flipped).rotation_deg == Approx(180.0));
  const RigidTransform moved{a.rotation, a.translation + Vec3(3, 4, 0)};
  CHECK(pose_error(a, moved).translation == Approx(5.0));
}

TEST_CASE("pose_error rotation metric properties") {
  std::mt19937_64 rng(55);
  for (int i = 0; i < 200; ++i) {
    const RigidTransform a{fixtures::random_rotation(rng), Vec3::Zero()};
    const RigidTransform b{fixtures::random_rotation(rng), Vec3::Zero()};
    CHECK(pose_error(a, b).rotation_deg == Approx(pose_error(b, a).rotation_deg).epsilon(1e-9));
    const RigidTransform neg{UnitQuaternion(-a.rotation.coeffs()), Vec3::Zero()};
    CHECK(pose_error(a, neg).rotation_deg < 1e-6);
    CHECK(pose_error(a, b).rotation_deg > 0.0);
  }
}

TEST_CASE("look_at conventions") {
  const RigidTransform cam = look_at(Vec3(0, -5, 2), Vec3(0, 0, 0));
  const Vec3 target = cam.apply(Vec3::Zero());
  CHECK(target.x() == Approx(0.0).scale(1.0));
  CHECK(target.y() == Approx(0.0).scale(1.0));
  CHECK(target.z() == Approx(std::sqrt(29.0)));
  // World up appears as image up, i.e. negative camera y.
  CHECK(cam.rotation_matrix().row(1).dot(Vec3::UnitZ()) < 0.0);
  CHECK((camera_center(cam) - Vec3(0, -5, 2)).norm() < 1e-12);
}

TEST_CASE("height offset rescaling") {
  GroundTruthScene gt = floating_pair_scene(0.3, 1);
  const double s = scale_for_height_offset(gt, 1, 0.3);
  CHECK(s > 0.0);
  CHECK(s != 1.0);
  REQUIRE(gt.objects.size() == 2);
  for (const auto& c : gt.correspondences[0].matches) {
    CHECK(reprojection_error_single(gt.camera, gt.camera_transform(gt.objects[0].id), c) < 1e-9);
  }
}

TEST_CASE("overlapping pair has the requested overlap") {
  const GroundTruthScene gt = overlapping_pair_scene(0.4, 2);
  std::vector<RigidTransform> world;
  for (const auto& o : gt.objects) world.push_back(gt.true_transforms.at(o.id));
  CHECK(collision_loss(gt.objects, world) == Approx(0.4).epsilon(1e-9));
}

TEST_CASE("iterative steps show every introduced object") {
  SynthConfig cfg;
  cfg.n_objects = 4;
  cfg.scene_extent = 6.0;
  cfg.seed = 56;
  const GroundTruthScene gt = generate_scene(cfg);
  const std::vector<std::size_t> order{2, 0, 3, 1};
  const auto steps = generate_iterative_steps(gt, order, cfg);
  REQUIRE(steps.size() == 3);
  for (std::size_t k = 0; k < steps.size(); ++k) {
    CHECK(steps[k].new_object == gt.objects[order[k + 1]].id);
    CHECK(steps[k].correspondences.size() == k + 2);
  }
}

TEST_CASE("planted descriptors") {
  std::vector<Vec3> pts;
  std::vector<PixelPoint> px;
  for (int i = 0; i < 50; ++i) {
    pts.emplace_back(0.01 * i, 0.0, 0.0);
    px.push_back({static_cast<double>(i), static_cast<double>(i)});
  }
  const PlantedDescriptors pd = planted_descriptors(pts, px, 32, 100, 0.9, 3);
  CHECK(pd.render.entries.size() == 50);
  CHECK(pd.scene.entries.size() == 150);
  CHECK(pd.render.dimension() == 32);
  for (std::size_t i = 0; i < 50; ++i) {
    const double s = cosine_similarity(pd.render.entries[i].descriptor, pd.scene.entries[pd.twin_of[i]].descriptor);
    CHECK(s == Approx(0.9).epsilon(1e-4));
  }
}

}
