#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/SVD>

#include "layoutpnp/geom.hpp"
#include "support/fixtures.hpp"

using namespace layoutpnp;
using doctest::Approx;

namespace {

CameraIntrinsics k100() {
  CameraIntrinsics k;
  k.fx = k.fy = 100.0;
  k.cx = k.cy = 50.0;
  return k;
}

double sum_sq_residual(const Plane& pl, const std::vector<Vec3>& pts) {
  double s = 0.0;
  for (const auto& p : pts) s += std::pow(plane_residual(pl, p), 2);
  return s;
}

}  // namespace

TEST_SUITE("geom") {

TEST_CASE("quat_to_matrix fixed rotations") {
  CHECK(quat_to_matrix(UnitQuaternion(1, 0, 0, 0)).isApprox(Mat3::Identity(), 1e-15));
  const Mat3 r = quat_to_matrix(UnitQuaternion(0, 0, 0, 1));
  CHECK((r - Vec3(-1, -1, 1).asDiagonal().toDenseMatrix()).norm() < 1e-15);
}

TEST_CASE("quat_to_matrix is orthonormal for random quaternions") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const Mat3 m = quat_to_matrix(fixtures::random_rotation(rng));
    CHECK((m.transpose() * m - Mat3::Identity()).norm() < 1e-12);
    CHECK(m.determinant() == Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("non-unit and zero quaternions") {
  CHECK(quat_to_matrix(Vec4(2, 0, 0, 0)).isApprox(Mat3::Identity(), 1e-15));
  CHECK_THROWS_AS(UnitQuaternion(0, 0, 0, 0), Error);
  CHECK_THROWS_AS(quat_to_matrix(Vec4(0, 0, 0, 0)), Error);
  CHECK_THROWS_AS(UnitQuaternion(NAN, 0, 0, 1), Error);
}

TEST_CASE("matrix_to_quat round trip up to sign") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 1000; ++i) {
    const UnitQuaternion q = fixtures::random_rotation(rng);
    const UnitQuaternion back = matrix_to_quat(quat_to_matrix(q));
    const double same = (back.coeffs() - q.coeffs()).cwiseAbs().maxCoeff();
    const double flipped = (back.coeffs() + q.coeffs()).cwiseAbs().maxCoeff();
    CHECK(std::min(same, flipped) < 1e-9);
    CHECK(back.w() >= 0.0);
  }
}

TEST_CASE("rigid transform algebra") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const RigidTransform a{fixtures::random_rotation(rng), Vec3::Random()};
    const RigidTransform b{fixtures::random_rotation(rng), Vec3::Random()};
    const Vec3 p = Vec3::Random();
    CHECK((a.compose(b).apply(p) - a.apply(b.apply(p))).norm() < 1e-12);
    CHECK((a.inverse().apply(a.apply(p)) - p).norm() < 1e-12);
    const Mat3 r = a.rotation_matrix();
    CHECK((r.transpose() * r - Mat3::Identity()).norm() < 1e-9);
    CHECK(r.determinant() == Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("project examples") {
  const CameraIntrinsics k = k100();
  const PixelPoint a = project(k, RigidTransform::identity(), HomPoint(0, 0, 2, 1));
  CHECK(a.u == Approx(50.0));
  CHECK(a.v == Approx(50.0));
  const PixelPoint b = project(k, RigidTransform::identity(), HomPoint(1, 0, 2, 1));
  CHECK(b.u == Approx(100.0));
  CHECK(b.v == Approx(50.0));
  const PixelPoint c = project(k, RigidTransform::from_translation(Vec3(0, 0, 1)), HomPoint(1, 0, 1, 1));
  CHECK(c.u == Approx(100.0));
  CHECK(c.v == Approx(50.0));
}

TEST_CASE("project rejects points on or behind the camera plane") {
  const CameraIntrinsics k = k100();
  CHECK_THROWS_AS(project(k, RigidTransform::identity(), Vec3(0, 0, 0)), Error);
  try {
    project(k, RigidTransform::identity(), Vec3(1, 1, -1));
    FAIL("expected DepthNonPositive");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DepthNonPositive);
  }
}

TEST_CASE("project is invariant to homogeneous scale and identity composition") {
  std::mt19937_64 rng(4);
  const CameraIntrinsics k = fixtures::test_camera();
  for (int i = 0; i < 100; ++i) {
    const RigidTransform tr = fixtures::random_visible_pose(rng);
    const Vec3 p = Vec3::Random() * 0.5;
    const PixelPoint ref = project(k, tr, p);
    for (double lambda : {0.5, 3.0, -2.0}) {
      const PixelPoint s = project(k, tr, HomPoint(lambda * p.x(), lambda * p.y(), lambda * p.z(), lambda));
      CHECK(s.u == Approx(ref.u).epsilon(1e-12));
      CHECK(s.v == Approx(ref.v).epsilon(1e-12));
    }
    const PixelPoint id = project(k, tr.compose(RigidTransform::identity()), p);
    CHECK(id.u == Approx(ref.u).epsilon(1e-12));
    CHECK(id.v == Approx(ref.v).epsilon(1e-12));
  }
}

TEST_CASE("fit_plane exact planes") {
  const std::vector<Vec3> z0{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
  CHECK((fit_plane(z0).coeffs() - Vec4(0, 0, 1, 0)).norm() < 1e-12);
  const std::vector<Vec3> z1{{0, 0, 1}, {1, 0, 1}, {0, 1, 1}};
  CHECK((fit_plane(z1).coeffs() - Vec4(0, 0, 1, -1)).norm() < 1e-12);
}

TEST_CASE("fit_plane matches an SVD oracle on noisy points") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.01);
  std::vector<Vec3> pts;
  for (int i = 0; i < 100; ++i) {
    const double x = u(rng), y = u(rng);
    pts.emplace_back(x, y, 0.5 * x + noise(rng));
  }
  const Plane fitted = fit_plane(pts);

  // Independent oracle: right singular vector of the centered data matrix.
  Eigen::MatrixXd a(pts.size(), 3);
  Vec3 mean = Vec3::Zero();
  for (const auto& p : pts) mean += p / 100.0;
  for (std::size_t i = 0; i < pts.size(); ++i) a.row(static_cast<Eigen::Index>(i)) = (pts[i] - mean).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinV);
  Vec3 oracle = svd.matrixV().col(2);
  if (oracle.dot(fitted.normal()) < 0) oracle = -oracle;
  CHECK((oracle - fitted.normal()).norm() < 1e-9);
  CHECK(fitted.offset() == Approx(-oracle.dot(mean)).epsilon(1e-9));

  const Vec3 expected(-0.4472135955, 0.0, 0.894427191);
  const double angle = std::acos(std::min(1.0, std::abs(expected.dot(fitted.normal()))));
  CHECK(angle * 180.0 / std::numbers::pi < 1.0);
}

TEST_CASE("fit_plane is locally optimal") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<Vec3> pts;
  for (int i = 0; i < 50; ++i) pts.emplace_back(n(rng), n(rng), 0.2 * n(rng));
  const Plane best = fit_plane(pts);
  const double base = sum_sq_residual(best, pts);
  for (int i = 0; i < 100; ++i) {
    Vec4 c = best.coeffs();
    for (int a = 0; a < 4; ++a) c[a] += 0.01 * n(rng);
    CHECK(sum_sq_residual(Plane(c), pts) >= base);
  }
}

TEST_CASE("fit_plane orientation and degenerate input") {
  const std::vector<Vec3> tilted{{0, 0, 0}, {1, 0, -1}, {0, 1, 0}};
  const Vec3 nrm = fit_plane(tilted).normal();
  int largest = 0;
  nrm.cwiseAbs().maxCoeff(&largest);
  CHECK(nrm[largest] > 0.0);
  const std::vector<Vec3> line{{0, 0, 0}, {1, 1, 1}, {2, 2, 2}, {3, 3, 3}};
  try {
    fit_plane(line);
    FAIL("expected DegenerateGeometry");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateGeometry);
  }
  const std::vector<Vec3> two{{0, 0, 0}, {1, 0, 0}};
  CHECK_THROWS_AS(fit_plane(two), Error);
}

TEST_CASE("plane_residual examples") {
  CHECK(plane_residual(Plane(Vec4(0, 0, 1, 0)), Vec3(3, 7, 0)) == Approx(0.0));
  CHECK(plane_residual(Plane(Vec4(0, 0, 1, 0)), Vec3(0, 0, 2)) == Approx(2.0));
  CHECK(plane_residual(Plane(Vec4(0, 0, 1, -1)), Vec3(5, 5, 0)) == Approx(-1.0));
  CHECK(Plane(Vec4(0, 0, 2, -2)).coeffs().isApprox(Vec4(0, 0, 1, -1)));
  CHECK_THROWS_AS(Plane(Vec4(0, 0, 0, 1)), Error);
}

TEST_CASE("intrinsics from field of view") {
  const CameraIntrinsics k = CameraIntrinsics::from_fov(640, 480, 60.0);
  CHECK(k.cx == 320.0);
  CHECK(k.cy == 240.0);
  CHECK(k.fy == Approx(240.0 / std::tan(std::numbers::pi / 6)));
  CHECK(k.fx == k.fy);
  CHECK(k.image_diagonal() == Approx(800.0));
  CameraIntrinsics bad;
  bad.fx = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("rotation_angle_between") {
  const UnitQuaternion a = UnitQuaternion::from_axis_angle(Vec3::UnitZ(), 0.3);
  const UnitQuaternion b = UnitQuaternion::from_axis_angle(Vec3::UnitZ(), -0.4);
  CHECK(rotation_angle_between(a, b) == Approx(0.7));
  const UnitQuaternion neg(-a.w(), -a.x(), -a.y(), -a.z());
  CHECK(rotation_angle_between(a, neg) == Approx(0.0));
}

}
