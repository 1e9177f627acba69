#include "layoutpnp/geom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Eigenvalues>

namespace layoutpnp {

UnitQuaternion::UnitQuaternion(double w, double x, double y, double z) {
  const double n = std::sqrt(w * w + x * x + y * y + z * z);
  if (!std::isfinite(n) || n == 0.0) {
    throw Error(ErrorCode::InvalidInput, "quaternion must be finite and non-zero");
  }
  if (std::abs(n - 1.0) <= 4.0 * std::numeric_limits<double>::epsilon()) {
    w_ = w, x_ = x, y_ = y, z_ = z;
    return;
  }
  w_ = w / n;
  x_ = x / n;
  y_ = y / n;
  z_ = z / n;
}

UnitQuaternion UnitQuaternion::from_axis_angle(const Vec3& axis, double angle) {
  const double n = axis.norm();
  if (n == 0.0) return identity();
  const Vec3 a = axis / n;
  const double s = std::sin(angle / 2.0);
  return {std::cos(angle / 2.0), a.x() * s, a.y() * s, a.z() * s};
}

UnitQuaternion UnitQuaternion::conjugate() const { return {w_, -x_, -y_, -z_}; }

UnitQuaternion UnitQuaternion::canonical() const {
  if (w_ < 0.0) return {-w_, -x_, -y_, -z_};
  return *this;
}

Vec3 UnitQuaternion::rotate(const Vec3& p) const { return quat_to_matrix(*this) * p; }

UnitQuaternion operator*(const UnitQuaternion& a, const UnitQuaternion& b) {
  return {a.w_ * b.w_ - a.x_ * b.x_ - a.y_ * b.y_ - a.z_ * b.z_,
          a.w_ * b.x_ + a.x_ * b.w_ + a.y_ * b.z_ - a.z_ * b.y_,
          a.w_ * b.y_ - a.x_ * b.z_ + a.y_ * b.w_ + a.z_ * b.x_,
          a.w_ * b.z_ + a.x_ * b.y_ - a.y_ * b.x_ + a.z_ * b.w_};
}

Mat3 RigidTransform::rotation_matrix() const { return quat_to_matrix(rotation); }

Mat34 RigidTransform::matrix() const {
  Mat34 m;
  m.leftCols<3>() = rotation_matrix();
  m.col(3) = translation;
  return m;
}

Vec3 RigidTransform::apply(const Vec3& p) const {
  return rotation_matrix() * p + translation;
}

RigidTransform RigidTransform::inverse() const {
  const UnitQuaternion inv = rotation.conjugate();
  return {inv, -(quat_to_matrix(inv) * translation)};
}

RigidTransform RigidTransform::compose(const RigidTransform& other) const {
  return {rotation * other.rotation, apply(other.translation)};
}

Mat3 CameraIntrinsics::matrix() const {
  Mat3 k;
  k << fx, skew, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(cx) || !std::isfinite(cy) ||
      !std::isfinite(skew)) {
    throw Error(ErrorCode::InvalidInput, "camera intrinsics require fx > 0 and fy > 0");
  }
}

double CameraIntrinsics::image_diagonal() const {
  return std::hypot(image_width(), image_height());
}

CameraIntrinsics CameraIntrinsics::from_fov(double width, double height,
                                            double vertical_fov_deg) {
  const double half = vertical_fov_deg * std::numbers::pi / 360.0;
  const double f = 0.5 * height / std::tan(half);
  return {f, f, 0.5 * width, 0.5 * height, 0.0};
}

Plane::Plane(const Vec4& coeffs) {
  const double n = coeffs.head<3>().norm();
  if (!std::isfinite(n) || n == 0.0 || !std::isfinite(coeffs[3])) {
    throw Error(ErrorCode::DegenerateGeometry, "plane normal must be non-zero");
  }
  coeffs_ = std::abs(n - 1.0) <= 4.0 * std::numeric_limits<double>::epsilon() ? coeffs : Vec4(coeffs / n);
}

Mat3 quat_to_matrix(const UnitQuaternion& q) {
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Mat3 quat_to_matrix(const Vec4& wxyz) { return quat_to_matrix(UnitQuaternion(wxyz)); }

UnitQuaternion matrix_to_quat(const Mat3& r) {
  const double trace = r.trace();
  const std::array<double, 4> diag{trace, r(0, 0), r(1, 1), r(2, 2)};
  const auto pick = static_cast<int>(std::max_element(diag.begin(), diag.end()) - diag.begin());
  double w, x, y, z;
  switch (pick) {
    case 0: {
      const double s = 2.0 * std::sqrt(1.0 + trace);
      w = 0.25 * s;
      x = (r(2, 1) - r(1, 2)) / s;
      y = (r(0, 2) - r(2, 0)) / s;
      z = (r(1, 0) - r(0, 1)) / s;
      break;
    }
    case 1: {
      const double s = 2.0 * std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2));
      w = (r(2, 1) - r(1, 2)) / s;
      x = 0.25 * s;
      y = (r(0, 1) + r(1, 0)) / s;
      z = (r(0, 2) + r(2, 0)) / s;
      break;
    }
    case 2: {
      const double s = 2.0 * std::sqrt(1.0 - r(0, 0) + r(1, 1) - r(2, 2));
      w = (r(0, 2) - r(2, 0)) / s;
      x = (r(0, 1) + r(1, 0)) / s;
      y = 0.25 * s;
      z = (r(1, 2) + r(2, 1)) / s;
      break;
    }
    default: {
      const double s = 2.0 * std::sqrt(1.0 - r(0, 0) - r(1, 1) + r(2, 2));
      w = (r(1, 0) - r(0, 1)) / s;
      x = (r(0, 2) + r(2, 0)) / s;
      y = (r(1, 2) + r(2, 1)) / s;
      z = 0.25 * s;
      break;
    }
  }
  return UnitQuaternion(w, x, y, z).canonical();
}

PixelPoint project(const CameraIntrinsics& k, const RigidTransform& tr,
                   const HomPoint& p) {
  if (p[3] == 0.0) {
    throw Error(ErrorCode::InvalidInput, "point at infinity cannot be projected");
  }
  return project(k, tr, Vec3(p.head<3>() / p[3]));
}

PixelPoint project(const CameraIntrinsics& k, const RigidTransform& tr,
                   const Vec3& p) {
  const Vec3 cam = tr.apply(p);
  const double s = cam.z();
  if (!(s > kTolerances.min_depth)) {
    throw Error(ErrorCode::DepthNonPositive, "point projects with non-positive depth");
  }
  return {(k.fx * cam.x() + k.skew * cam.y()) / s + k.cx, k.fy * cam.y() / s + k.cy};
}

Plane fit_plane(std::span<const Vec3> points) {
  if (points.size() < 3) {
    throw Error(ErrorCode::DegenerateGeometry, "plane fit needs at least 3 points");
  }
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());

  Mat3 scatter = Mat3::Zero();
  for (const auto& p : points) {
    const Vec3 d = p - centroid;
    scatter += d * d.transpose();
  }
  scatter /= static_cast<double>(points.size());

  Eigen::SelfAdjointEigenSolver<Mat3> solver(scatter);
  const Vec3 ev = solver.eigenvalues();  // ascending
  if (!(ev[2] > 0.0) || ev[1] <= kTolerances.collinear * ev[2]) {
    throw Error(ErrorCode::DegenerateGeometry, "points are collinear");
  }
  Vec3 n = solver.eigenvectors().col(0).normalized();
  Eigen::Index largest = 0;
  n.cwiseAbs().maxCoeff(&largest);
  if (n[largest] < 0.0) n = -n;
  Vec4 coeffs;
  coeffs << n, -n.dot(centroid);
  return Plane(coeffs);
}

double plane_residual(const Plane& plane, const Vec3& p) {
  return plane.normal().dot(p) + plane.offset();
}

double rotation_angle_between(const UnitQuaternion& a, const UnitQuaternion& b) {
  const UnitQuaternion rel = a.conjugate() * b;
  const double vec = Vec3(rel.x(), rel.y(), rel.z()).norm();
  // atan2 stays accurate for tiny angles where acos loses precision.
  return 2.0 * std::atan2(vec, std::abs(rel.w()));
}

}  // namespace layoutpnp
