#pragma once

#include <array>
#include <span>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "layoutpnp/error.hpp"
#include "layoutpnp/tolerances.hpp"

namespace layoutpnp {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using HomPoint = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat34 = Eigen::Matrix<double, 3, 4>;

// Image coordinates in pixels. Origin top-left, u rightward, v downward.
struct PixelPoint {
  double u = 0.0;
  double v = 0.0;

  Eigen::Vector2d vec() const { return {u, v}; }
};

// Hamilton quaternion stored (w, x, y, z). Construction always normalizes,
// so an instance is unit within rounding.
class UnitQuaternion {
 public:
  UnitQuaternion() = default;
  // Throws InvalidInput for a zero or non-finite quaternion.
  UnitQuaternion(double w, double x, double y, double z);
  explicit UnitQuaternion(const Vec4& wxyz)
      : UnitQuaternion(wxyz[0], wxyz[1], wxyz[2], wxyz[3]) {}

  static UnitQuaternion identity() { return {}; }
  static UnitQuaternion from_axis_angle(const Vec3& axis, double angle);

  double w() const { return w_; }
  double x() const { return x_; }
  double y() const { return y_; }
  double z() const { return z_; }
  Vec4 coeffs() const { return {w_, x_, y_, z_}; }
  double norm() const { return coeffs().norm(); }

  UnitQuaternion conjugate() const;
  // Sign flipped so that w >= 0.
  UnitQuaternion canonical() const;
  Vec3 rotate(const Vec3& p) const;

  friend UnitQuaternion operator*(const UnitQuaternion& a,
                                  const UnitQuaternion& b);

 private:
  double w_ = 1.0;
  double x_ = 0.0;
  double y_ = 0.0;
  double z_ = 0.0;
};

// Maps object-frame points into the camera (or world) frame: p' = R p + T.
struct RigidTransform {
  UnitQuaternion rotation;
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }
  static RigidTransform from_translation(const Vec3& t) {
    return {UnitQuaternion::identity(), t};
  }

  Mat3 rotation_matrix() const;
  Mat34 matrix() const;
  Vec3 apply(const Vec3& p) const;
  RigidTransform inverse() const;
  // (*this ∘ other)(p) = this->apply(other.apply(p)).
  RigidTransform compose(const RigidTransform& other) const;
};

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  double skew = 0.0;

  Mat3 matrix() const;
  // Throws InvalidInput unless fx > 0 and fy > 0.
  void validate() const;

  // Nominal image size implied by a centered principal point.
  double image_width() const { return 2.0 * cx; }
  double image_height() const { return 2.0 * cy; }
  double image_diagonal() const;

  // Pinhole camera with the principal point at the image center and square
  // pixels, focal length set from the vertical field of view.
  static CameraIntrinsics from_fov(double width, double height,
                                   double vertical_fov_deg);
};

// a x + b y + c z + d = 0 with (a, b, c) unit length.
class Plane {
 public:
  Plane() = default;
  // Throws DegenerateGeometry for a zero normal.
  explicit Plane(const Vec4& coeffs);

  const Vec4& coeffs() const { return coeffs_; }
  Vec3 normal() const { return coeffs_.head<3>(); }
  double offset() const { return coeffs_[3]; }

 private:
  Vec4 coeffs_{0.0, 0.0, 1.0, 0.0};
};

// Renormalizes non-unit input. Throws InvalidInput for the zero quaternion.
Mat3 quat_to_matrix(const UnitQuaternion& q);
Mat3 quat_to_matrix(const Vec4& wxyz);

// Shepperd's method; the result has w >= 0.
UnitQuaternion matrix_to_quat(const Mat3& r);

// Pinhole projection s·U = K [R|T] P. Throws DepthNonPositive when the
// projective depth s does not exceed Tolerances::min_depth.
PixelPoint project(const CameraIntrinsics& k, const RigidTransform& tr,
                   const HomPoint& p);
PixelPoint project(const CameraIntrinsics& k, const RigidTransform& tr,
                   const Vec3& p);

// Total least-squares plane. The normal is the eigenvector of the smallest
// eigenvalue of the centered scatter matrix, signed so that its
// largest-magnitude component is positive.
Plane fit_plane(std::span<const Vec3> points);

double plane_residual(const Plane& plane, const Vec3& p);

// Geodesic angle between two rotations, radians in [0, pi].
double rotation_angle_between(const UnitQuaternion& a, const UnitQuaternion& b);

}  // namespace layoutpnp
