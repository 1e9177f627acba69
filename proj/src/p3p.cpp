// Grunert's P3P with fourth-point disambiguation.
//
// With distances s_i from the camera center to the three object points along
// unit bearings j_i, the law of cosines gives
//   s2² + s3² - 2 s2 s3 cos(alpha) = a²
//   s1² + s3² - 2 s1 s3 cos(beta)  = b²
//   s1² + s2² - 2 s1 s2 cos(gamma) = c²
// Substituting s2 = u s1, s3 = v s1 and eliminating u yields a quartic in v.
// The quartic is assembled by polynomial arithmetic rather than from a table
// of closed-form coefficients.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "layoutpnp/pnp.hpp"

namespace layoutpnp {
namespace {

// Coefficients in ascending powers.
template <std::size_t N>
using Poly = std::array<double, N>;

template <std::size_t A, std::size_t B>
Poly<A + B - 1> mul(const Poly<A>& a, const Poly<B>& b) {
  Poly<A + B - 1> out{};
  for (std::size_t i = 0; i < A; ++i) {
    for (std::size_t j = 0; j < B; ++j) out[i + j] += a[i] * b[j];
  }
  return out;
}

double eval_poly(std::span<const double> c, double x) {
  double acc = 0.0;
  for (std::size_t i = c.size(); i-- > 0;) acc = acc * x + c[i];
  return acc;
}

double eval_deriv(std::span<const double> c, double x) {
  double acc = 0.0;
  for (std::size_t i = c.size(); i-- > 1;) acc = acc * x + static_cast<double>(i) * c[i];
  return acc;
}

// Real roots of a polynomial with ascending coefficients, via the companion
// matrix, each polished by a few Newton steps.
std::vector<double> real_roots(std::span<const double> coeffs) {
  std::size_t degree = coeffs.size() - 1;
  double scale = 0.0;
  for (double c : coeffs) scale = std::max(scale, std::abs(c));
  if (scale == 0.0) return {};
  while (degree > 0 && std::abs(coeffs[degree]) <= 1e-14 * scale) --degree;
  if (degree == 0) return {};

  const auto n = static_cast<Eigen::Index>(degree);
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    companion(i, n - 1) = -coeffs[static_cast<std::size_t>(i)] / coeffs[degree];
  }
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
  const auto& eig = solver.eigenvalues();

  const std::span<const double> used = coeffs.first(degree + 1);
  std::vector<double> roots;
  for (Eigen::Index i = 0; i < eig.size(); ++i) {
    const std::complex<double> z = eig[i];
    if (std::abs(z.imag()) > 1e-6 * std::max(1.0, std::abs(z.real()))) continue;
    double x = z.real();
    for (int it = 0; it < 8; ++it) {
      const double d = eval_deriv(used, x);
      if (d == 0.0) break;
      const double step = eval_poly(used, x) / d;
      x -= step;
      if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(x))) break;
    }
    roots.push_back(x);
  }
  return roots;
}

Vec3 bearing(const CameraIntrinsics& k, const PixelPoint& px) {
  const double y = (px.v - k.cy) / k.fy;
  const double x = (px.u - k.cx - k.skew * y) / k.fx;
  return Vec3(x, y, 1.0).normalized();
}

// Least-squares rotation and translation mapping `from` onto `to`.
RigidTransform absolute_orientation(const std::array<Vec3, 3>& from,
                                    const std::array<Vec3, 3>& to) {
  const Vec3 cf = (from[0] + from[1] + from[2]) / 3.0;
  const Vec3 ct = (to[0] + to[1] + to[2]) / 3.0;
  Mat3 h = Mat3::Zero();
  for (int i = 0; i < 3; ++i) h += (from[i] - cf) * (to[i] - ct).transpose();
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  const Mat3 r = svd.matrixV() * d * svd.matrixU().transpose();
  return {matrix_to_quat(r), ct - r * cf};
}

// Newton iterations on the three law-of-cosines equations. Roots of the
// quartic lose accuracy when two of them nearly coincide; this restores it.
Vec3 polish_depths(Vec3 s, double ca, double cb, double cg, double a2, double b2, double c2) {
  auto residual = [&](const Vec3& d) {
    return Vec3(d[1] * d[1] + d[2] * d[2] - 2.0 * d[1] * d[2] * ca - a2,
                d[0] * d[0] + d[2] * d[2] - 2.0 * d[0] * d[2] * cb - b2,
                d[0] * d[0] + d[1] * d[1] - 2.0 * d[0] * d[1] * cg - c2);
  };
  Vec3 f = residual(s);
  for (int it = 0; it < 10; ++it) {
    Mat3 jac;
    jac << 0.0, 2.0 * (s[1] - s[2] * ca), 2.0 * (s[2] - s[1] * ca),
        2.0 * (s[0] - s[2] * cb), 0.0, 2.0 * (s[2] - s[0] * cb),
        2.0 * (s[0] - s[1] * cg), 2.0 * (s[1] - s[0] * cg), 0.0;
    const Vec3 step = jac.fullPivLu().solve(f);
    if (!step.allFinite()) break;
    const Vec3 next = s - step;
    const Vec3 fn = residual(next);
    if (!(fn.norm() < f.norm())) break;
    s = next;
    f = fn;
  }
  return s;
}

}  // namespace

std::vector<RigidTransform> solve_minimal(const CameraIntrinsics& k,
                                          std::span<const Correspondence, 4> sample) {
  const Vec3& p1 = sample[0].object_point;
  const Vec3& p2 = sample[1].object_point;
  const Vec3& p3 = sample[2].object_point;
  const Vec3 e1 = p2 - p1;
  const Vec3 e2 = p3 - p1;
  const double cross2 = e1.cross(e2).squaredNorm();
  if (!(cross2 > kTolerances.collinear * e1.squaredNorm() * e2.squaredNorm())) {
    throw Error(ErrorCode::DegenerateGeometry, "minimal sample has collinear object points");
  }

  const Vec3 j1 = bearing(k, sample[0].image_point);
  const Vec3 j2 = bearing(k, sample[1].image_point);
  const Vec3 j3 = bearing(k, sample[2].image_point);
  const double ca = j2.dot(j3);
  const double cb = j1.dot(j3);
  const double cg = j1.dot(j2);
  const double a2 = (p2 - p3).squaredNorm();
  const double b2 = (p1 - p3).squaredNorm();
  const double c2 = (p1 - p2).squaredNorm();
  const double k1 = (a2 - c2) / b2;
  const double k2 = c2 / b2;

  // u = num(v) / den(v)
  const Poly<3> num{1.0 + k1, -2.0 * k1 * cb, k1 - 1.0};
  const Poly<2> den{2.0 * cg, -2.0 * ca};
  const Poly<3> q{1.0, -2.0 * cb, 1.0};  // 1 + v² - 2 v cos(beta)

  // den² + num² - 2 cg num den - k2 q den² = 0
  const Poly<3> den2 = mul(den, den);
  const Poly<5> num2 = mul(num, num);
  const Poly<4> num_den = mul(num, den);
  const Poly<5> q_den2 = mul(q, den2);
  Poly<5> quartic{};
  for (std::size_t i = 0; i < 5; ++i) {
    quartic[i] = num2[i] - k2 * q_den2[i];
    if (i < 3) quartic[i] += den2[i];
    if (i < 4) quartic[i] -= 2.0 * cg * num_den[i];
  }

  std::vector<RigidTransform> candidates;
  for (double v : real_roots(quartic)) {
    if (!(v > 0.0)) continue;
    const double qv = eval_poly(q, v);
    if (!(qv > 0.0)) continue;
    const double s1 = std::sqrt(b2 / qv);
    const double s3 = v * s1;

    // Both roots of the gamma equation are tried; the alpha equation picks one.
    const double disc = c2 - s1 * s1 * (1.0 - cg * cg);
    std::array<double, 3> s2_options{};
    std::size_t n_options = 0;
    const double dv = eval_poly(den, v);
    if (std::abs(dv) > 1e-10) s2_options[n_options++] = eval_poly(num, v) / dv * s1;
    if (disc >= -1e-9 * c2) {
      const double r = std::sqrt(std::max(0.0, disc));
      s2_options[n_options++] = s1 * cg + r;
      s2_options[n_options++] = s1 * cg - r;
    }
    double best_s2 = -1.0;
    double best_res = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n_options; ++i) {
      const double s2 = s2_options[i];
      if (!(s2 > 0.0)) continue;
      const double res = std::abs(s2 * s2 + s3 * s3 - 2.0 * s2 * s3 * ca - a2) +
                         std::abs(s1 * s1 + s2 * s2 - 2.0 * s1 * s2 * cg - c2);
      if (res < best_res) {
        best_res = res;
        best_s2 = s2;
      }
    }
    if (best_s2 <= 0.0 || best_res > 1e-6 * (a2 + b2 + c2)) continue;

    const Vec3 depths = polish_depths(Vec3(s1, best_s2, s3), ca, cb, cg, a2, b2, c2);
    const std::array<Vec3, 3> cam{depths[0] * j1, depths[1] * j2, depths[2] * j3};
    candidates.push_back(absolute_orientation({p1, p2, p3}, cam));
  }
  if (candidates.empty()) {
    throw Error(ErrorCode::NoSolution, "P3P has no real root with positive depths");
  }

  std::vector<double> err(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    err[i] = reprojection_error_single(k, candidates[i], sample[3]);
  }
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return err[a] < err[b]; });
  std::vector<RigidTransform> ranked;
  ranked.reserve(order.size());
  for (std::size_t i : order) ranked.push_back(candidates[i]);
  return ranked;
}

}  // namespace layoutpnp
