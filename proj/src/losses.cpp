#include <algorithm>
#include <cmath>
#include <limits>

#include "layoutpnp/sipnp.hpp"
#include "objective.hpp"

namespace layoutpnp {
namespace {

// Penalty weight (squared pixels per squared scene unit) applied to the part
// of a depth that falls below the optimizer clamp.
constexpr double kDepthBarrier = 1e6;

bool near(const Vec3& a, const Vec3& b, double tol) { return (a - b).norm() <= tol; }

// d R(q) / d q_k for unit q = (w, x, y, z), k = 0..3.
std::array<Mat3, 4> rotation_partials(const Vec4& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  std::array<Mat3, 4> d;
  d[0] << 0, -z, y, z, 0, -x, -y, x, 0;
  d[1] << 0, y, z, y, -2 * x, -w, z, w, -2 * x;
  d[2] << -2 * y, x, w, x, 0, z, -w, z, -2 * y;
  d[3] << -2 * z, -w, x, w, -2 * z, y, x, y, 0;
  for (auto& m : d) m *= 2.0;
  return d;
}

// Pulls dL/dR back to the raw quaternion through q -> q / |q| -> R.
Vec4 quaternion_gradient(const Vec4& raw, const Mat3& dl_dr) {
  const double n = raw.norm();
  const Vec4 unit = raw / n;
  const auto partials = rotation_partials(unit);
  Vec4 g;
  for (int i = 0; i < 4; ++i) g[i] = (dl_dr.array() * partials[static_cast<std::size_t>(i)].array()).sum();
  return (g - unit * unit.dot(g)) / n;
}

struct Hull {
  Vec3 lo;
  Vec3 hi;
  std::array<int, 3> lo_idx{};
  std::array<int, 3> hi_idx{};
};

Hull hull_of(const BoxCorners& c) {
  Hull h{c[0], c[0], {0, 0, 0}, {0, 0, 0}};
  for (int i = 1; i < 8; ++i) {
    for (int a = 0; a < 3; ++a) {
      if (c[static_cast<std::size_t>(i)][a] < h.lo[a]) {
        h.lo[a] = c[static_cast<std::size_t>(i)][a];
        h.lo_idx[static_cast<std::size_t>(a)] = i;
      }
      if (c[static_cast<std::size_t>(i)][a] > h.hi[a]) {
        h.hi[a] = c[static_cast<std::size_t>(i)][a];
        h.hi_idx[static_cast<std::size_t>(a)] = i;
      }
    }
  }
  return h;
}

double product_except(const Vec3& v, int skip) {
  double p = 1.0;
  for (int a = 0; a < 3; ++a) {
    if (a != skip) p *= v[a];
  }
  return p;
}

// IOU of two hulls, plus d IOU / d corner coordinate for each box when
// requested. Ties in min/max go to the lowest corner index, and to box A
// between boxes, which yields a valid one-sided derivative.
double hull_iou(const Hull& a, const Hull& b, std::array<Vec3, 8>* ga,
                std::array<Vec3, 8>* gb) {
  Vec3 overlap;
  for (int k = 0; k < 3; ++k) {
    overlap[k] = std::min(a.hi[k], b.hi[k]) - std::max(a.lo[k], b.lo[k]);
    if (!(overlap[k] > 0.0)) return 0.0;
  }
  const Vec3 ea = a.hi - a.lo;
  const Vec3 eb = b.hi - b.lo;
  const double inter = overlap.prod();
  const double va = ea.prod();
  const double vb = eb.prod();
  const double uni = va + vb - inter;
  const double iou = inter / uni;
  if (ga == nullptr || gb == nullptr) return iou;

  const double d_inter = (va + vb) / (uni * uni);
  const double d_vol = -inter / (uni * uni);
  for (int k = 0; k < 3; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const double d_overlap = d_inter * product_except(overlap, k);
    if (a.hi[k] <= b.hi[k]) {
      (*ga)[static_cast<std::size_t>(a.hi_idx[ku])][k] += d_overlap;
    } else {
      (*gb)[static_cast<std::size_t>(b.hi_idx[ku])][k] += d_overlap;
    }
    if (a.lo[k] >= b.lo[k]) {
      (*ga)[static_cast<std::size_t>(a.lo_idx[ku])][k] -= d_overlap;
    } else {
      (*gb)[static_cast<std::size_t>(b.lo_idx[ku])][k] -= d_overlap;
    }
    const double d_ea = d_vol * product_except(ea, k);
    (*ga)[static_cast<std::size_t>(a.hi_idx[ku])][k] += d_ea;
    (*ga)[static_cast<std::size_t>(a.lo_idx[ku])][k] -= d_ea;
    const double d_eb = d_vol * product_except(eb, k);
    (*gb)[static_cast<std::size_t>(b.hi_idx[ku])][k] += d_eb;
    (*gb)[static_cast<std::size_t>(b.lo_idx[ku])][k] -= d_eb;
  }
  return iou;
}

}  // namespace

BoxCorners box_corners(const Vec3& lo, const Vec3& hi) {
  BoxCorners c;
  for (int i = 0; i < 8; ++i) {
    c[static_cast<std::size_t>(i)] =
        Vec3((i & 1) ? hi.x() : lo.x(), (i & 2) ? hi.y() : lo.y(), (i & 4) ? hi.z() : lo.z());
  }
  return c;
}

BoxCorners transform_box(const RigidTransform& tr, const BoxCorners& box) {
  const Mat3 r = tr.rotation_matrix();
  BoxCorners out;
  for (std::size_t i = 0; i < 8; ++i) out[i] = r * box[i] + tr.translation;
  return out;
}

void SceneObject::validate() const {
  if (id.empty()) throw Error(ErrorCode::InvalidInput, "object id must be non-empty");
  if (keypoints.empty()) {
    throw Error(ErrorCode::InvalidInput, "object '" + id + "' has no keypoints");
  }
  double scale = 0.0;
  for (const auto& c : bbox_corners) scale = std::max(scale, (c - bbox_corners[0]).norm());
  if (!(scale > 0.0)) throw Error(ErrorCode::InvalidInput, "object '" + id + "' has a degenerate box");
  const double tol = 1e-6 * scale;

  // Some choice of three edges from corner 0 must be mutually orthogonal and
  // generate the other seven corners.
  bool valid_box = false;
  for (std::size_t i = 1; i < 8 && !valid_box; ++i) {
    for (std::size_t j = i + 1; j < 8 && !valid_box; ++j) {
      for (std::size_t l = j + 1; l < 8 && !valid_box; ++l) {
        const Vec3 e1 = bbox_corners[i] - bbox_corners[0];
        const Vec3 e2 = bbox_corners[j] - bbox_corners[0];
        const Vec3 e3 = bbox_corners[l] - bbox_corners[0];
        const double ortho = std::abs(e1.dot(e2)) + std::abs(e1.dot(e3)) + std::abs(e2.dot(e3));
        if (ortho > tol * scale) continue;
        if (e1.norm() <= tol || e2.norm() <= tol || e3.norm() <= tol) continue;
        bool all = true;
        for (int m = 0; m < 8 && all; ++m) {
          const Vec3 expect = bbox_corners[0] + ((m & 1) ? e1 : Vec3::Zero()) +
                              ((m & 2) ? e2 : Vec3::Zero()) + ((m & 4) ? e3 : Vec3::Zero());
          all = std::any_of(bbox_corners.begin(), bbox_corners.end(),
                            [&](const Vec3& c) { return near(c, expect, tol); });
        }
        valid_box = all;
      }
    }
  }
  if (!valid_box) {
    throw Error(ErrorCode::InvalidInput, "object '" + id + "' bbox corners do not form a box");
  }
  for (const auto& b : bottom_vertices) {
    if (std::none_of(bbox_corners.begin(), bbox_corners.end(),
                     [&](const Vec3& c) { return near(c, b, tol); })) {
      throw Error(ErrorCode::InvalidInput,
                  "object '" + id + "' bottom vertex is not a bbox corner");
    }
  }
}

SceneObject SceneObject::from_extent(std::string id, const Vec3& lo, const Vec3& hi,
                                     std::vector<Vec3> keypoints) {
  SceneObject o;
  o.id = std::move(id);
  o.keypoints = std::move(keypoints);
  o.bbox_corners = box_corners(lo, hi);
  o.bottom_vertices = {o.bbox_corners[0], o.bbox_corners[1], o.bbox_corners[2], o.bbox_corners[3]};
  return o;
}

Body Body::from_object(const SceneObject& object) {
  return {object.id, {object.bbox_corners}, object.bottom_vertices};
}

std::vector<Body> to_bodies(std::span<const SceneObject> objects) {
  std::vector<Body> bodies;
  bodies.reserve(objects.size());
  for (const auto& o : objects) bodies.push_back(Body::from_object(o));
  return bodies;
}

void SiPnpConfig::validate() const {
  if (!(omega_surface >= 0.0) || !(omega_collision >= 0.0) || !(learning_rate > 0.0) ||
      steps < 1 || !(adam_beta1 >= 0.0 && adam_beta1 < 1.0) ||
      !(adam_beta2 >= 0.0 && adam_beta2 < 1.0) || !(adam_eps > 0.0) || trace_every < 1) {
    throw Error(ErrorCode::InvalidInput, "invalid SI-PnP configuration");
  }
}

SceneParams SceneParams::from(std::span<const RigidTransform> transforms, const Plane& floor) {
  SceneParams p;
  for (const auto& t : transforms) {
    p.quaternions.push_back(t.rotation.coeffs());
    p.translations.push_back(t.translation);
  }
  p.plane = floor.coeffs();
  return p;
}

std::vector<RigidTransform> SceneParams::transforms() const {
  std::vector<RigidTransform> out;
  out.reserve(quaternions.size());
  for (std::size_t i = 0; i < quaternions.size(); ++i) {
    out.push_back({UnitQuaternion(quaternions[i]), translations[i]});
  }
  return out;
}

Eigen::VectorXd SceneParams::flatten(bool with_plane) const {
  const auto n = static_cast<Eigen::Index>(quaternions.size());
  Eigen::VectorXd x(7 * n + (with_plane ? 4 : 0));
  for (Eigen::Index i = 0; i < n; ++i) {
    x.segment<4>(7 * i) = quaternions[static_cast<std::size_t>(i)];
    x.segment<3>(7 * i + 4) = translations[static_cast<std::size_t>(i)];
  }
  if (with_plane) x.tail<4>() = plane;
  return x;
}

SceneParams SceneParams::unflatten(const Eigen::VectorXd& x, std::size_t n_bodies,
                                   const Vec4& plane_if_absent) {
  SceneParams p;
  for (std::size_t i = 0; i < n_bodies; ++i) {
    const auto o = static_cast<Eigen::Index>(7 * i);
    p.quaternions.push_back(x.segment<4>(o));
    p.translations.push_back(x.segment<3>(o + 4));
  }
  p.plane = x.size() == static_cast<Eigen::Index>(7 * n_bodies + 4) ? Vec4(x.tail<4>())
                                                                     : plane_if_absent;
  return p;
}

Eigen::VectorXd SceneGradient::flatten() const {
  SceneParams p{quaternions, translations, plane.value_or(Vec4::Zero())};
  return p.flatten(plane.has_value());
}

namespace detail {

Evaluation evaluate(const CameraIntrinsics& k, std::span<const Body> bodies,
                    const SceneParams& params, CorrespondenceLists correspondences,
                    const SiPnpConfig& cfg, bool with_gradient) {
  const std::size_t n = bodies.size();
  if (params.quaternions.size() != n || params.translations.size() != n ||
      correspondences.size() != n) {
    throw Error(ErrorCode::InvalidInput, "bodies, parameters and correspondences differ in size");
  }
  const double eps = kTolerances.optimizer_depth_clamp;

  std::vector<Mat3> rot(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double qn = params.quaternions[i].norm();
    if (!(qn > 0.0) || !std::isfinite(qn)) {
      throw Error(ErrorCode::NonFiniteLoss, "quaternion parameter is zero or non-finite");
    }
    const Vec4 u = params.quaternions[i] / qn;
    rot[i] = quat_to_matrix(UnitQuaternion(u[0], u[1], u[2], u[3]));
  }

  Evaluation ev;
  std::vector<Mat3> dl_dr(n, Mat3::Zero());
  std::vector<Vec3> dl_dt(n, Vec3::Zero());
  Vec4 dl_dplane = Vec4::Zero();

  // Reprojection.
  double rep = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& c : correspondences[i]) {
      const Vec3 x = rot[i] * c.object_point + params.translations[i];
      double z = x.z();
      double dz_scale = 1.0;
      if (z < eps) {
        const double gap = eps - z;
        rep += kDepthBarrier * gap * gap;
        if (with_gradient) {
          const Vec3 g(0.0, 0.0, -2.0 * kDepthBarrier * gap);
          dl_dt[i] += g;
          dl_dr[i] += g * c.object_point.transpose();
        }
        z = eps;
        dz_scale = 0.0;
      }
      const double iz = 1.0 / z;
      const double ru = (k.fx * x.x() + k.skew * x.y()) * iz + k.cx - c.image_point.u;
      const double rv = k.fy * x.y() * iz + k.cy - c.image_point.v;
      rep += ru * ru + rv * rv;
      if (with_gradient) {
        const Vec3 g(2.0 * ru * k.fx * iz, 2.0 * (ru * k.skew + rv * k.fy) * iz,
                     -2.0 * dz_scale * iz * iz *
                         (ru * (k.fx * x.x() + k.skew * x.y()) + rv * k.fy * x.y()));
        dl_dt[i] += g;
        dl_dr[i] += g * c.object_point.transpose();
      }
    }
  }

  // Surface.
  const Vec3 pn = params.plane.head<3>();
  const double pnn = pn.norm();
  if (!(pnn > 0.0) || !std::isfinite(pnn) || !std::isfinite(params.plane[3])) {
    throw Error(ErrorCode::NonFiniteLoss, "plane parameter is degenerate");
  }
  double surf = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& b : bodies[i].bottom) {
      const Vec3 x = rot[i] * b + params.translations[i];
      const double r = (pn.dot(x) + params.plane[3]) / pnn;
      surf += r * r;
      if (with_gradient) {
        const double w = 2.0 * cfg.omega_surface * r;
        const Vec3 g = w * pn / pnn;
        dl_dt[i] += g;
        dl_dr[i] += g * b.transpose();
        dl_dplane.head<3>() += w * (x - r * pn / pnn) / pnn;
        dl_dplane[3] += w / pnn;
      }
    }
  }

  // Collision.
  double coll = 0.0;
  std::vector<std::vector<BoxCorners>> world_boxes(n);
  std::vector<std::vector<Hull>> hulls(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& box : bodies[i].boxes) {
      BoxCorners w;
      for (std::size_t c = 0; c < 8; ++c) w[c] = rot[i] * box[c] + params.translations[i];
      hulls[i].push_back(hull_of(w));
      world_boxes[i].push_back(w);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      for (std::size_t a = 0; a < hulls[i].size(); ++a) {
        for (std::size_t b = 0; b < hulls[j].size(); ++b) {
          std::array<Vec3, 8> ga;
          std::array<Vec3, 8> gb;
          ga.fill(Vec3::Zero());
          gb.fill(Vec3::Zero());
          const bool grad = with_gradient && cfg.omega_collision != 0.0;
          const double iou = hull_iou(hulls[i][a], hulls[j][b], grad ? &ga : nullptr,
                                      grad ? &gb : nullptr);
          coll += iou;
          if (grad && iou > 0.0) {
            for (std::size_t c = 0; c < 8; ++c) {
              const Vec3 gi = cfg.omega_collision * ga[c];
              const Vec3 gj = cfg.omega_collision * gb[c];
              dl_dt[i] += gi;
              dl_dr[i] += gi * bodies[i].boxes[a][c].transpose();
              dl_dt[j] += gj;
              dl_dr[j] += gj * bodies[j].boxes[b][c].transpose();
            }
          }
        }
      }
    }
  }

  ev.loss.reprojection = rep;
  ev.loss.surface = surf;
  ev.loss.collision = coll;
  ev.loss.total = rep + cfg.omega_surface * surf + cfg.omega_collision * coll;

  if (with_gradient) {
    ev.grad.quaternions.resize(n);
    ev.grad.translations = dl_dt;
    for (std::size_t i = 0; i < n; ++i) {
      ev.grad.quaternions[i] = quaternion_gradient(params.quaternions[i], dl_dr[i]);
    }
    if (cfg.optimize_plane) ev.grad.plane = dl_dplane;
  }
  return ev;
}

}  // namespace detail

double reprojection_loss(const CameraIntrinsics& k, std::span<const RigidTransform> transforms,
                         CorrespondenceLists correspondences) {
  if (transforms.size() != correspondences.size()) {
    throw Error(ErrorCode::InvalidInput, "transforms and correspondences differ in size");
  }
  std::vector<Body> dummy(transforms.size());
  SiPnpConfig cfg;
  return detail::evaluate(k, dummy, SceneParams::from(transforms, Plane()), correspondences,
                          cfg, false)
      .loss.reprojection;
}

double surface_loss(std::span<const Body> bodies, std::span<const RigidTransform> transforms,
                    const Plane& floor) {
  if (bodies.size() != transforms.size()) {
    throw Error(ErrorCode::InvalidInput, "bodies and transforms differ in size");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    for (const auto& b : bodies[i].bottom) {
      const double r = plane_residual(floor, transforms[i].apply(b));
      sum += r * r;
    }
  }
  return sum;
}

double surface_loss(std::span<const SceneObject> objects,
                    std::span<const RigidTransform> transforms, const Plane& floor) {
  const auto bodies = to_bodies(objects);
  return surface_loss(bodies, transforms, floor);
}

double bbox_iou_3d(const BoxCorners& a, const BoxCorners& b) {
  return hull_iou(hull_of(a), hull_of(b), nullptr, nullptr);
}

double collision_loss(std::span<const Body> bodies, std::span<const RigidTransform> transforms) {
  if (bodies.size() != transforms.size()) {
    throw Error(ErrorCode::InvalidInput, "bodies and transforms differ in size");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    for (std::size_t j = i + 1; j < bodies.size(); ++j) {
      for (const auto& a : bodies[i].boxes) {
        for (const auto& b : bodies[j].boxes) {
          sum += bbox_iou_3d(transform_box(transforms[i], a), transform_box(transforms[j], b));
        }
      }
    }
  }
  return sum;
}

double collision_loss(std::span<const SceneObject> objects,
                      std::span<const RigidTransform> transforms) {
  const auto bodies = to_bodies(objects);
  return collision_loss(bodies, transforms);
}

LossComponents total_loss(const CameraIntrinsics& k, std::span<const Body> bodies,
                          std::span<const RigidTransform> transforms, const Plane& floor,
                          CorrespondenceLists correspondences, const SiPnpConfig& cfg) {
  return total_loss(k, bodies, SceneParams::from(transforms, floor), correspondences, cfg);
}

LossComponents total_loss(const CameraIntrinsics& k, std::span<const Body> bodies,
                          const SceneParams& params, CorrespondenceLists correspondences,
                          const SiPnpConfig& cfg) {
  return detail::evaluate(k, bodies, params, correspondences, cfg, false).loss;
}

SceneGradient gradient(const CameraIntrinsics& k, std::span<const Body> bodies,
                       const SceneParams& params, CorrespondenceLists correspondences,
                       const SiPnpConfig& cfg) {
  auto ev = detail::evaluate(k, bodies, params, correspondences, cfg, true);
  if (!std::isfinite(ev.loss.total)) {
    throw Error(ErrorCode::NonFiniteLoss, "total loss is not finite");
  }
  return std::move(ev.grad);
}

Plane initial_floor(std::span<const Body> bodies, std::span<const RigidTransform> transforms) {
  std::vector<Vec3> pts;
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    for (const auto& b : bodies[i].bottom) pts.push_back(transforms[i].apply(b));
  }
  return fit_plane(pts);
}

}  // namespace layoutpnp
