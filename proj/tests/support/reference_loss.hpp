#pragma once

// Straightforward re-implementation of the joint objective, templated on the
// scalar so finite differences can run in extended precision.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "layoutpnp/sipnp.hpp"

namespace reference {

using namespace layoutpnp;

template <typename T>
struct V3 {
  T x, y, z;
};

template <typename T>
struct Pose {
  T r[3][3];
  V3<T> t;

  V3<T> apply(const Vec3& p) const {
    const T px = p.x(), py = p.y(), pz = p.z();
    return {r[0][0] * px + r[0][1] * py + r[0][2] * pz + t.x,
            r[1][0] * px + r[1][1] * py + r[1][2] * pz + t.y,
            r[2][0] * px + r[2][1] * py + r[2][2] * pz + t.z};
  }
};

template <typename T>
Pose<T> pose_from(const T* q_raw, const T* t) {
  const T n = std::sqrt(q_raw[0] * q_raw[0] + q_raw[1] * q_raw[1] + q_raw[2] * q_raw[2] + q_raw[3] * q_raw[3]);
  const T w = q_raw[0] / n, x = q_raw[1] / n, y = q_raw[2] / n, z = q_raw[3] / n;
  Pose<T> p;
  p.r[0][0] = 1 - 2 * (y * y + z * z);
  p.r[0][1] = 2 * (x * y - w * z);
  p.r[0][2] = 2 * (x * z + w * y);
  p.r[1][0] = 2 * (x * y + w * z);
  p.r[1][1] = 1 - 2 * (x * x + z * z);
  p.r[1][2] = 2 * (y * z - w * x);
  p.r[2][0] = 2 * (x * z - w * y);
  p.r[2][1] = 2 * (y * z + w * x);
  p.r[2][2] = 1 - 2 * (x * x + y * y);
  p.t = {t[0], t[1], t[2]};
  return p;
}

template <typename T>
struct Components {
  T reprojection = 0, surface = 0, collision = 0, total = 0;
};

template <typename T>
T axis_overlap(T alo, T ahi, T blo, T bhi) {
  return std::max(T(0), std::min(ahi, bhi) - std::max(alo, blo));
}

template <typename T>
T iou(const std::array<V3<T>, 8>& a, const std::array<V3<T>, 8>& b) {
  auto bounds = [](const std::array<V3<T>, 8>& c, T lo[3], T hi[3]) {
    lo[0] = hi[0] = c[0].x;
    lo[1] = hi[1] = c[0].y;
    lo[2] = hi[2] = c[0].z;
    for (const auto& v : c) {
      lo[0] = std::min(lo[0], v.x), hi[0] = std::max(hi[0], v.x);
      lo[1] = std::min(lo[1], v.y), hi[1] = std::max(hi[1], v.y);
      lo[2] = std::min(lo[2], v.z), hi[2] = std::max(hi[2], v.z);
    }
  };
  T alo[3], ahi[3], blo[3], bhi[3];
  bounds(a, alo, ahi);
  bounds(b, blo, bhi);
  T inter = 1, va = 1, vb = 1;
  for (int k = 0; k < 3; ++k) {
    inter *= axis_overlap(alo[k], ahi[k], blo[k], bhi[k]);
    va *= ahi[k] - alo[k];
    vb *= bhi[k] - blo[k];
  }
  if (inter <= 0) return 0;
  return inter / (va + vb - inter);
}

// Parameters flattened as [q0 t0 q1 t1 ... plane] like SceneParams::flatten;
// `plane` is used when the vector carries no plane block.
template <typename T>
Components<T> evaluate(const CameraIntrinsics& k, const std::vector<Body>& bodies,
                       const std::vector<std::vector<Correspondence>>& corrs, const std::vector<T>& x,
                       const Vec4& fixed_plane, const SiPnpConfig& cfg) {
  const std::size_t n = bodies.size();
  std::vector<Pose<T>> poses;
  for (std::size_t i = 0; i < n; ++i) poses.push_back(pose_from(&x[7 * i], &x[7 * i + 4]));
  T plane[4];
  for (int a = 0; a < 4; ++a) plane[a] = x.size() > 7 * n ? x[7 * n + static_cast<std::size_t>(a)] : T(fixed_plane[a]);

  Components<T> c;
  const T eps = T(1e-6);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& m : corrs[i]) {
      const V3<T> p = poses[i].apply(m.object_point);
      T z = p.z;
      if (z < eps) {
        c.reprojection += T(1e6) * (eps - z) * (eps - z);
        z = eps;
      }
      const T u = (T(k.fx) * p.x + T(k.skew) * p.y) / z + T(k.cx) - T(m.image_point.u);
      const T v = T(k.fy) * p.y / z + T(k.cy) - T(m.image_point.v);
      c.reprojection += u * u + v * v;
    }
  }
  const T nn = std::sqrt(plane[0] * plane[0] + plane[1] * plane[1] + plane[2] * plane[2]);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& b : bodies[i].bottom) {
      const V3<T> p = poses[i].apply(b);
      const T r = (plane[0] * p.x + plane[1] * p.y + plane[2] * p.z + plane[3]) / nn;
      c.surface += r * r;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      for (const auto& ba : bodies[i].boxes) {
        for (const auto& bb : bodies[j].boxes) {
          std::array<V3<T>, 8> wa, wb;
          for (std::size_t q = 0; q < 8; ++q) {
            wa[q] = poses[i].apply(ba[q]);
            wb[q] = poses[j].apply(bb[q]);
          }
          c.collision += iou(wa, wb);
        }
      }
    }
  }
  c.total = c.reprojection + T(cfg.omega_surface) * c.surface + T(cfg.omega_collision) * c.collision;
  return c;
}

}  // namespace reference
