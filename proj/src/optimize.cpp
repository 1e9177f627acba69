#include <cmath>
#include <limits>

#include "layoutpnp/sipnp.hpp"
#include "objective.hpp"

namespace layoutpnp {
namespace {

void renormalize(SceneParams& p) {
  for (auto& q : p.quaternions) q = UnitQuaternion(q).coeffs();
  p.plane = Plane(p.plane).coeffs();
}

LossTraceEntry trace_entry(int step, const LossComponents& l) {
  return {step, l.reprojection, l.surface, l.collision, l.total};
}

}  // namespace

SceneSolution optimize(const CameraIntrinsics& k, std::span<const Body> bodies,
                       std::span<const RigidTransform> init, CorrespondenceLists correspondences,
                       const SiPnpConfig& cfg, std::optional<Plane> floor) {
  k.validate();
  cfg.validate();
  if (bodies.empty()) throw Error(ErrorCode::EmptyInput, "nothing to optimize");
  if (init.size() != bodies.size() || correspondences.size() != bodies.size()) {
    throw Error(ErrorCode::InvalidInput, "bodies, initial transforms and correspondences differ in size");
  }

  SceneParams params = SceneParams::from(init, floor ? *floor : initial_floor(bodies, init));
  const std::size_t n = bodies.size();
  const bool with_plane = cfg.optimize_plane;

  Eigen::VectorXd x = params.flatten(with_plane);
  Eigen::VectorXd m = Eigen::VectorXd::Zero(x.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(x.size());

  SceneSolution sol;
  double beta1_pow = 1.0;
  double beta2_pow = 1.0;
  int step = 0;
  SceneParams last_finite = params;
  SceneParams best = params;
  double best_total = std::numeric_limits<double>::infinity();
  for (;; ++step) {
    detail::Evaluation ev =
        detail::evaluate(k, bodies, params, correspondences, cfg, step < cfg.steps);
    const bool finite = std::isfinite(ev.loss.total) &&
                        (step == cfg.steps || ev.grad.flatten().allFinite());
    if (!finite) {
      if (step == 0) throw Error(ErrorCode::NonFiniteLoss, "initial loss is not finite");
      sol.diverged = true;
      params = last_finite;
      break;
    }
    last_finite = params;
    if (ev.loss.total < best_total) {
      best_total = ev.loss.total;
      best = params;
      sol.selected_step = step;
    }
    if (step % cfg.trace_every == 0 || step == cfg.steps) {
      sol.loss_trace.push_back(trace_entry(step, ev.loss));
    }
    if (step == cfg.steps) break;

    const Eigen::VectorXd g = ev.grad.flatten();
    beta1_pow *= cfg.adam_beta1;
    beta2_pow *= cfg.adam_beta2;
    m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * g;
    v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * g.cwiseProduct(g);
    const Eigen::VectorXd m_hat = m / (1.0 - beta1_pow);
    const Eigen::VectorXd v_hat = v / (1.0 - beta2_pow);
    x.array() -= cfg.learning_rate * m_hat.array() / (v_hat.array().sqrt() + cfg.adam_eps);

    params = SceneParams::unflatten(x, n, params.plane);
    try {
      renormalize(params);
    } catch (const Error&) {
      params = last_finite;
      sol.diverged = true;
      break;
    }
    x = params.flatten(with_plane);
  }

  // Constant-rate Adam keeps moving near a minimum; hand back the lowest
  // loss visited rather than wherever the last step landed.
  if (!sol.diverged) params = best;
  const auto transforms = params.transforms();
  for (std::size_t i = 0; i < n; ++i) {
    sol.transforms[bodies[i].id] =
        RigidTransform{transforms[i].rotation.canonical(), transforms[i].translation};
  }
  sol.floor = Plane(params.plane);
  return sol;
}

SceneSolution optimize(const CameraIntrinsics& k, std::span<const SceneObject> objects,
                       std::span<const RigidTransform> init, CorrespondenceLists correspondences,
                       const SiPnpConfig& cfg) {
  const auto bodies = to_bodies(objects);
  return optimize(k, bodies, init, correspondences, cfg);
}

}  // namespace layoutpnp
