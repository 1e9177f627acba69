#pragma once

#include "layoutpnp/sipnp.hpp"

namespace layoutpnp::detail {

struct Evaluation {
  LossComponents loss;
  SceneGradient grad;
};

// Loss and, when requested, its gradient at raw parameters. Summation order
// is fixed, so repeated calls are bit-identical.
Evaluation evaluate(const CameraIntrinsics& k, std::span<const Body> bodies,
                    const SceneParams& params, CorrespondenceLists correspondences,
                    const SiPnpConfig& cfg, bool with_gradient);

}  // namespace layoutpnp::detail
