#include "layoutpnp/matching.hpp"

#include <algorithm>
#include <cmath>

namespace layoutpnp {

void DescriptorMap::validate() const {
  const std::size_t d = dimension();
  if (!entries.empty() && d == 0) {
    throw Error(ErrorCode::InvalidInput, "descriptors must have at least one component");
  }
  for (const auto& e : entries) {
    if (e.descriptor.size() != d) {
      throw Error(ErrorCode::DimensionMismatch, "descriptor lengths differ within a map");
    }
    if (!std::all_of(e.descriptor.begin(), e.descriptor.end(),
                     [](float f) { return std::isfinite(f); })) {
      throw Error(ErrorCode::InvalidInput, "descriptor contains a non-finite value");
    }
  }
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

std::vector<Correspondence> match_descriptors(std::span<const DescriptorMap> render_maps,
                                              const DescriptorMap& scene_map) {
  scene_map.validate();
  if (scene_map.entries.empty()) throw Error(ErrorCode::EmptyInput, "scene descriptor map is empty");
  const std::size_t d = scene_map.dimension();

  // Scene descriptors normalized once; query norms are folded in per entry.
  std::vector<std::vector<double>> scene_unit;
  scene_unit.reserve(scene_map.entries.size());
  for (const auto& e : scene_map.entries) {
    std::vector<double> u(e.descriptor.begin(), e.descriptor.end());
    double n = 0.0;
    for (double x : u) n += x * x;
    n = std::sqrt(n);
    for (double& x : u) x = n > 0.0 ? x / n : 0.0;
    scene_unit.push_back(std::move(u));
  }

  std::vector<Correspondence> out;
  bool any_render = false;
  for (const auto& map : render_maps) {
    map.validate();
    if (map.entries.empty()) continue;
    any_render = true;
    if (map.dimension() != d) {
      throw Error(ErrorCode::DimensionMismatch, "render and scene descriptor dimensions differ");
    }
    for (const auto& e : map.entries) {
      if (!e.foreground) continue;
      if (!e.object_point) {
        throw Error(ErrorCode::InvalidInput, "render descriptor lacks a 3D back-projection");
      }
      double qn = 0.0;
      for (float x : e.descriptor) qn += static_cast<double>(x) * x;
      qn = std::sqrt(qn);
      std::size_t best = 0;
      double best_sim = -2.0;
      for (std::size_t s = 0; s < scene_unit.size(); ++s) {
        double dot = 0.0;
        for (std::size_t c = 0; c < d; ++c) dot += e.descriptor[c] * scene_unit[s][c];
        const double sim = qn > 0.0 ? dot / qn : 0.0;
        if (sim > best_sim) {
          best_sim = sim;
          best = s;
        }
      }
      out.push_back({*e.object_point, scene_map.entries[best].pixel,
                     std::clamp(best_sim, -1.0, 1.0)});
    }
  }
  if (!any_render) throw Error(ErrorCode::EmptyInput, "no render descriptors given");
  return out;
}

double matching_score(std::span<const Correspondence> correspondences,
                      std::span<const std::size_t> inlier_indices) {
  if (inlier_indices.empty()) return -1.0;
  std::vector<double> sims;
  sims.reserve(inlier_indices.size());
  for (std::size_t i : inlier_indices) {
    if (i >= correspondences.size()) {
      throw Error(ErrorCode::InvalidInput, "inlier index out of range");
    }
    sims.push_back(correspondences[i].similarity);
  }
  std::sort(sims.begin(), sims.end());
  const std::size_t m = sims.size();
  return m % 2 == 1 ? sims[m / 2] : 0.5 * (sims[m / 2 - 1] + sims[m / 2]);
}

double matching_score(std::span<const Correspondence> correspondences,
                      const RansacResult* ransac_result) {
  if (ransac_result == nullptr) return -1.0;
  return matching_score(correspondences, ransac_result->inlier_indices);
}

NeglectFilterResult filter_neglect(std::span<const MatchReport> reports, double threshold) {
  if (!(threshold >= -1.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::InvalidInput, "neglect threshold must lie in [-1, 1]");
  }
  NeglectFilterResult r;
  for (const auto& rep : reports) {
    if (rep.matching_score >= threshold) {
      r.accepted.push_back(rep.object_id);
    } else {
      r.rejected.push_back(rep.object_id);
    }
  }
  r.scene_accepted = r.rejected.empty();
  return r;
}

}  // namespace layoutpnp
