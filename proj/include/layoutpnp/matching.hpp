#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "layoutpnp/pnp.hpp"

namespace layoutpnp {

// One feature location. Render entries carry the 3D point the pixel
// back-projects to in the object frame; scene entries do not.
struct DescriptorEntry {
  PixelPoint pixel;
  std::optional<Vec3> object_point;
  bool foreground = true;
  std::vector<float> descriptor;
};

struct DescriptorMap {
  std::vector<DescriptorEntry> entries;

  std::size_t dimension() const { return entries.empty() ? 0 : entries.front().descriptor.size(); }
  // Throws DimensionMismatch or InvalidInput (non-finite values, empty descriptors).
  void validate() const;
};

struct MatchReport {
  std::string object_id;
  std::vector<Correspondence> correspondences;
  double matching_score = -1.0;
  bool neglected = true;
};

double cosine_similarity(std::span<const float> a, std::span<const float> b);

// Exhaustive cosine nearest neighbour from every foreground render entry
// (all views pooled) into the scene. Equal similarities resolve to the lowest
// scene index. Throws DimensionMismatch or EmptyInput.
std::vector<Correspondence> match_descriptors(std::span<const DescriptorMap> render_maps,
                                              const DescriptorMap& scene_map);

// Median similarity over the RANSAC inliers; -1 when there are none.
double matching_score(std::span<const Correspondence> correspondences,
                      const RansacResult* ransac_result);
double matching_score(std::span<const Correspondence> correspondences,
                      std::span<const std::size_t> inlier_indices);

inline constexpr double kDefaultNeglectThreshold = 0.5;

struct NeglectFilterResult {
  std::vector<std::string> accepted;
  std::vector<std::string> rejected;
  // The scene image is usable only if no object was rejected.
  bool scene_accepted = true;
};

NeglectFilterResult filter_neglect(std::span<const MatchReport> reports,
                                   double threshold = kDefaultNeglectThreshold);

}  // namespace layoutpnp
