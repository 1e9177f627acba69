#include "layoutpnp/arrange.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <set>

namespace layoutpnp {
namespace {

struct Fitted {
  bool ok = false;
  RansacResult ransac;
  double score = -1.0;
};

Fitted fit_one(const CameraIntrinsics& k, std::span<const Correspondence> corrs,
               const RansacConfig& base, std::uint64_t salt) {
  Fitted f;
  RansacConfig rc = base;
  rc.seed = base.seed + salt;
  try {
    f.ransac = ransac_pnp(k, corrs, rc);
    f.ok = true;
    f.score = matching_score(corrs, f.ransac.inlier_indices);
  } catch (const Error&) {
    f.ok = false;
    f.score = -1.0;
  }
  return f;
}

std::vector<Correspondence> subset(std::span<const Correspondence> corrs,
                                   std::span<const std::size_t> idx) {
  std::vector<Correspondence> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(corrs[i]);
  return out;
}

RigidTransform yaw_at(double x, double y, double yaw) {
  return {UnitQuaternion::from_axis_angle(Vec3::UnitZ(), yaw), Vec3(x, y, 0.0)};
}

}  // namespace

void SceneSpec::validate() const {
  camera.validate();
  std::set<std::string> ids;
  for (const auto& o : objects) {
    o.validate();
    if (!ids.insert(o.id).second) {
      throw Error(ErrorCode::InvalidInput, "duplicate object id '" + o.id + "'");
    }
  }
}

CameraIntrinsics default_camera(double image_size_px) {
  return CameraIntrinsics::from_fov(image_size_px, image_size_px, 60.0);
}

std::map<std::string, std::vector<Correspondence>> resolve_correspondences(const SceneSpec& spec) {
  std::map<std::string, std::vector<Correspondence>> out;
  for (const auto& o : spec.objects) {
    if (auto it = spec.correspondences.find(o.id); it != spec.correspondences.end()) {
      out[o.id] = it->second;
      continue;
    }
    auto rd = spec.render_descriptors.find(o.id);
    if (rd == spec.render_descriptors.end() || !spec.scene_descriptors) {
      out[o.id] = {};
      continue;
    }
    out[o.id] = match_descriptors(rd->second, *spec.scene_descriptors);
  }
  return out;
}

SceneSolution arrange_scene(const SceneSpec& spec, const ArrangeConfig& cfg) {
  spec.validate();
  if (spec.objects.empty()) {
    throw Error(ErrorCode::AllObjectsNeglected, "scene has no objects");
  }
  const auto corrs = resolve_correspondences(spec);

  SceneSolution sol;
  std::vector<MatchReport> reports;
  std::vector<Fitted> fits;
  for (std::size_t i = 0; i < spec.objects.size(); ++i) {
    const auto& o = spec.objects[i];
    const auto& c = corrs.at(o.id);
    Fitted f = fit_one(spec.camera, c, cfg.ransac, i);
    reports.push_back({o.id, c, f.score, !f.ok || f.score < cfg.neglect_threshold});
    sol.matching_scores[o.id] = f.score;
    fits.push_back(std::move(f));
  }
  const NeglectFilterResult filtered = filter_neglect(reports, cfg.neglect_threshold);
  const std::set<std::string> rejected(filtered.rejected.begin(), filtered.rejected.end());

  std::vector<Body> bodies;
  std::vector<RigidTransform> init;
  std::vector<std::vector<Correspondence>> inlier_corrs;
  for (std::size_t i = 0; i < spec.objects.size(); ++i) {
    const auto& o = spec.objects[i];
    if (!fits[i].ok || rejected.contains(o.id)) {
      sol.neglected.push_back(o.id);
      continue;
    }
    bodies.push_back(Body::from_object(o));
    init.push_back(fits[i].ransac.pose);
    inlier_corrs.push_back(subset(corrs.at(o.id), fits[i].ransac.inlier_indices));
    sol.inliers[o.id] = fits[i].ransac.inlier_indices;
  }
  if (bodies.empty()) {
    std::string ids;
    for (const auto& id : sol.neglected) ids += (ids.empty() ? "" : ", ") + id;
    throw Error(ErrorCode::AllObjectsNeglected, "every object was neglected: " + ids);
  }

  SceneSolution refined = optimize(spec.camera, bodies, init, inlier_corrs, cfg.sipnp);
  sol.transforms = std::move(refined.transforms);
  sol.floor = refined.floor;
  sol.loss_trace = std::move(refined.loss_trace);
  sol.diverged = refined.diverged;
  sol.selected_step = refined.selected_step;
  return sol;
}

CompoundObject CompoundObject::single(const SceneObject& object) {
  return {object.id, {{object, RigidTransform::identity()}}};
}

std::vector<Vec3> CompoundObject::merged_keypoints() const {
  std::vector<Vec3> out;
  for (const auto& m : members) {
    for (const auto& p : m.object.keypoints) out.push_back(m.relative.apply(p));
  }
  return out;
}

std::vector<BoxCorners> CompoundObject::member_boxes() const {
  std::vector<BoxCorners> out;
  for (const auto& m : members) out.push_back(transform_box(m.relative, m.object.bbox_corners));
  return out;
}

BoxCorners CompoundObject::union_bbox() const {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& box : member_boxes()) {
    for (const auto& c : box) {
      lo = lo.cwiseMin(c);
      hi = hi.cwiseMax(c);
    }
  }
  return box_corners(lo, hi);
}

BottomFace CompoundObject::union_bottom() const {
  if (members.empty()) throw Error(ErrorCode::EmptyInput, "compound has no members");
  const auto& first = members.front();
  Vec3 bottom_center = Vec3::Zero();
  for (const auto& b : first.object.bottom_vertices) bottom_center += first.relative.apply(b);
  bottom_center /= 4.0;
  Vec3 box_center = Vec3::Zero();
  for (const auto& c : first.object.bbox_corners) box_center += first.relative.apply(c);
  box_center /= 8.0;
  const Vec3 up = box_center - bottom_center;
  Eigen::Index axis = 0;
  up.cwiseAbs().maxCoeff(&axis);
  const bool at_min = up[axis] >= 0.0;

  const BoxCorners u = union_bbox();
  const double level = at_min ? u[0][axis] : u[7][axis];
  BottomFace face{};
  std::size_t n = 0;
  for (const auto& c : u) {
    if (c[axis] == level && n < 4) face[n++] = c;
  }
  return face;
}

Body CompoundObject::body() const { return {id, member_boxes(), union_bottom()}; }

bool CompoundObject::contains(const std::string& object_id) const {
  return std::any_of(members.begin(), members.end(),
                     [&](const CompoundMember& m) { return m.object.id == object_id; });
}

CompoundObject merge_objects(const SceneSolution& solution, std::span<const CompoundObject> parts) {
  if (parts.empty()) throw Error(ErrorCode::EmptyInput, "nothing to merge");
  auto pose_of = [&](const CompoundObject& c) -> const RigidTransform& {
    auto it = solution.transforms.find(c.id);
    if (it == solution.transforms.end()) {
      throw Error(ErrorCode::MissingTransform, "no solved transform for '" + c.id + "'");
    }
    return it->second;
  };
  const RigidTransform frame_inv = pose_of(parts[0]).inverse();
  CompoundObject out;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const CompoundObject& part = parts[p];
    const RigidTransform to_frame =
        p == 0 ? RigidTransform::identity() : frame_inv.compose(pose_of(part));
    for (const auto& m : part.members) {
      out.members.push_back({m.object, to_frame.compose(m.relative)});
    }
  }
  for (std::size_t i = 0; i < out.members.size(); ++i) {
    out.id += (i ? "+" : "") + out.members[i].object.id;
  }
  return out;
}

CompoundObject merge_objects(const SceneSolution& solution, std::span<const SceneObject> objects) {
  std::vector<CompoundObject> parts;
  for (const auto& o : objects) parts.push_back(CompoundObject::single(o));
  return merge_objects(solution, parts);
}

std::map<std::string, RigidTransform> decompose(const CompoundObject& compound,
                                                const RigidTransform& compound_transform) {
  std::map<std::string, RigidTransform> out;
  for (const auto& m : compound.members) {
    const RigidTransform t = compound_transform.compose(m.relative);
    out[m.object.id] = {t.rotation.canonical(), t.translation};
  }
  return out;
}

IterativeResult arrange_iterative(std::span<const SceneObject> objects,
                                  const std::string& first_object,
                                  std::span<const IterationSpec> steps,
                                  const ArrangeConfig& cfg) {
  std::map<std::string, const SceneObject*> by_id;
  for (const auto& o : objects) {
    o.validate();
    if (!by_id.emplace(o.id, &o).second) {
      throw Error(ErrorCode::InvalidInput, "duplicate object id '" + o.id + "'");
    }
  }
  auto first = by_id.find(first_object);
  if (first == by_id.end()) {
    throw Error(ErrorCode::InvalidInput, "unknown first object '" + first_object + "'");
  }

  IterativeResult result;
  result.compound = CompoundObject::single(*first->second);
  RigidTransform compound_pose = RigidTransform::identity();
  SceneSolution last;
  last.floor = initial_floor(std::vector<Body>{result.compound.body()},
                             std::vector<RigidTransform>{compound_pose});

  for (std::size_t s = 0; s < steps.size(); ++s) {
    const IterationSpec& step = steps[s];
    step.camera.validate();
    auto added = by_id.find(step.new_object);
    if (added == by_id.end()) {
      throw Error(ErrorCode::InvalidInput, "unknown object '" + step.new_object + "'");
    }
    if (result.compound.contains(step.new_object)) continue;

    // Compound correspondences re-expressed in the compound frame.
    std::vector<Correspondence> compound_corrs;
    for (const auto& m : result.compound.members) {
      auto it = step.correspondences.find(m.object.id);
      if (it == step.correspondences.end()) continue;
      for (Correspondence c : it->second) {
        c.object_point = m.relative.apply(c.object_point);
        compound_corrs.push_back(c);
      }
    }
    std::vector<Correspondence> new_corrs;
    if (auto it = step.correspondences.find(step.new_object); it != step.correspondences.end()) {
      new_corrs = it->second;
    }

    const Fitted fc = fit_one(step.camera, compound_corrs, cfg.ransac, 2 * s);
    const Fitted fn = fit_one(step.camera, new_corrs, cfg.ransac, 2 * s + 1);
    if (!fc.ok || !fn.ok || fc.score < cfg.neglect_threshold ||
        fn.score < cfg.neglect_threshold) {
      ++result.iterations_rejected;
      continue;
    }

    const CompoundObject incoming = CompoundObject::single(*added->second);
    const std::vector<Body> bodies{result.compound.body(), incoming.body()};
    const std::vector<RigidTransform> init{fc.ransac.pose, fn.ransac.pose};
    const std::vector<std::vector<Correspondence>> inliers{
        subset(compound_corrs, fc.ransac.inlier_indices),
        subset(new_corrs, fn.ransac.inlier_indices)};
    SceneSolution sol = optimize(step.camera, bodies, init, inliers, cfg.sipnp);

    const std::vector<CompoundObject> parts{result.compound, incoming};
    result.compound = merge_objects(sol, parts);
    compound_pose = sol.transforms.at(bodies[0].id);
    sol.matching_scores = last.matching_scores;
    for (const auto& m : parts[0].members) sol.matching_scores.try_emplace(m.object.id, fc.score);
    sol.matching_scores[step.new_object] = fn.score;
    sol.inliers.clear();
    sol.inliers[step.new_object] = fn.ransac.inlier_indices;
    last = std::move(sol);
    ++result.iterations_accepted;
  }

  result.solution.floor = last.floor;
  result.solution.loss_trace = last.loss_trace;
  result.solution.inliers = last.inliers;
  result.solution.matching_scores = last.matching_scores;
  result.solution.diverged = last.diverged;
  result.solution.selected_step = last.selected_step;
  result.solution.transforms = decompose(result.compound, compound_pose);
  for (const auto& o : objects) {
    if (!result.compound.contains(o.id)) result.solution.neglected.push_back(o.id);
  }
  return result;
}

std::map<std::string, RigidTransform> baseline_uniform(std::span<const SceneObject> objects,
                                                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(-2.0, 2.0);
  std::uniform_real_distribution<double> yaw_deg(-180.0, 180.0);
  std::map<std::string, RigidTransform> out;
  for (const auto& o : objects) {
    const double x = pos(rng);
    const double y = pos(rng);
    const double yaw = yaw_deg(rng) * std::numbers::pi / 180.0;
    out[o.id] = yaw_at(x, y, yaw);
  }
  return out;
}

std::map<std::string, RigidTransform> baseline_circular(std::span<const SceneObject> objects,
                                                        double radius) {
  if (!(radius > 0.0)) throw Error(ErrorCode::InvalidInput, "radius must be positive");
  std::map<std::string, RigidTransform> out;
  const auto n = static_cast<double>(objects.size());
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(i) / n;
    out[objects[i].id] =
        yaw_at(radius * std::cos(angle), radius * std::sin(angle), angle + std::numbers::pi);
  }
  return out;
}

}  // namespace layoutpnp
