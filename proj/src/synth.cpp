#include "layoutpnp/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>

namespace layoutpnp {
namespace {

constexpr int kPlacementAttempts = 1000;
constexpr int kCameraAttempts = 80;
constexpr double kPi = std::numbers::pi;

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double gaussian(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

std::vector<Vec3> sample_keypoints(Rng& rng, const Vec3& lo, const Vec3& hi, int n) {
  // Interior samples; resampled if the cloud is close to planar.
  std::vector<Vec3> pts(static_cast<std::size_t>(n));
  for (int attempt = 0; attempt < 16; ++attempt) {
    for (auto& p : pts) {
      p = Vec3(uniform(rng, lo.x(), hi.x()), uniform(rng, lo.y(), hi.y()),
               uniform(rng, lo.z(), hi.z()));
    }
    Vec3 mean = Vec3::Zero();
    for (const auto& p : pts) mean += p;
    mean /= static_cast<double>(n);
    Mat3 cov = Mat3::Zero();
    for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
    const Vec3 ev = Eigen::SelfAdjointEigenSolver<Mat3>(cov).eigenvalues();
    if (ev[0] > 0.05 * ev[2]) break;
  }
  return pts;
}

std::vector<Vec3> world_points(const SceneObject& o, const RigidTransform& tr) {
  std::vector<Vec3> out;
  for (const auto& c : o.bbox_corners) out.push_back(tr.apply(c));
  for (const auto& k : o.keypoints) out.push_back(tr.apply(k));
  return out;
}

// Backs the camera off along a fixed direction until every point projects
// inside the image with a margin.
RigidTransform fit_camera(const CameraIntrinsics& k, const std::vector<Vec3>& pts,
                          const Vec3& target, const Vec3& direction, double start_distance) {
  const double margin = 0.05 * k.image_height();
  double d = start_distance;
  for (int attempt = 0; attempt < kCameraAttempts; ++attempt, d *= 1.1) {
    const RigidTransform cam = look_at(target + d * direction, target);
    bool inside = true;
    for (const auto& p : pts) {
      const Vec3 c = cam.apply(p);
      if (c.z() < 0.1 * start_distance) {
        inside = false;
        break;
      }
      const PixelPoint px = project(k, cam, p);
      if (px.u < margin || px.u > k.image_width() - margin || px.v < margin ||
          px.v > k.image_height() - margin) {
        inside = false;
        break;
      }
    }
    if (inside) return cam;
  }
  throw Error(ErrorCode::PlacementFailure, "could not place a camera that sees every object");
}

Vec3 view_direction(double azimuth, double elevation) {
  return {std::cos(elevation) * std::cos(azimuth), std::cos(elevation) * std::sin(azimuth),
          std::sin(elevation)};
}

LabeledCorrespondences render(Rng& rng, const CameraIntrinsics& k, const RigidTransform& cam_obj,
                              const SceneObject& o, const SynthConfig& cfg, bool all_outliers) {
  const std::size_t n = o.keypoints.size();
  const std::size_t n_out =
      all_outliers ? n
                   : static_cast<std::size_t>(std::llround(cfg.outlier_fraction * static_cast<double>(n)));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<bool> outlier(n, false);
  for (std::size_t i = 0; i < n_out; ++i) outlier[perm[i]] = true;

  const double exclusion = std::max(5.0 * cfg.noise_sigma_px, 0.05 * k.image_diagonal());
  LabeledCorrespondences out;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& p = o.keypoints[i];
    const PixelPoint truth = project(k, cam_obj, p);
    Correspondence c;
    c.object_point = p;
    if (!outlier[i]) {
      c.image_point = {truth.u + cfg.noise_sigma_px * gaussian(rng),
                       truth.v + cfg.noise_sigma_px * gaussian(rng)};
      c.similarity = std::clamp(cfg.inlier_similarity + cfg.similarity_jitter * gaussian(rng), -1.0, 1.0);
    } else {
      PixelPoint px;
      for (int attempt = 0; attempt < 1000; ++attempt) {
        px = {uniform(rng, 0.0, k.image_width()), uniform(rng, 0.0, k.image_height())};
        if (std::hypot(px.u - truth.u, px.v - truth.v) > exclusion) break;
      }
      c.image_point = px;
      c.similarity = uniform(rng, cfg.outlier_similarity_lo, cfg.outlier_similarity_hi);
    }
    out.matches.push_back(c);
    out.is_inlier.push_back(!outlier[i]);
  }
  return out;
}

SceneObject cube(const std::string& id, double side, Rng& rng, int keypoints) {
  const Vec3 lo(-side / 2, -side / 2, 0.0);
  const Vec3 hi(side / 2, side / 2, side);
  return SceneObject::from_extent(id, lo, hi, sample_keypoints(rng, lo, hi, keypoints));
}

}  // namespace

void SynthConfig::validate() const {
  if (n_objects < 0 || keypoints_per_object < 8 || !(noise_sigma_px >= 0.0) ||
      !(outlier_fraction >= 0.0 && outlier_fraction < 1.0) || !(scene_extent > 0.0) ||
      !(image_width > 0.0) || !(image_height > 0.0) ||
      !(vertical_fov_deg > 0.0 && vertical_fov_deg < 180.0) ||
      !(outlier_similarity_lo <= outlier_similarity_hi)) {
    throw Error(ErrorCode::InvalidInput, "invalid synthetic scene configuration");
  }
  for (int i : neglected_objects) {
    if (i < 0 || i >= n_objects) throw Error(ErrorCode::InvalidInput, "neglected object index out of range");
  }
}

std::size_t LabeledCorrespondences::outlier_count() const {
  return static_cast<std::size_t>(std::count(is_inlier.begin(), is_inlier.end(), false));
}

RigidTransform GroundTruthScene::camera_transform(const std::string& id) const {
  return camera_from_world.compose(true_transforms.at(id));
}

std::vector<RigidTransform> GroundTruthScene::camera_transforms() const {
  std::vector<RigidTransform> out;
  for (const auto& o : objects) out.push_back(camera_transform(o.id));
  return out;
}

SceneSpec GroundTruthScene::to_spec() const {
  SceneSpec spec;
  spec.description = "synthetic scene";
  spec.objects = objects;
  spec.camera = camera;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    spec.correspondences[objects[i].id] = correspondences[i].matches;
  }
  return spec;
}

RigidTransform look_at(const Vec3& eye, const Vec3& target, const Vec3& world_up) {
  const Vec3 z = (target - eye).normalized();
  Vec3 x = z.cross(world_up);
  if (x.norm() < 1e-9) x = z.cross(Vec3::UnitY());
  x.normalize();
  const Vec3 y = z.cross(x);
  Mat3 r;
  r.row(0) = x.transpose();
  r.row(1) = y.transpose();
  r.row(2) = z.transpose();
  return {matrix_to_quat(r), -(r * eye)};
}

Vec3 camera_center(const RigidTransform& camera_from_world) {
  return camera_from_world.inverse().translation;
}

GroundTruthScene generate_scene(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  GroundTruthScene scene;
  scene.scene_extent = cfg.scene_extent;
  scene.camera = CameraIntrinsics::from_fov(cfg.image_width, cfg.image_height, cfg.vertical_fov_deg);

  const double e = cfg.scene_extent;
  std::vector<BoxCorners> placed;
  const Vec3 pad = Vec3::Constant(0.1 * e);
  for (int i = 0; i < cfg.n_objects; ++i) {
    const Vec3 size(uniform(rng, 0.15, 0.3) * e, uniform(rng, 0.15, 0.3) * e,
                    uniform(rng, 0.15, 0.3) * e);
    const Vec3 lo(-size.x() / 2, -size.y() / 2, 0.0);
    const Vec3 hi(size.x() / 2, size.y() / 2, size.z());
    SceneObject o = SceneObject::from_extent("obj" + std::to_string(i), lo, hi,
                                             sample_keypoints(rng, lo, hi, cfg.keypoints_per_object));
    bool ok = false;
    RigidTransform pose;
    for (int attempt = 0; attempt < kPlacementAttempts && !ok; ++attempt) {
      const double x = uniform(rng, -e / 2, e / 2);
      const double y = uniform(rng, -e / 2, e / 2);
      const double yaw = uniform(rng, -kPi, kPi);
      const double z = cfg.place_on_floor ? 0.0 : uniform(rng, 0.0, 0.25 * e);
      pose = {UnitQuaternion::from_axis_angle(Vec3::UnitZ(), yaw), Vec3(x, y, z)};
      const BoxCorners world = transform_box(pose, o.bbox_corners);
      const BoxCorners padded = transform_box(pose, box_corners(lo - pad, hi + pad));
      ok = cfg.allow_collisions ||
           std::all_of(placed.begin(), placed.end(),
                       [&](const BoxCorners& b) { return bbox_iou_3d(b, padded) == 0.0; });
      if (ok) placed.push_back(world);
    }
    if (!ok) throw Error(ErrorCode::PlacementFailure, "could not place object " + o.id);
    scene.true_transforms[o.id] = pose;
    scene.objects.push_back(std::move(o));
  }

  std::vector<Vec3> pts;
  Vec3 target = Vec3::Zero();
  for (const auto& o : scene.objects) {
    const auto wp = world_points(o, scene.true_transforms[o.id]);
    pts.insert(pts.end(), wp.begin(), wp.end());
    for (const auto& c : o.bbox_corners) target += scene.true_transforms[o.id].apply(c) / 8.0;
  }
  if (!scene.objects.empty()) target /= static_cast<double>(scene.objects.size());
  // Box overlap is measured on axis-aligned hulls in the camera frame, so a
  // layout that is clear in the world frame may still touch there.
  bool clear = false;
  for (int attempt = 0; attempt < kCameraAttempts && !clear; ++attempt) {
    const double azimuth = uniform(rng, -kPi, kPi);
    scene.camera_from_world =
        fit_camera(scene.camera, pts, target,
                   view_direction(azimuth, cfg.camera_elevation_deg * kPi / 180.0), e);
    clear = cfg.allow_collisions ||
            collision_loss(scene.objects, scene.camera_transforms()) == 0.0;
  }
  if (!clear) throw Error(ErrorCode::PlacementFailure, "no camera keeps the objects apart");

  for (int i = 0; i < cfg.n_objects; ++i) {
    const auto& o = scene.objects[static_cast<std::size_t>(i)];
    const bool neglected = std::find(cfg.neglected_objects.begin(), cfg.neglected_objects.end(),
                                     i) != cfg.neglected_objects.end();
    scene.correspondences.push_back(
        render(rng, scene.camera, scene.camera_transform(o.id), o, cfg, neglected));
  }
  return scene;
}

PoseError pose_error(const RigidTransform& truth, const RigidTransform& estimate) {
  return {rotation_angle_between(truth.rotation, estimate.rotation) * 180.0 / kPi,
          (truth.translation - estimate.translation).norm()};
}

void rescale_in_image(GroundTruthScene& scene, std::size_t object_index, double image_scale) {
  const auto& o = scene.objects.at(object_index);
  const RigidTransform cam_obj = scene.camera_transform(o.id);
  auto& lc = scene.correspondences.at(object_index);
  for (std::size_t i = 0; i < lc.matches.size(); ++i) {
    if (!lc.is_inlier[i]) continue;
    lc.matches[i].image_point = project(scene.camera, cam_obj, Vec3(image_scale * lc.matches[i].object_point));
  }
}

double scale_for_height_offset(const GroundTruthScene& scene, std::size_t object_index,
                               double height_offset) {
  const Vec3 c = camera_center(scene.camera_from_world);
  const Vec3 o = scene.true_transforms.at(scene.objects.at(object_index).id).translation;
  const double rel = o.z() - c.z();
  return rel / (rel + height_offset);
}

GroundTruthScene floating_pair_scene(double height_offset, std::uint64_t seed) {
  Rng rng(seed);
  GroundTruthScene scene;
  scene.scene_extent = 2.0;
  scene.camera = CameraIntrinsics::from_fov(640.0, 480.0, 60.0);
  const double side = 0.8;
  for (int i = 0; i < 2; ++i) {
    SceneObject o = cube("obj" + std::to_string(i), side, rng, 100);
    const double yaw = uniform(rng, -0.15, 0.15);
    scene.true_transforms[o.id] = {UnitQuaternion::from_axis_angle(Vec3::UnitZ(), yaw),
                                   Vec3(i == 0 ? -0.5 : 0.5, 0.0, 0.0)};
    scene.objects.push_back(std::move(o));
  }
  std::vector<Vec3> pts;
  for (const auto& o : scene.objects) {
    const auto wp = world_points(o, scene.true_transforms[o.id]);
    pts.insert(pts.end(), wp.begin(), wp.end());
  }
  const double azimuth = -kPi / 2 + uniform(rng, -0.3, 0.3);
  scene.camera_from_world = fit_camera(scene.camera, pts, Vec3(0.0, 0.0, 0.4),
                                       view_direction(azimuth, 30.0 * kPi / 180.0), 5.0);
  SynthConfig exact;
  for (const auto& o : scene.objects) {
    scene.correspondences.push_back(
        render(rng, scene.camera, scene.camera_transform(o.id), o, exact, false));
  }
  rescale_in_image(scene, 1, scale_for_height_offset(scene, 1, height_offset));
  return scene;
}

GroundTruthScene overlapping_pair_scene(double target_iou, std::uint64_t seed) {
  Rng rng(seed);
  GroundTruthScene scene;
  scene.scene_extent = 2.0;
  scene.camera = CameraIntrinsics::from_fov(640.0, 480.0, 60.0);
  const double side = 0.8;
  // Equal axis-aligned cubes shifted by delta along y: IOU = (L - d) / (L + d).
  const double delta = side * (1.0 - target_iou) / (1.0 + target_iou);
  for (int i = 0; i < 2; ++i) {
    SceneObject o = cube("obj" + std::to_string(i), side, rng, 100);
    scene.true_transforms[o.id] = RigidTransform::from_translation(
        Vec3(0.0, i == 0 ? -delta / 2 : delta / 2, 0.0));
    scene.objects.push_back(std::move(o));
  }
  // Camera at floor height looking along +y: sliding an object along its
  // viewing ray keeps its bottom on the floor and barely changes the image.
  scene.camera_from_world = look_at(Vec3(0.0, -8.0, 0.0), Vec3(0.0, 0.0, 0.0));
  SynthConfig exact;
  for (const auto& o : scene.objects) {
    scene.correspondences.push_back(
        render(rng, scene.camera, scene.camera_transform(o.id), o, exact, false));
  }
  return scene;
}

std::vector<IterationSpec> generate_iterative_steps(const GroundTruthScene& scene,
                                                    std::span<const std::size_t> order,
                                                    const SynthConfig& cfg) {
  Rng rng(cfg.seed ^ 0x5eed5eed5eed5eedULL);
  std::vector<IterationSpec> steps;
  for (std::size_t k = 1; k < order.size(); ++k) {
    std::vector<Vec3> pts;
    Vec3 target = Vec3::Zero();
    for (std::size_t j = 0; j <= k; ++j) {
      const auto& o = scene.objects.at(order[j]);
      const auto wp = world_points(o, scene.true_transforms.at(o.id));
      pts.insert(pts.end(), wp.begin(), wp.end());
      for (const auto& c : o.bbox_corners) target += scene.true_transforms.at(o.id).apply(c) / 8.0;
    }
    target /= static_cast<double>(k + 1);
    std::vector<SceneObject> visible;
    for (std::size_t j = 0; j <= k; ++j) visible.push_back(scene.objects.at(order[j]));
    RigidTransform cam;
    bool clear = false;
    for (int attempt = 0; attempt < kCameraAttempts && !clear; ++attempt) {
      const double azimuth = uniform(rng, -kPi, kPi);
      cam = fit_camera(scene.camera, pts, target,
                       view_direction(azimuth, cfg.camera_elevation_deg * kPi / 180.0),
                       scene.scene_extent);
      std::vector<RigidTransform> poses;
      for (const auto& o : visible) poses.push_back(cam.compose(scene.true_transforms.at(o.id)));
      clear = cfg.allow_collisions || collision_loss(visible, poses) == 0.0;
    }
    if (!clear) throw Error(ErrorCode::PlacementFailure, "no camera keeps the objects apart");
    IterationSpec step;
    step.camera = scene.camera;
    step.new_object = scene.objects.at(order[k]).id;
    for (std::size_t j = 0; j <= k; ++j) {
      const auto& o = scene.objects.at(order[j]);
      step.correspondences[o.id] =
          render(rng, scene.camera, cam.compose(scene.true_transforms.at(o.id)), o, cfg, false).matches;
    }
    steps.push_back(std::move(step));
  }
  return steps;
}

PlantedDescriptors planted_descriptors(std::span<const Vec3> object_points,
                                       std::span<const PixelPoint> pixels, int dimension,
                                       int distractors, double planted_similarity,
                                       std::uint64_t seed) {
  if (object_points.size() != pixels.size() || dimension < 2) {
    throw Error(ErrorCode::InvalidInput, "planted descriptors need matching inputs and dimension >= 2");
  }
  Rng rng(seed);
  auto random_unit = [&]() {
    Eigen::VectorXd v(dimension);
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = gaussian(rng);
    return Eigen::VectorXd(v.normalized());
  };
  auto to_floats = [](const Eigen::VectorXd& v, double scale) {
    std::vector<float> f(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) f[static_cast<std::size_t>(i)] = static_cast<float>(scale * v[i]);
    return f;
  };

  PlantedDescriptors out;
  std::vector<DescriptorEntry> scene_entries;
  for (std::size_t i = 0; i < object_points.size(); ++i) {
    const Eigen::VectorXd r = random_unit();
    Eigen::VectorXd noise = random_unit();
    noise -= r * r.dot(noise);
    noise.normalize();
    const Eigen::VectorXd twin =
        planted_similarity * r + std::sqrt(std::max(0.0, 1.0 - planted_similarity * planted_similarity)) * noise;
    const PixelPoint render_px{static_cast<double>(i % 64), static_cast<double>(i / 64)};
    out.render.entries.push_back({render_px, object_points[i], true, to_floats(r, 1.0 + uniform(rng, 0.0, 2.0))});
    scene_entries.push_back({pixels[i], std::nullopt, true, to_floats(twin, 1.0)});
  }
  for (int j = 0; j < distractors; ++j) {
    const PixelPoint px{uniform(rng, 0.0, 640.0), uniform(rng, 0.0, 480.0)};
    scene_entries.push_back({px, std::nullopt, true, to_floats(random_unit(), 1.0)});
  }
  std::vector<std::size_t> perm(scene_entries.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  out.twin_of.assign(object_points.size(), 0);
  out.scene.entries.resize(scene_entries.size());
  for (std::size_t pos = 0; pos < perm.size(); ++pos) {
    out.scene.entries[pos] = scene_entries[perm[pos]];
    if (perm[pos] < object_points.size()) out.twin_of[perm[pos]] = pos;
  }
  return out;
}

}  // namespace layoutpnp
