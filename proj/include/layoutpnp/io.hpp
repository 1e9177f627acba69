#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "layoutpnp/arrange.hpp"
#include "layoutpnp/matching.hpp"
#include "layoutpnp/sipnp.hpp"

namespace layoutpnp {

inline constexpr const char* kFormatVersion = "1";

struct IterativeManifest {
  std::string first_object;
  std::vector<IterationSpec> steps;
};

// Scene document. Descriptor maps live in binary sidecars whose paths are
// kept relative to the scene file.
struct SceneFile {
  SceneSpec spec;
  std::map<std::string, std::vector<std::string>> render_descriptor_files;
  std::optional<std::string> scene_descriptor_file;
  std::map<std::string, RigidTransform> ground_truth;
  std::optional<IterativeManifest> iterative;
};

// Ground truth written next to a synthetic scene.
struct TruthFile {
  double scene_extent = 1.0;
  RigidTransform camera_from_world;
  std::map<std::string, RigidTransform> world_transforms;
  std::map<std::string, RigidTransform> camera_transforms;
  std::map<std::string, std::vector<bool>> inlier_labels;
};

// Text forms. Parsing validates the schema and throws SchemaError with the
// offending field; unknown fields are ignored.
std::string dump_scene(const SceneFile& scene);
SceneFile parse_scene(const std::string& text);
std::string dump_solution(const SceneSolution& solution);
SceneSolution parse_solution(const std::string& text);
std::string dump_truth(const TruthFile& truth);
TruthFile parse_truth(const std::string& text);

// File forms. read_scene_file also loads every referenced descriptor map,
// resolving paths against the scene file's directory.
SceneFile read_scene_file(const std::filesystem::path& path);
void write_scene_file(const std::filesystem::path& path, const SceneFile& scene);
SceneSolution read_solution_file(const std::filesystem::path& path);
void write_solution_file(const std::filesystem::path& path, const SceneSolution& solution);
TruthFile read_truth_file(const std::filesystem::path& path);
void write_truth_file(const std::filesystem::path& path, const TruthFile& truth);

// Flat little-endian sidecar: "LPDM", u32 version, u64 count, u32 dimension,
// then per entry f64 u, f64 v, u8 flags (1 = foreground, 2 = has point),
// f64 x, y, z, and `dimension` f32 components.
void write_descriptor_map(const std::filesystem::path& path, const DescriptorMap& map);
DescriptorMap read_descriptor_map(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace layoutpnp
