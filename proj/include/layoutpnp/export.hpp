#pragma once

#include <span>
#include <string>
#include <vector>

#include "layoutpnp/geom.hpp"
#include "layoutpnp/sipnp.hpp"

namespace layoutpnp {

// Wavefront OBJ: one group per placed object holding its transformed box
// (and its mesh when the object references one), then a floor quad.
// Objects without a transform are skipped. Throws IoError for a mesh that
// cannot be read.
std::string export_obj(std::span<const SceneObject> objects, const SceneSolution& solution);

// SVG with two panels: an orthographic view looking down the floor normal
// and the camera's perspective view. Each placed object is one polygon per
// panel, colored by a hash of its id.
std::string export_svg(std::span<const SceneObject> objects, const SceneSolution& solution,
                       const CameraIntrinsics& camera);

// Stable "#rrggbb" color for an id.
std::string id_color(const std::string& id);

// Minimal OBJ reader: vertex positions and polygon faces (1-based or
// negative indices, texture/normal references ignored).
struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::vector<std::size_t>> faces;
};
Mesh read_obj_mesh(const std::string& path);

}  // namespace layoutpnp
