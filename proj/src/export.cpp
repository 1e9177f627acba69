#include "layoutpnp/export.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace layoutpnp {
namespace {

struct Placed {
  const SceneObject* object;
  RigidTransform pose;
  BoxCorners corners;
};

std::vector<Placed> placed_objects(std::span<const SceneObject> objects, const SceneSolution& sol) {
  std::vector<Placed> out;
  for (const auto& o : objects) {
    auto it = sol.transforms.find(o.id);
    if (it == sol.transforms.end()) continue;
    out.push_back({&o, it->second, transform_box(it->second, o.bbox_corners)});
  }
  return out;
}

std::string num(double v, const char* fmt) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v == 0.0 ? 0.0 : v);
  return buf;
}

std::string obj_num(double v) { return num(v, "%.17g"); }
std::string svg_num(double v) { return num(v, "%.3f"); }

// In-plane frame of the floor: origin under the objects, `right` following
// the camera x axis and `forward` the camera viewing direction.
struct FloorFrame {
  Vec3 origin;
  Vec3 right;
  Vec3 forward;
  double half_right = 1.0;
  double half_forward = 1.0;

  Eigen::Vector2d coords(const Vec3& p) const {
    return {(p - origin).dot(right), (p - origin).dot(forward)};
  }
  Vec3 point(double a, double b) const { return origin + a * right + b * forward; }
  std::array<Vec3, 4> quad() const {
    return {point(-half_right, -half_forward), point(half_right, -half_forward),
            point(half_right, half_forward), point(-half_right, half_forward)};
  }
};

FloorFrame floor_frame(const std::vector<Placed>& placed, const Plane& floor) {
  const Vec3 n = floor.normal();
  FloorFrame f;
  Vec3 fwd = Vec3::UnitZ() - n * n.dot(Vec3::UnitZ());
  if (fwd.norm() < 1e-6) fwd = Vec3::UnitY() - n * n.dot(Vec3::UnitY());
  f.forward = fwd.normalized();
  f.right = f.forward.cross(n).normalized();
  if (f.right.x() < 0.0) f.right = -f.right;

  Vec3 centroid = Vec3::Zero();
  std::size_t count = 0;
  for (const auto& p : placed) {
    for (const auto& b : p.object->bottom_vertices) {
      centroid += p.pose.apply(b);
      ++count;
    }
  }
  if (count > 0) centroid /= static_cast<double>(count);
  f.origin = centroid - n * (n.dot(centroid) + floor.offset());

  double hr = 0.0, hf = 0.0;
  for (const auto& p : placed) {
    for (const auto& c : p.corners) {
      const Eigen::Vector2d ab = f.coords(c);
      hr = std::max(hr, std::abs(ab.x()));
      hf = std::max(hf, std::abs(ab.y()));
    }
  }
  f.half_right = std::max(0.5, 1.2 * hr);
  f.half_forward = std::max(0.5, 1.2 * hf);
  return f;
}

std::vector<Eigen::Vector2d> convex_hull(std::vector<Eigen::Vector2d> pts) {
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  if (pts.size() < 3) return pts;
  auto cross = [](const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<Eigen::Vector2d> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

std::string polygon(const std::vector<Eigen::Vector2d>& pts, const std::string& attrs) {
  std::string s = "<polygon " + attrs + " points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i) s += ' ';
    s += svg_num(pts[i].x()) + "," + svg_num(pts[i].y());
  }
  return s + "\"/>\n";
}

Eigen::Vector2d project_clamped(const CameraIntrinsics& k, const Vec3& p) {
  const double z = std::max(p.z(), 1e-3);
  return {(k.fx * p.x() + k.skew * p.y()) / z + k.cx, k.fy * p.y() / z + k.cy};
}

}  // namespace

std::string id_color(const std::string& id) {
  std::uint32_t h = 2166136261u;
  for (unsigned char c : id) {
    h ^= c;
    h *= 16777619u;
  }
  // Hue from the hash at fixed saturation and lightness.
  const double hue = static_cast<double>(h % 360u);
  const double s = 0.65, l = 0.5;
  const double c = (1.0 - std::abs(2.0 * l - 1.0)) * s;
  const double x = c * (1.0 - std::abs(std::fmod(hue / 60.0, 2.0) - 1.0));
  const double m = l - c / 2.0;
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hue / 60.0)) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(std::lround((r + m) * 255)),
                static_cast<int>(std::lround((g + m) * 255)), static_cast<int>(std::lround((b + m) * 255)));
  return buf;
}

Mesh read_obj_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open mesh '" + path + "'");
  Mesh mesh;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v.x() >> v.y() >> v.z())) throw Error(ErrorCode::IoError, "bad vertex in '" + path + "'");
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<std::size_t> face;
      std::string ref;
      while (ls >> ref) {
        const long idx = std::stol(ref.substr(0, ref.find('/')));
        const long n = static_cast<long>(mesh.vertices.size());
        const long resolved = idx < 0 ? n + idx : idx - 1;
        if (idx == 0 || resolved < 0 || resolved >= n) {
          throw Error(ErrorCode::IoError, "face index out of range in '" + path + "'");
        }
        face.push_back(static_cast<std::size_t>(resolved));
      }
      if (face.size() >= 3) mesh.faces.push_back(std::move(face));
    }
  }
  return mesh;
}

std::string export_obj(std::span<const SceneObject> objects, const SceneSolution& solution) {
  const auto placed = placed_objects(objects, solution);
  std::string out = "# layoutpnp scene export\n";
  std::size_t base = 1;
  auto vertex = [&](const Vec3& p) {
    out += "v " + obj_num(p.x()) + " " + obj_num(p.y()) + " " + obj_num(p.z()) + "\n";
  };
  static constexpr int kFaces[6][4] = {{0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4},
                                       {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5}};
  for (const auto& p : placed) {
    out += "g " + p.object->id + "\n";
    for (const auto& c : p.corners) vertex(c);
    for (const auto& f : kFaces) {
      out += "f";
      for (int i : f) out += " " + std::to_string(base + static_cast<std::size_t>(i));
      out += "\n";
    }
    base += 8;
    if (p.object->mesh_path) {
      const Mesh mesh = read_obj_mesh(*p.object->mesh_path);
      out += "g " + p.object->id + "_mesh\n";
      for (const auto& v : mesh.vertices) vertex(p.pose.apply(v));
      for (const auto& f : mesh.faces) {
        out += "f";
        for (std::size_t i : f) out += " " + std::to_string(base + i);
        out += "\n";
      }
      base += mesh.vertices.size();
    }
  }
  const FloorFrame frame = floor_frame(placed, solution.floor);
  out += "g floor\n";
  for (const auto& c : frame.quad()) vertex(c);
  out += "f " + std::to_string(base) + " " + std::to_string(base + 1) + " " +
         std::to_string(base + 2) + " " + std::to_string(base + 3) + "\n";
  return out;
}

std::string export_svg(std::span<const SceneObject> objects, const SceneSolution& solution,
                       const CameraIntrinsics& camera) {
  const auto placed = placed_objects(objects, solution);
  const FloorFrame frame = floor_frame(placed, solution.floor);
  const double w = camera.image_width();
  const double h = camera.image_height();
  const double gap = 20.0;

  // Top view: floor coordinates scaled into a w x h panel, far side up.
  const double scale = 0.9 * std::min(w / (2 * frame.half_right), h / (2 * frame.half_forward));
  auto top = [&](const Vec3& p) {
    const Eigen::Vector2d ab = frame.coords(p);
    return Eigen::Vector2d(w / 2 + scale * ab.x(), h / 2 - scale * ab.y());
  };

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + svg_num(2 * w + gap) +
                  "\" height=\"" + svg_num(h) + "\" viewBox=\"0 0 " + svg_num(2 * w + gap) + " " +
                  svg_num(h) + "\">\n";
  const auto quad = frame.quad();

  s += "<g id=\"top-view\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"" + svg_num(w) + "\" height=\"" + svg_num(h) +
       "\" fill=\"white\" stroke=\"black\"/>\n";
  {
    std::vector<Eigen::Vector2d> fq;
    for (const auto& c : quad) fq.push_back(top(c));
    s += polygon(fq, "class=\"floor\" fill=\"#dddddd\" stroke=\"#999999\"");
  }
  for (const auto& p : placed) {
    std::vector<Eigen::Vector2d> pts;
    for (const auto& c : p.corners) pts.push_back(top(c));
    s += polygon(convex_hull(pts), "class=\"object\" data-id=\"" + p.object->id + "\" fill=\"" +
                                       id_color(p.object->id) + "\" fill-opacity=\"0.7\" stroke=\"black\"");
  }
  s += "</g>\n";

  s += "<g id=\"camera-view\" transform=\"translate(" + svg_num(w + gap) + ",0)\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"" + svg_num(w) + "\" height=\"" + svg_num(h) +
       "\" fill=\"white\" stroke=\"black\"/>\n";
  {
    std::vector<Eigen::Vector2d> fq;
    for (const auto& c : quad) fq.push_back(project_clamped(camera, c));
    s += polygon(fq, "class=\"floor\" fill=\"#dddddd\" stroke=\"#999999\"");
  }
  // Far objects first so nearer ones paint over them.
  std::vector<const Placed*> order;
  for (const auto& p : placed) order.push_back(&p);
  std::stable_sort(order.begin(), order.end(), [](const Placed* a, const Placed* b) {
    return a->pose.translation.z() > b->pose.translation.z();
  });
  for (const Placed* p : order) {
    std::vector<Eigen::Vector2d> pts;
    for (const auto& c : p->corners) pts.push_back(project_clamped(camera, c));
    s += polygon(convex_hull(pts), "class=\"object\" data-id=\"" + p->object->id + "\" fill=\"" +
                                       id_color(p->object->id) + "\" fill-opacity=\"0.7\" stroke=\"black\"");
  }
  s += "</g>\n</svg>\n";
  return s;
}

}  // namespace layoutpnp
