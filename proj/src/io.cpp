#include "layoutpnp/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace layoutpnp {
namespace {

using nlohmann::json;

[[noreturn]] void schema_error(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::SchemaError, where + ": " + what);
}

const json& field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object()) schema_error(where, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) schema_error(where, std::string("missing field '") + key + "'");
  return *it;
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) schema_error(where, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) schema_error(where, "expected a finite number");
  return v;
}

std::string text(const json& j, const std::string& where) {
  if (!j.is_string()) schema_error(where, "expected a string");
  return j.get<std::string>();
}

template <int N>
Eigen::Matrix<double, N, 1> vec(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != N) {
    schema_error(where, "expected an array of " + std::to_string(N) + " numbers");
  }
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) v[i] = number(j[static_cast<std::size_t>(i)], where);
  return v;
}

const json& array(const json& j, const std::string& where) {
  if (!j.is_array()) schema_error(where, "expected an array");
  return j;
}

json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json to_json(const RigidTransform& tr) {
  const UnitQuaternion q = tr.rotation.canonical();
  return {{"rotation", json::array({q.w(), q.x(), q.y(), q.z()})},
          {"translation", to_json(tr.translation)}};
}

RigidTransform transform_from(const json& j, const std::string& where) {
  const Vec4 q = vec<4>(field(j, "rotation", where), where + ".rotation");
  if (std::abs(q.norm() - 1.0) > kTolerances.quaternion_input) {
    schema_error(where + ".rotation", "quaternion is not unit length");
  }
  return {UnitQuaternion(q[0], q[1], q[2], q[3]),
          vec<3>(field(j, "translation", where), where + ".translation")};
}

json to_json(const CameraIntrinsics& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"skew", k.skew}};
}

CameraIntrinsics camera_from(const json& j, const std::string& where) {
  CameraIntrinsics k;
  k.fx = number(field(j, "fx", where), where + ".fx");
  k.fy = number(field(j, "fy", where), where + ".fy");
  k.cx = number(field(j, "cx", where), where + ".cx");
  k.cy = number(field(j, "cy", where), where + ".cy");
  if (j.contains("skew")) k.skew = number(j["skew"], where + ".skew");
  try {
    k.validate();
  } catch (const Error& e) {
    schema_error(where, e.what());
  }
  return k;
}

json to_json(const std::vector<Correspondence>& corrs) {
  json out = json::array();
  for (const auto& c : corrs) {
    out.push_back({{"object_point", to_json(c.object_point)},
                   {"image_point", json::array({c.image_point.u, c.image_point.v})},
                   {"similarity", c.similarity}});
  }
  return out;
}

std::vector<Correspondence> correspondences_from(const json& j, const std::string& where) {
  std::vector<Correspondence> out;
  std::size_t i = 0;
  for (const auto& c : array(j, where)) {
    const std::string w = where + "[" + std::to_string(i++) + "]";
    Correspondence corr;
    corr.object_point = vec<3>(field(c, "object_point", w), w + ".object_point");
    const Eigen::Vector2d px = vec<2>(field(c, "image_point", w), w + ".image_point");
    corr.image_point = {px.x(), px.y()};
    if (c.contains("similarity")) corr.similarity = number(c["similarity"], w + ".similarity");
    out.push_back(corr);
  }
  return out;
}

json to_json(const std::map<std::string, RigidTransform>& transforms) {
  json out = json::object();
  for (const auto& [id, tr] : transforms) out[id] = to_json(tr);
  return out;
}

std::map<std::string, RigidTransform> transforms_from(const json& j, const std::string& where) {
  if (!j.is_object()) schema_error(where, "expected an object keyed by id");
  std::map<std::string, RigidTransform> out;
  for (const auto& [id, tr] : j.items()) out[id] = transform_from(tr, where + "." + id);
  return out;
}

json object_to_json(const SceneObject& o) {
  json kp = json::array();
  for (const auto& p : o.keypoints) kp.push_back(to_json(p));
  json corners = json::array();
  for (const auto& c : o.bbox_corners) corners.push_back(to_json(c));
  json bottom = json::array();
  for (const auto& b : o.bottom_vertices) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < 8; ++c) {
      if ((o.bbox_corners[c] - b).norm() < (o.bbox_corners[best] - b).norm()) best = c;
    }
    bottom.push_back(best);
  }
  json out = {{"id", o.id}, {"keypoints", kp}, {"bbox_corners", corners},
              {"bottom_vertex_indices", bottom}};
  if (o.mesh_path) out["mesh"] = *o.mesh_path;
  return out;
}

SceneObject object_from(const json& j, const std::string& where) {
  SceneObject o;
  o.id = text(field(j, "id", where), where + ".id");
  const std::string w = where + "(" + o.id + ")";
  for (const auto& p : array(field(j, "keypoints", w), w + ".keypoints")) {
    o.keypoints.push_back(vec<3>(p, w + ".keypoints"));
  }
  const json& corners = array(field(j, "bbox_corners", w), w + ".bbox_corners");
  if (corners.size() != 8) schema_error(w + ".bbox_corners", "expected 8 corners");
  for (std::size_t c = 0; c < 8; ++c) o.bbox_corners[c] = vec<3>(corners[c], w + ".bbox_corners");
  const json& bottom = array(field(j, "bottom_vertex_indices", w), w + ".bottom_vertex_indices");
  if (bottom.size() != 4) schema_error(w + ".bottom_vertex_indices", "expected 4 indices");
  for (std::size_t b = 0; b < 4; ++b) {
    if (!bottom[b].is_number_integer() || bottom[b].get<int>() < 0 || bottom[b].get<int>() > 7) {
      schema_error(w + ".bottom_vertex_indices", "expected indices in 0..7");
    }
    o.bottom_vertices[b] = o.bbox_corners[bottom[b].get<std::size_t>()];
  }
  if (j.contains("mesh")) o.mesh_path = text(j["mesh"], w + ".mesh");
  try {
    o.validate();
  } catch (const Error& e) {
    schema_error(w, e.what());
  }
  return o;
}

json parse_json(const std::string& text_in, const std::string& what) {
  json j;
  try {
    j = json::parse(text_in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SchemaError, what + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) schema_error(what, "expected a JSON object");
  const std::string v = text(field(j, "version", what), what + ".version");
  if (v != kFormatVersion) schema_error(what + ".version", "unsupported version '" + v + "'");
  return j;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

template <typename T>
void put(std::string& buf, T value) {
  static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  buf.append(bytes, sizeof(T));
}

template <typename T>
T take(const std::string& buf, std::size_t& pos, const std::string& where) {
  if (pos + sizeof(T) > buf.size()) throw Error(ErrorCode::SchemaError, where + ": truncated descriptor file");
  char bytes[sizeof(T)];
  std::memcpy(bytes, buf.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  pos += sizeof(T);
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

constexpr char kMagic[4] = {'L', 'P', 'D', 'M'};
constexpr std::uint32_t kDescriptorVersion = 1;

}  // namespace

std::string dump_scene(const SceneFile& scene) {
  const SceneSpec& s = scene.spec;
  json j = {{"version", kFormatVersion}, {"description", s.description}, {"camera", to_json(s.camera)}};
  json objects = json::array();
  for (const auto& o : s.objects) {
    json jo = object_to_json(o);
    if (auto it = s.correspondences.find(o.id); it != s.correspondences.end()) {
      jo["correspondences"] = to_json(it->second);
    }
    if (auto it = scene.render_descriptor_files.find(o.id); it != scene.render_descriptor_files.end()) {
      jo["render_descriptors"] = it->second;
    }
    objects.push_back(jo);
  }
  j["objects"] = objects;
  if (scene.scene_descriptor_file) j["scene_descriptors"] = *scene.scene_descriptor_file;
  if (!scene.ground_truth.empty()) j["ground_truth"] = to_json(scene.ground_truth);
  if (scene.iterative) {
    json steps = json::array();
    for (const auto& st : scene.iterative->steps) {
      json corrs = json::object();
      for (const auto& [id, c] : st.correspondences) corrs[id] = to_json(c);
      steps.push_back({{"camera", to_json(st.camera)}, {"new_object", st.new_object},
                       {"correspondences", corrs}});
    }
    j["iterative"] = {{"first_object", scene.iterative->first_object}, {"steps", steps}};
  }
  return dump(j);
}

SceneFile parse_scene(const std::string& text_in) {
  const json j = parse_json(text_in, "scene");
  SceneFile out;
  SceneSpec& s = out.spec;
  if (j.contains("description")) s.description = text(j["description"], "scene.description");
  s.camera = camera_from(field(j, "camera", "scene"), "scene.camera");
  std::size_t i = 0;
  for (const auto& jo : array(field(j, "objects", "scene"), "scene.objects")) {
    const std::string w = "scene.objects[" + std::to_string(i++) + "]";
    SceneObject o = object_from(jo, w);
    if (jo.contains("correspondences")) {
      s.correspondences[o.id] = correspondences_from(jo["correspondences"], w + ".correspondences");
    }
    if (jo.contains("render_descriptors")) {
      for (const auto& f : array(jo["render_descriptors"], w + ".render_descriptors")) {
        out.render_descriptor_files[o.id].push_back(text(f, w + ".render_descriptors"));
      }
    }
    s.objects.push_back(std::move(o));
  }
  if (j.contains("scene_descriptors")) {
    out.scene_descriptor_file = text(j["scene_descriptors"], "scene.scene_descriptors");
  }
  if (j.contains("ground_truth")) out.ground_truth = transforms_from(j["ground_truth"], "scene.ground_truth");
  if (j.contains("iterative")) {
    const json& it = j["iterative"];
    IterativeManifest m;
    m.first_object = text(field(it, "first_object", "scene.iterative"), "scene.iterative.first_object");
    std::size_t k = 0;
    for (const auto& st : array(field(it, "steps", "scene.iterative"), "scene.iterative.steps")) {
      const std::string w = "scene.iterative.steps[" + std::to_string(k++) + "]";
      IterationSpec spec;
      spec.camera = camera_from(field(st, "camera", w), w + ".camera");
      spec.new_object = text(field(st, "new_object", w), w + ".new_object");
      const json& corrs = field(st, "correspondences", w);
      if (!corrs.is_object()) schema_error(w + ".correspondences", "expected an object keyed by id");
      for (const auto& [id, c] : corrs.items()) {
        spec.correspondences[id] = correspondences_from(c, w + ".correspondences." + id);
      }
      m.steps.push_back(std::move(spec));
    }
    out.iterative = std::move(m);
  }
  try {
    s.validate();
  } catch (const Error& e) {
    schema_error("scene", e.what());
  }
  for (const auto& [id, files] : out.render_descriptor_files) {
    if (!files.empty() && !out.scene_descriptor_file) {
      schema_error("scene", "object '" + id + "' has render descriptors but the scene has none");
    }
  }
  return out;
}

std::string dump_solution(const SceneSolution& sol) {
  json trace = json::array();
  for (const auto& t : sol.loss_trace) {
    trace.push_back({{"step", t.step}, {"reprojection", t.reprojection}, {"surface", t.surface},
                     {"collision", t.collision}, {"total", t.total}});
  }
  json inliers = json::object();
  for (const auto& [id, idx] : sol.inliers) inliers[id] = idx;
  json scores = json::object();
  for (const auto& [id, s] : sol.matching_scores) scores[id] = s;
  const Vec4 floor = sol.floor.coeffs();
  json j = {{"version", kFormatVersion},
            {"transforms", to_json(sol.transforms)},
            {"floor", json::array({floor[0], floor[1], floor[2], floor[3]})},
            {"loss_trace", trace},
            {"matching_scores", scores},
            {"inliers", inliers},
            {"neglected", sol.neglected},
            {"diverged", sol.diverged},
            {"selected_step", sol.selected_step}};
  return dump(j);
}

SceneSolution parse_solution(const std::string& text_in) {
  const json j = parse_json(text_in, "solution");
  SceneSolution sol;
  sol.transforms = transforms_from(field(j, "transforms", "solution"), "solution.transforms");
  try {
    sol.floor = Plane(vec<4>(field(j, "floor", "solution"), "solution.floor"));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::SchemaError) throw;
    schema_error("solution.floor", e.what());
  }
  if (j.contains("loss_trace")) {
    for (const auto& t : array(j["loss_trace"], "solution.loss_trace")) {
      const std::string w = "solution.loss_trace";
      const json& step = field(t, "step", w);
      if (!step.is_number_integer()) schema_error(w + ".step", "expected an integer");
      sol.loss_trace.push_back({step.get<int>(), number(field(t, "reprojection", w), w),
                                number(field(t, "surface", w), w),
                                number(field(t, "collision", w), w), number(field(t, "total", w), w)});
    }
  }
  if (j.contains("matching_scores")) {
    if (!j["matching_scores"].is_object()) schema_error("solution.matching_scores", "expected an object");
    for (const auto& [id, s] : j["matching_scores"].items()) {
      sol.matching_scores[id] = number(s, "solution.matching_scores." + id);
    }
  }
  if (j.contains("inliers")) {
    if (!j["inliers"].is_object()) schema_error("solution.inliers", "expected an object");
    for (const auto& [id, idx] : j["inliers"].items()) {
      auto& list = sol.inliers[id];
      for (const auto& v : array(idx, "solution.inliers." + id)) {
        if (!v.is_number_unsigned()) schema_error("solution.inliers." + id, "expected indices");
        list.push_back(v.get<std::size_t>());
      }
    }
  }
  if (j.contains("neglected")) {
    for (const auto& id : array(j["neglected"], "solution.neglected")) {
      sol.neglected.push_back(text(id, "solution.neglected"));
    }
  }
  if (j.contains("diverged")) {
    if (!j["diverged"].is_boolean()) schema_error("solution.diverged", "expected a boolean");
    sol.diverged = j["diverged"].get<bool>();
  }
  if (j.contains("selected_step")) {
    if (!j["selected_step"].is_number_integer()) schema_error("solution.selected_step", "expected an integer");
    sol.selected_step = j["selected_step"].get<int>();
  }
  return sol;
}

std::string dump_truth(const TruthFile& t) {
  json labels = json::object();
  json outliers = json::object();
  for (const auto& [id, lab] : t.inlier_labels) {
    labels[id] = lab;
    json idx = json::array();
    for (std::size_t i = 0; i < lab.size(); ++i) {
      if (!lab[i]) idx.push_back(i);
    }
    outliers[id] = idx;
  }
  json j = {{"version", kFormatVersion},
            {"scene_extent", t.scene_extent},
            {"camera_from_world", to_json(t.camera_from_world)},
            {"world_transforms", to_json(t.world_transforms)},
            {"camera_transforms", to_json(t.camera_transforms)},
            {"inlier_labels", labels},
            {"outliers", outliers}};
  return dump(j);
}

TruthFile parse_truth(const std::string& text_in) {
  const json j = parse_json(text_in, "truth");
  TruthFile t;
  t.scene_extent = number(field(j, "scene_extent", "truth"), "truth.scene_extent");
  t.camera_from_world = transform_from(field(j, "camera_from_world", "truth"), "truth.camera_from_world");
  t.world_transforms = transforms_from(field(j, "world_transforms", "truth"), "truth.world_transforms");
  t.camera_transforms = transforms_from(field(j, "camera_transforms", "truth"), "truth.camera_transforms");
  if (j.contains("inlier_labels")) {
    if (!j["inlier_labels"].is_object()) schema_error("truth.inlier_labels", "expected an object");
    for (const auto& [id, lab] : j["inlier_labels"].items()) {
      for (const auto& v : array(lab, "truth.inlier_labels." + id)) {
        if (!v.is_boolean()) schema_error("truth.inlier_labels." + id, "expected booleans");
        t.inlier_labels[id].push_back(v.get<bool>());
      }
    }
  }
  return t;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw Error(ErrorCode::IoError, "failed writing '" + path.string() + "'");
}

SceneFile read_scene_file(const std::filesystem::path& path) {
  SceneFile scene = parse_scene(read_text(path));
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& f) {
    const std::filesystem::path p(f);
    return p.is_absolute() ? p : base / p;
  };
  for (const auto& [id, files] : scene.render_descriptor_files) {
    for (const auto& f : files) scene.spec.render_descriptors[id].push_back(read_descriptor_map(resolve(f)));
  }
  if (scene.scene_descriptor_file) {
    scene.spec.scene_descriptors = read_descriptor_map(resolve(*scene.scene_descriptor_file));
  }
  for (auto& o : scene.spec.objects) {
    if (o.mesh_path && std::filesystem::path(*o.mesh_path).is_relative()) {
      o.mesh_path = resolve(*o.mesh_path).string();
    }
  }
  return scene;
}

void write_scene_file(const std::filesystem::path& path, const SceneFile& scene) {
  write_text(path, dump_scene(scene));
}

SceneSolution read_solution_file(const std::filesystem::path& path) {
  return parse_solution(read_text(path));
}

void write_solution_file(const std::filesystem::path& path, const SceneSolution& solution) {
  write_text(path, dump_solution(solution));
}

TruthFile read_truth_file(const std::filesystem::path& path) { return parse_truth(read_text(path)); }

void write_truth_file(const std::filesystem::path& path, const TruthFile& truth) {
  write_text(path, dump_truth(truth));
}

void write_descriptor_map(const std::filesystem::path& path, const DescriptorMap& map) {
  map.validate();
  std::string buf(kMagic, 4);
  put<std::uint32_t>(buf, kDescriptorVersion);
  put<std::uint64_t>(buf, map.entries.size());
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(map.dimension()));
  for (const auto& e : map.entries) {
    put<double>(buf, e.pixel.u);
    put<double>(buf, e.pixel.v);
    put<std::uint8_t>(buf, static_cast<std::uint8_t>((e.foreground ? 1 : 0) | (e.object_point ? 2 : 0)));
    const Vec3 p = e.object_point.value_or(Vec3::Zero());
    for (int a = 0; a < 3; ++a) put<double>(buf, p[a]);
    for (float f : e.descriptor) put<float>(buf, f);
  }
  write_text(path, buf);
}

DescriptorMap read_descriptor_map(const std::filesystem::path& path) {
  const std::string buf = read_text(path);
  const std::string where = path.string();
  if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::SchemaError, where + ": not a descriptor map");
  }
  std::size_t pos = 4;
  if (take<std::uint32_t>(buf, pos, where) != kDescriptorVersion) {
    throw Error(ErrorCode::SchemaError, where + ": unsupported descriptor map version");
  }
  const auto count = take<std::uint64_t>(buf, pos, where);
  const auto dim = take<std::uint32_t>(buf, pos, where);
  const std::size_t record = 2 * 8 + 1 + 3 * 8 + 4 * static_cast<std::size_t>(dim);
  if (count > (buf.size() - pos) / record || buf.size() - pos != count * record) {
    throw Error(ErrorCode::SchemaError, where + ": size does not match the header");
  }
  DescriptorMap map;
  map.entries.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    DescriptorEntry e;
    e.pixel.u = take<double>(buf, pos, where);
    e.pixel.v = take<double>(buf, pos, where);
    const auto flags = take<std::uint8_t>(buf, pos, where);
    e.foreground = (flags & 1) != 0;
    Vec3 p;
    for (int a = 0; a < 3; ++a) p[a] = take<double>(buf, pos, where);
    if (flags & 2) e.object_point = p;
    e.descriptor.resize(dim);
    for (auto& f : e.descriptor) f = take<float>(buf, pos, where);
    map.entries.push_back(std::move(e));
  }
  map.validate();
  return map;
}

}  // namespace layoutpnp
