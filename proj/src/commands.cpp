#include "layoutpnp/cli.hpp"

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "layoutpnp/arrange.hpp"
#include "layoutpnp/export.hpp"
#include "layoutpnp/io.hpp"
#include "layoutpnp/synth.hpp"

namespace layoutpnp {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct SolveOptions {
  std::string scene;
  std::string output;
  std::uint64_t seed = 0;
  int steps = SiPnpConfig{}.steps;
  double lr = SiPnpConfig{}.learning_rate;
  double omega_surface = SiPnpConfig{}.omega_surface;
  double omega_collision = SiPnpConfig{}.omega_collision;
  std::optional<double> inlier_threshold;
  double neglect_threshold = kDefaultNeglectThreshold;
  bool freeze_plane = false;
  std::optional<std::string> iterative;
  bool iterative_flag = false;
};

struct SynthOptions {
  std::string output;
  std::string truth;
  std::uint64_t seed = 0;
  int objects = 2;
  int keypoints = 100;
  double noise = 0.0;
  double outliers = 0.0;
  double extent = 4.0;
  std::vector<int> neglect;
  bool iterative = false;
};

struct EvalOptions {
  std::string scene;
  std::string solution;
  std::string truth;
  std::string report;
  double max_rotation_deg = 2.0;
  double max_translation = 0.02;
  bool relative = false;
  double omega_surface = SiPnpConfig{}.omega_surface;
  double omega_collision = SiPnpConfig{}.omega_collision;
};

struct BaselineOptions {
  std::string scene;
  std::string output;
  std::string mode;
  std::uint64_t seed = 0;
  double radius = 2.0;
};

struct ExportOptions {
  std::string scene;
  std::string solution;
  std::string output;
  std::string format;
};

ArrangeConfig arrange_config(const SolveOptions& o) {
  ArrangeConfig cfg;
  cfg.sipnp.steps = o.steps;
  cfg.sipnp.learning_rate = o.lr;
  cfg.sipnp.omega_surface = o.omega_surface;
  cfg.sipnp.omega_collision = o.omega_collision;
  cfg.sipnp.optimize_plane = !o.freeze_plane;
  cfg.sipnp.validate();
  cfg.ransac.seed = o.seed;
  cfg.ransac.inlier_threshold_px = o.inlier_threshold;
  if (o.inlier_threshold && !(*o.inlier_threshold > 0.0)) {
    throw Error(ErrorCode::InvalidInput, "--inlier-threshold must be positive");
  }
  cfg.neglect_threshold = o.neglect_threshold;
  return cfg;
}

int cmd_solve(const SolveOptions& o, std::ostream& out) {
  const SceneFile scene = read_scene_file(o.scene);
  const ArrangeConfig cfg = arrange_config(o);
  SceneSolution sol;
  if (o.iterative_flag) {
    IterativeManifest manifest;
    if (o.iterative && !o.iterative->empty()) {
      const SceneFile m = parse_scene(read_text(*o.iterative));
      if (!m.iterative) throw Error(ErrorCode::SchemaError, *o.iterative + ": no iterative block");
      manifest = *m.iterative;
    } else if (scene.iterative) {
      manifest = *scene.iterative;
    } else {
      throw Error(ErrorCode::InvalidInput, "--iterative needs a step manifest");
    }
    sol = arrange_iterative(scene.spec.objects, manifest.first_object, manifest.steps, cfg).solution;
  } else {
    sol = arrange_scene(scene.spec, cfg);
  }
  write_solution_file(o.output, sol);
  out << "solved " << sol.transforms.size() << " object(s)";
  if (!sol.neglected.empty()) {
    out << ", neglected:";
    for (const auto& id : sol.neglected) out << ' ' << id;
  }
  out << "\n";
  if (sol.diverged) {
    throw Error(ErrorCode::NonFiniteLoss, "optimization diverged; wrote the last finite state");
  }
  return kExitOk;
}

int cmd_synth(const SynthOptions& o, std::ostream& out) {
  SynthConfig cfg;
  cfg.seed = o.seed;
  cfg.n_objects = o.objects;
  cfg.keypoints_per_object = o.keypoints;
  cfg.noise_sigma_px = o.noise;
  cfg.outlier_fraction = o.outliers;
  cfg.scene_extent = o.extent;
  cfg.neglected_objects = o.neglect;
  const GroundTruthScene gt = generate_scene(cfg);

  SceneFile scene;
  scene.spec = gt.to_spec();
  scene.spec.description = "synthetic scene, seed " + std::to_string(o.seed);
  if (o.iterative && gt.objects.size() > 1) {
    std::vector<std::size_t> order(gt.objects.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    scene.iterative = IterativeManifest{gt.objects.front().id, generate_iterative_steps(gt, order, cfg)};
  }
  TruthFile truth;
  truth.scene_extent = gt.scene_extent;
  truth.camera_from_world = gt.camera_from_world;
  truth.world_transforms = gt.true_transforms;
  for (std::size_t i = 0; i < gt.objects.size(); ++i) {
    const auto& id = gt.objects[i].id;
    truth.camera_transforms[id] = gt.camera_transform(id);
    truth.inlier_labels[id] = gt.correspondences[i].is_inlier;
  }
  std::string truth_path = o.truth;
  if (truth_path.empty()) {
    fs::path p(o.output);
    truth_path = (p.parent_path() / (p.stem().string() + ".truth.json")).string();
  }
  write_scene_file(o.output, scene);
  write_truth_file(truth_path, truth);
  std::size_t outliers = 0;
  for (const auto& c : gt.correspondences) outliers += c.outlier_count();
  out << "wrote " << gt.objects.size() << " object(s), " << outliers << " labeled outlier(s) to "
      << o.output << " and " << truth_path << "\n";
  return kExitOk;
}

std::map<std::string, RigidTransform> relative_to_first(const std::map<std::string, RigidTransform>& t,
                                                        const std::string& anchor) {
  std::map<std::string, RigidTransform> out;
  const RigidTransform inv = t.at(anchor).inverse();
  for (const auto& [id, tr] : t) out[id] = inv.compose(tr);
  return out;
}

int cmd_eval(const EvalOptions& o, std::ostream& out) {
  const SceneFile scene = read_scene_file(o.scene);
  const SceneSolution sol = read_solution_file(o.solution);
  const TruthFile truth = read_truth_file(o.truth);

  std::set<std::string> scene_ids;
  for (const auto& obj : scene.spec.objects) scene_ids.insert(obj.id);
  const std::set<std::string> neglected(sol.neglected.begin(), sol.neglected.end());
  for (const auto& [id, tr] : sol.transforms) {
    if (!scene_ids.contains(id)) throw Error(ErrorCode::IdMismatch, "solution has unknown object '" + id + "'");
  }
  for (const auto& id : scene_ids) {
    if (!sol.transforms.contains(id) && !neglected.contains(id)) {
      throw Error(ErrorCode::IdMismatch, "object '" + id + "' is missing from the solution");
    }
    if (!truth.camera_transforms.contains(id)) {
      throw Error(ErrorCode::IdMismatch, "object '" + id + "' is missing from the ground truth");
    }
  }

  std::map<std::string, RigidTransform> est = sol.transforms;
  std::map<std::string, RigidTransform> ref;
  for (const auto& [id, tr] : truth.camera_transforms) {
    if (est.contains(id)) ref[id] = tr;
  }
  if (o.relative && !est.empty()) {
    const std::string anchor = est.begin()->first;
    est = relative_to_first(est, anchor);
    ref = relative_to_first(ref, anchor);
  }

  json objects = json::object();
  bool pass = true;
  std::ostringstream table;
  table << std::left << std::setw(16) << "object" << std::setw(16) << "rotation_deg"
        << std::setw(16) << "translation" << "status\n";
  for (const auto& [id, tr] : est) {
    const PoseError e = pose_error(ref.at(id), tr);
    const bool ok = e.rotation_deg < o.max_rotation_deg &&
                    e.translation < o.max_translation * truth.scene_extent;
    pass = pass && ok;
    objects[id] = {{"rotation_deg", e.rotation_deg}, {"translation", e.translation}, {"pass", ok}};
    table << std::setw(16) << id << std::setw(16) << e.rotation_deg << std::setw(16) << e.translation
          << (ok ? "pass" : "FAIL") << "\n";
  }
  for (const auto& id : sol.neglected) {
    objects[id] = {{"neglected", true}};
    table << std::setw(16) << id << "neglected\n";
  }

  std::vector<Body> bodies;
  std::vector<RigidTransform> poses;
  std::vector<std::vector<Correspondence>> corrs;
  const auto resolved = resolve_correspondences(scene.spec);
  for (const auto& obj : scene.spec.objects) {
    auto it = sol.transforms.find(obj.id);
    if (it == sol.transforms.end()) continue;
    bodies.push_back(Body::from_object(obj));
    poses.push_back(it->second);
    const auto& all = resolved.at(obj.id);
    std::vector<Correspondence> used;
    if (auto in = sol.inliers.find(obj.id); in != sol.inliers.end()) {
      for (std::size_t i : in->second) {
        if (i >= all.size()) throw Error(ErrorCode::IdMismatch, "inlier index out of range for '" + obj.id + "'");
        used.push_back(all[i]);
      }
    } else {
      used = all;
    }
    corrs.push_back(std::move(used));
  }
  json losses = nullptr;
  if (!bodies.empty() && !o.relative) {
    SiPnpConfig cfg;
    cfg.omega_surface = o.omega_surface;
    cfg.omega_collision = o.omega_collision;
    const LossComponents l = total_loss(scene.spec.camera, bodies, poses, sol.floor, corrs, cfg);
    losses = {{"reprojection", l.reprojection}, {"surface", l.surface},
              {"collision", l.collision}, {"total", l.total}};
    table << "loss: reprojection " << l.reprojection << ", surface " << l.surface
          << ", collision " << l.collision << ", total " << l.total << "\n";
  }
  table << (pass ? "PASS" : "FAIL") << "\n";
  out << table.str();

  if (!o.report.empty()) {
    json report = {{"version", kFormatVersion},
                   {"pass", pass},
                   {"relative", o.relative},
                   {"thresholds", {{"rotation_deg", o.max_rotation_deg},
                                   {"translation_fraction", o.max_translation},
                                   {"scene_extent", truth.scene_extent}}},
                   {"objects", objects},
                   {"loss", losses}};
    write_text(o.report, report.dump(2) + "\n");
  }
  return pass ? kExitOk : kExitPipelineFailure;
}

int cmd_baseline(const BaselineOptions& o, std::ostream& out) {
  const SceneFile scene = read_scene_file(o.scene);
  SceneSolution sol;
  if (o.mode == "uniform") {
    sol.transforms = baseline_uniform(scene.spec.objects, o.seed);
  } else if (o.mode == "circular") {
    sol.transforms = baseline_circular(scene.spec.objects, o.radius);
  } else {
    throw Error(ErrorCode::InvalidInput, "unknown baseline mode '" + o.mode + "'");
  }
  sol.floor = Plane(Vec4(0.0, 0.0, 1.0, 0.0));
  write_solution_file(o.output, sol);
  out << "wrote " << o.mode << " baseline for " << sol.transforms.size() << " object(s)\n";
  return kExitOk;
}

int cmd_export(const ExportOptions& o, std::ostream& out) {
  std::string format = o.format;
  if (format.empty()) {
    const std::string ext = fs::path(o.output).extension().string();
    if (!ext.empty()) format = ext.substr(1);
  }
  if (format != "obj" && format != "svg") {
    throw Error(ErrorCode::UnknownFormat, "unknown export format '" + format + "'");
  }
  const SceneFile scene = read_scene_file(o.scene);
  const SceneSolution sol = read_solution_file(o.solution);
  const std::string content = format == "obj" ? export_obj(scene.spec.objects, sol)
                                              : export_svg(scene.spec.objects, sol, scene.spec.camera);
  write_text(o.output, content);
  out << "wrote " << o.output << "\n";
  return kExitOk;
}

void error_record(std::ostream& err, const std::string& code, const std::string& message, int exit_code) {
  err << json{{"error", {{"code", code}, {"message", message}, {"exit_code", exit_code}}}}.dump() << "\n";
}

}  // namespace

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::EmptyInput:
    case ErrorCode::IdMismatch:
    case ErrorCode::SchemaError:
    case ErrorCode::IoError:
    case ErrorCode::UnknownFormat:
      return kExitInputError;
    case ErrorCode::NonFiniteLoss:
      return kExitDiverged;
    default:
      return kExitPipelineFailure;
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Scene layout from object correspondences with floor and collision constraints"};
  app.name(args.empty() ? "layoutpnp" : fs::path(args[0]).filename().string());
  app.require_subcommand(1);

  SolveOptions solve;
  auto* s = app.add_subcommand("solve", "Recover object poses for a scene file");
  s->add_option("scene", solve.scene, "Scene file")->required();
  s->add_option("-o,--output", solve.output, "Solution file to write")->required();
  s->add_option("--seed", solve.seed, "RANSAC seed");
  s->add_option("--steps", solve.steps, "Adam steps");
  s->add_option("--lr", solve.lr, "Adam learning rate");
  s->add_option("--omega-surface", solve.omega_surface, "Shared floor weight");
  s->add_option("--omega-collision", solve.omega_collision, "Box overlap weight");
  s->add_option("--inlier-threshold", solve.inlier_threshold, "RANSAC inlier threshold in pixels");
  s->add_option("--neglect-threshold", solve.neglect_threshold, "Minimum matching score");
  s->add_flag("--freeze-plane", solve.freeze_plane, "Keep the initial floor fixed");
  auto* iter = s->add_option("--iterative", solve.iterative,
                             "Pairwise merging; optional manifest file (defaults to the scene's own steps)")
                   ->expected(0, 1);

  SynthOptions synth;
  auto* y = app.add_subcommand("synth", "Generate a synthetic scene and its ground truth");
  y->add_option("-o,--output", synth.output, "Scene file to write")->required();
  y->add_option("--truth", synth.truth, "Ground-truth file (default <output stem>.truth.json)");
  y->add_option("--seed", synth.seed, "Generator seed");
  y->add_option("--objects", synth.objects, "Number of objects");
  y->add_option("--keypoints", synth.keypoints, "Keypoints per object");
  y->add_option("--noise", synth.noise, "Pixel noise sigma");
  y->add_option("--outliers", synth.outliers, "Outlier fraction in [0, 1)");
  y->add_option("--extent", synth.extent, "Scene extent");
  y->add_option("--neglect", synth.neglect, "Indices of objects missing from the image");
  y->add_flag("--iterative", synth.iterative, "Also write a pairwise-merge step manifest");

  EvalOptions eval;
  auto* e = app.add_subcommand("eval", "Compare a solution with ground truth");
  e->add_option("scene", eval.scene, "Scene file")->required();
  e->add_option("solution", eval.solution, "Solution file")->required();
  e->add_option("truth", eval.truth, "Ground-truth file")->required();
  e->add_option("-o,--output", eval.report, "JSON report to write");
  e->add_option("--max-rotation", eval.max_rotation_deg, "Rotation threshold in degrees");
  e->add_option("--max-translation", eval.max_translation, "Translation threshold as a fraction of the scene extent");
  e->add_flag("--relative", eval.relative, "Compare poses relative to the first object");
  e->add_option("--omega-surface", eval.omega_surface, "Shared floor weight for the loss report");
  e->add_option("--omega-collision", eval.omega_collision, "Box overlap weight for the loss report");

  BaselineOptions base;
  auto* b = app.add_subcommand("baseline", "Random or circular layouts for comparison");
  b->add_option("scene", base.scene, "Scene file")->required();
  b->add_option("-o,--output", base.output, "Solution file to write")->required();
  b->add_option("--mode", base.mode, "uniform or circular")->required()->check(CLI::IsMember({"uniform", "circular"}));
  b->add_option("--seed", base.seed, "Sampling seed (uniform)");
  b->add_option("--radius", base.radius, "Circle radius (circular)");

  ExportOptions exp;
  auto* x = app.add_subcommand("export", "Write OBJ geometry or an SVG preview");
  x->add_option("scene", exp.scene, "Scene file")->required();
  x->add_option("solution", exp.solution, "Solution file")->required();
  x->add_option("-o,--output", exp.output, "File to write")->required();
  x->add_option("--format", exp.format, "obj or svg (default from the output extension)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& pe) {
    error_record(err, "UsageError", pe.what(), kExitInputError);
    return kExitInputError;
  }

  try {
    if (s->parsed()) {
      solve.iterative_flag = iter->count() > 0;
      return cmd_solve(solve, out);
    }
    if (y->parsed()) return cmd_synth(synth, out);
    if (e->parsed()) return cmd_eval(eval, out);
    if (b->parsed()) return cmd_baseline(base, out);
    if (x->parsed()) return cmd_export(exp, out);
  } catch (const Error& ex) {
    const int code = exit_code_for(ex.code());
    error_record(err, std::string(to_string(ex.code())), ex.what(), code);
    return code;
  } catch (const std::exception& ex) {
    error_record(err, "InternalError", ex.what(), kExitPipelineFailure);
    return kExitPipelineFailure;
  }
  return kExitInputError;
}

}  // namespace layoutpnp
