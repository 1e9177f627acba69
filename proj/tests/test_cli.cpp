#include <doctest.h>

#include <sstream>

#include <nlohmann/json.hpp>

#include "layoutpnp/cli.hpp"
#include "layoutpnp/io.hpp"
#include "layoutpnp/synth.hpp"
#include "support/tempdir.hpp"

using namespace layoutpnp;
using nlohmann::json;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "layoutpnp");
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string p(const fixtures::TempDir& d, const std::string& name) { return (d / name).string(); }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("synth is deterministic and honors its flags") {
  const fixtures::TempDir d("cli-synth");
  REQUIRE(cli({"synth", "-o", p(d, "a.json"), "--seed", "7", "--objects", "3", "--outliers", "0.3"}).code == 0);
  REQUIRE(cli({"synth", "-o", p(d, "b.json"), "--seed", "7", "--objects", "3", "--outliers", "0.3",
               "--truth", p(d, "b.truth.json")}).code == 0);
  CHECK(read_text(d / "a.json") == read_text(d / "b.json"));
  CHECK(read_text(d / "a.truth.json") == read_text(d / "b.truth.json"));

  const SceneFile scene = read_scene_file(d / "a.json");
  CHECK(scene.spec.objects.size() == 3);
  const TruthFile truth = read_truth_file(d / "a.truth.json");
  for (const auto& [id, labels] : truth.inlier_labels) {
    std::size_t outliers = 0;
    for (bool b : labels) outliers += b ? 0 : 1;
    CHECK(outliers == 30);
  }
}

TEST_CASE("solve then eval on a noiseless scene") {
  const fixtures::TempDir d("cli-solve");
  REQUIRE(cli({"synth", "-o", p(d, "s.json"), "--seed", "3", "--keypoints", "40"}).code == 0);
  const Run solve = cli({"solve", p(d, "s.json"), "-o", p(d, "sol.json"), "--steps", "200"});
  REQUIRE(solve.code == 0);
  const Run ev = cli({"eval", p(d, "s.json"), p(d, "sol.json"), p(d, "s.truth.json"), "-o", p(d, "report.json"),
                      "--max-rotation", "0.0573", "--max-translation", "0.00025"});
  CHECK(ev.code == 0);
  CHECK(ev.out.find("PASS") != std::string::npos);
  const json report = json::parse(read_text(d / "report.json"));
  CHECK(report["pass"] == true);
  for (const auto& [id, o] : report["objects"].items()) {
    CHECK(o["rotation_deg"].get<double>() < 0.0573);
    CHECK(o["translation"].get<double>() < 1e-3);
  }
  CHECK(report["loss"]["collision"].get<double>() == 0.0);
}

TEST_CASE("solve lists an all-noise object as neglected") {
  const fixtures::TempDir d("cli-neglect");
  REQUIRE(cli({"synth", "-o", p(d, "s.json"), "--seed", "4", "--keypoints", "40", "--neglect", "1"}).code == 0);
  REQUIRE(cli({"solve", p(d, "s.json"), "-o", p(d, "sol.json"), "--steps", "100"}).code == 0);
  const SceneSolution sol = read_solution_file(d / "sol.json");
  REQUIRE(sol.neglected.size() == 1);
  CHECK(sol.transforms.size() == 1);
  CHECK(cli({"eval", p(d, "s.json"), p(d, "sol.json"), p(d, "s.truth.json")}).code == 0);
}

TEST_CASE("eval reports planted perturbations and id mismatches") {
  const fixtures::TempDir d("cli-eval");
  REQUIRE(cli({"synth", "-o", p(d, "s.json"), "--seed", "5"}).code == 0);
  const TruthFile truth = read_truth_file(d / "s.truth.json");
  SceneSolution exact;
  exact.transforms = truth.camera_transforms;
  write_solution_file(d / "exact.json", exact);
  CHECK(cli({"eval", p(d, "s.json"), p(d, "exact.json"), p(d, "s.truth.json")}).code == 0);

  SceneSolution moved = exact;
  auto& first = moved.transforms.begin()->second;
  first.translation += Vec3(0.3, 0.4, 0.0);
  first.rotation = first.rotation * UnitQuaternion::from_axis_angle(Vec3::UnitY(), 10.0 * M_PI / 180.0);
  write_solution_file(d / "moved.json", moved);
  const Run r = cli({"eval", p(d, "s.json"), p(d, "moved.json"), p(d, "s.truth.json"), "-o", p(d, "r.json")});
  CHECK(r.code == kExitPipelineFailure);
  const json report = json::parse(read_text(d / "r.json"));
  const json& o = report["objects"][moved.transforms.begin()->first];
  CHECK(o["translation"].get<double>() == doctest::Approx(0.5));
  CHECK(o["rotation_deg"].get<double>() == doctest::Approx(10.0));

  SceneSolution missing = exact;
  missing.transforms.erase(missing.transforms.begin());
  write_solution_file(d / "missing.json", missing);
  const Run m = cli({"eval", p(d, "s.json"), p(d, "missing.json"), p(d, "s.truth.json")});
  CHECK(m.code == kExitInputError);
  CHECK(json::parse(m.err)["error"]["code"] == "IdMismatch");
}

TEST_CASE("baseline modes") {
  const fixtures::TempDir d("cli-base");
  REQUIRE(cli({"synth", "-o", p(d, "s.json"), "--seed", "6"}).code == 0);
  REQUIRE(cli({"baseline", p(d, "s.json"), "-o", p(d, "c.json"), "--mode", "circular", "--radius", "1"}).code == 0);
  const SceneSolution c = read_solution_file(d / "c.json");
  REQUIRE(c.transforms.size() == 2);
  const Vec3 a = c.transforms.begin()->second.translation;
  const Vec3 b = std::next(c.transforms.begin())->second.translation;
  CHECK((a + b).norm() < 1e-12);
  CHECK(a.norm() == doctest::Approx(1.0));

  REQUIRE(cli({"baseline", p(d, "s.json"), "-o", p(d, "u1.json"), "--mode", "uniform", "--seed", "1"}).code == 0);
  REQUIRE(cli({"baseline", p(d, "s.json"), "-o", p(d, "u2.json"), "--mode", "uniform", "--seed", "1"}).code == 0);
  CHECK(read_text(d / "u1.json") == read_text(d / "u2.json"));

  const Run bad = cli({"baseline", p(d, "s.json"), "-o", p(d, "x.json"), "--mode", "other"});
  CHECK(bad.code == kExitInputError);
  CHECK(json::parse(bad.err).contains("error"));
}

TEST_CASE("export formats") {
  const fixtures::TempDir d("cli-export");
  REQUIRE(cli({"synth", "-o", p(d, "s.json"), "--seed", "8"}).code == 0);
  REQUIRE(cli({"baseline", p(d, "s.json"), "-o", p(d, "c.json"), "--mode", "circular"}).code == 0);
  CHECK(cli({"export", p(d, "s.json"), p(d, "c.json"), "-o", p(d, "out.obj")}).code == 0);
  CHECK(read_text(d / "out.obj").find("g floor") != std::string::npos);
  CHECK(cli({"export", p(d, "s.json"), p(d, "c.json"), "-o", p(d, "out.txt"), "--format", "svg"}).code == 0);
  CHECK(read_text(d / "out.txt").rfind("<svg", 0) == 0);
  const Run bad = cli({"export", p(d, "s.json"), p(d, "c.json"), "-o", p(d, "out.gltf")});
  CHECK(bad.code == kExitInputError);
  CHECK(json::parse(bad.err)["error"]["code"] == "UnknownFormat");
}

TEST_CASE("input errors produce a machine-readable record") {
  const fixtures::TempDir d("cli-err");
  write_text(d / "broken.json", "{\"version\": \"1\", \"camera\": ");
  const Run r = cli({"solve", p(d, "broken.json"), "-o", p(d, "sol.json")});
  CHECK(r.code == kExitInputError);
  const json rec = json::parse(r.err);
  CHECK(rec["error"]["code"] == "SchemaError");
  CHECK(rec["error"]["exit_code"] == 1);

  CHECK(cli({"solve", p(d, "absent.json"), "-o", p(d, "sol.json")}).code == kExitInputError);
  CHECK(cli({"frobnicate"}).code == kExitInputError);
  CHECK(cli({}).code == kExitInputError);
  CHECK(cli({"--help"}).code == kExitOk);
}

TEST_CASE("iterative solve from a manifest") {
  const fixtures::TempDir d("cli-iter");
  REQUIRE(cli({"synth", "-o", p(d, "s.json"), "--seed", "9", "--objects", "3", "--keypoints", "40", "--iterative"})
              .code == 0);
  REQUIRE(read_scene_file(d / "s.json").iterative.has_value());
  REQUIRE(cli({"solve", p(d, "s.json"), "-o", p(d, "sol.json"), "--iterative", "--steps", "200"}).code == 0);
  CHECK(read_solution_file(d / "sol.json").transforms.size() == 3);
  CHECK(cli({"eval", p(d, "s.json"), p(d, "sol.json"), p(d, "s.truth.json"), "--relative"}).code == 0);
  REQUIRE(cli({"solve", p(d, "s.json"), "-o", p(d, "sol2.json"), "--iterative", p(d, "s.json"), "--steps", "200"})
              .code == 0);
  CHECK(read_text(d / "sol.json") == read_text(d / "sol2.json"));
}

TEST_CASE("exit code mapping") {
  CHECK(exit_code_for(ErrorCode::SchemaError) == kExitInputError);
  CHECK(exit_code_for(ErrorCode::IdMismatch) == kExitInputError);
  CHECK(exit_code_for(ErrorCode::AllObjectsNeglected) == kExitPipelineFailure);
  CHECK(exit_code_for(ErrorCode::NoConsensus) == kExitPipelineFailure);
  CHECK(exit_code_for(ErrorCode::NonFiniteLoss) == kExitDiverged);
}

}
