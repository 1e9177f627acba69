#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "layoutpnp/arrange.hpp"
#include "layoutpnp/cli.hpp"
#include "layoutpnp/io.hpp"
#include "layoutpnp/synth.hpp"

namespace py = pybind11;
using namespace layoutpnp;

namespace {

std::vector<Vec3> rows(const Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>& m) {
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.emplace_back(m.row(i).transpose());
  return out;
}

std::vector<Body> bodies_of(const std::vector<SceneObject>& objects) { return to_bodies(objects); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multi-object pose recovery with shared-floor and anti-collision refinement";

  static py::handle error_type = py::exception<Error>(m, "Error", PyExc_RuntimeError).release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const std::string code(to_string(e.code()));
      py::object exc = error_type(code + ": " + e.what());
      exc.attr("code") = code;
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  py::class_<PixelPoint>(m, "PixelPoint")
      .def(py::init<>())
      .def(py::init([](double u, double v) { return PixelPoint{u, v}; }), py::arg("u"), py::arg("v"))
      .def_readwrite("u", &PixelPoint::u)
      .def_readwrite("v", &PixelPoint::v)
      .def("__repr__", [](const PixelPoint& p) {
        std::ostringstream s;
        s << "PixelPoint(" << p.u << ", " << p.v << ")";
        return s.str();
      });

  py::class_<UnitQuaternion>(m, "UnitQuaternion")
      .def(py::init<>())
      .def(py::init<double, double, double, double>(), py::arg("w"), py::arg("x"), py::arg("y"), py::arg("z"))
      .def_static("from_axis_angle", &UnitQuaternion::from_axis_angle)
      .def_property_readonly("w", &UnitQuaternion::w)
      .def_property_readonly("x", &UnitQuaternion::x)
      .def_property_readonly("y", &UnitQuaternion::y)
      .def_property_readonly("z", &UnitQuaternion::z)
      .def("coeffs", &UnitQuaternion::coeffs)
      .def("canonical", &UnitQuaternion::canonical)
      .def("rotate", &UnitQuaternion::rotate)
      .def("__mul__", [](const UnitQuaternion& a, const UnitQuaternion& b) { return a * b; });

  py::class_<RigidTransform>(m, "RigidTransform")
      .def(py::init<>())
      .def(py::init([](const UnitQuaternion& q, const Vec3& t) { return RigidTransform{q, t}; }),
           py::arg("rotation"), py::arg("translation"))
      .def_readwrite("rotation", &RigidTransform::rotation)
      .def_readwrite("translation", &RigidTransform::translation)
      .def_static("identity", &RigidTransform::identity)
      .def_static("from_translation", &RigidTransform::from_translation)
      .def("rotation_matrix", &RigidTransform::rotation_matrix)
      .def("matrix", &RigidTransform::matrix)
      .def("apply", &RigidTransform::apply)
      .def("inverse", &RigidTransform::inverse)
      .def("compose", &RigidTransform::compose);

  py::class_<CameraIntrinsics>(m, "CameraIntrinsics")
      .def(py::init<>())
      .def_readwrite("fx", &CameraIntrinsics::fx)
      .def_readwrite("fy", &CameraIntrinsics::fy)
      .def_readwrite("cx", &CameraIntrinsics::cx)
      .def_readwrite("cy", &CameraIntrinsics::cy)
      .def_readwrite("skew", &CameraIntrinsics::skew)
      .def("matrix", &CameraIntrinsics::matrix)
      .def("image_diagonal", &CameraIntrinsics::image_diagonal)
      .def_static("from_fov", &CameraIntrinsics::from_fov, py::arg("width"), py::arg("height"),
                  py::arg("vertical_fov_deg"));

  py::class_<Plane>(m, "Plane")
      .def(py::init<>())
      .def(py::init<const Vec4&>())
      .def("coeffs", &Plane::coeffs)
      .def("normal", &Plane::normal)
      .def("offset", &Plane::offset);

  m.def("quat_to_matrix", py::overload_cast<const Vec4&>(&quat_to_matrix), py::arg("wxyz"));
  m.def("matrix_to_quat", &matrix_to_quat);
  m.def("project", py::overload_cast<const CameraIntrinsics&, const RigidTransform&, const Vec3&>(&project));
  m.def("fit_plane", [](const Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>& pts) {
    return fit_plane(rows(pts));
  });
  m.def("plane_residual", &plane_residual);
  m.def("rotation_angle_between", &rotation_angle_between);

  py::class_<Correspondence>(m, "Correspondence")
      .def(py::init<>())
      .def(py::init([](const Vec3& p, const PixelPoint& px, double sim) { return Correspondence{p, px, sim}; }),
           py::arg("object_point"), py::arg("image_point"), py::arg("similarity") = 1.0)
      .def_readwrite("object_point", &Correspondence::object_point)
      .def_readwrite("image_point", &Correspondence::image_point)
      .def_readwrite("similarity", &Correspondence::similarity);

  py::class_<RansacConfig>(m, "RansacConfig")
      .def(py::init<>())
      .def_readwrite("inlier_threshold_px", &RansacConfig::inlier_threshold_px)
      .def_readwrite("max_iters", &RansacConfig::max_iters)
      .def_readwrite("confidence", &RansacConfig::confidence)
      .def_readwrite("seed", &RansacConfig::seed);

  py::class_<RansacResult>(m, "RansacResult")
      .def_readonly("pose", &RansacResult::pose)
      .def_readonly("inlier_indices", &RansacResult::inlier_indices)
      .def_readonly("iterations_run", &RansacResult::iterations_run);

  m.def("ransac_pnp",
        [](const CameraIntrinsics& k, const std::vector<Correspondence>& c, const RansacConfig& cfg) {
          return ransac_pnp(k, c, cfg);
        },
        py::arg("camera"), py::arg("correspondences"), py::arg("config") = RansacConfig{});
  m.def("reprojection_error_single", &reprojection_error_single);

  py::class_<SceneObject>(m, "SceneObject")
      .def(py::init<>())
      .def_readwrite("id", &SceneObject::id)
      .def_readwrite("keypoints", &SceneObject::keypoints)
      .def_readwrite("bbox_corners", &SceneObject::bbox_corners)
      .def_readwrite("bottom_vertices", &SceneObject::bottom_vertices)
      .def_readwrite("mesh_path", &SceneObject::mesh_path)
      .def("validate", &SceneObject::validate)
      .def_static("from_extent",
                  [](std::string id, const Vec3& lo, const Vec3& hi,
                     const Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>& kp) {
                    return SceneObject::from_extent(std::move(id), lo, hi, rows(kp));
                  },
                  py::arg("id"), py::arg("lo"), py::arg("hi"), py::arg("keypoints"));

  py::class_<SiPnpConfig>(m, "SiPnpConfig")
      .def(py::init<>())
      .def_readwrite("omega_surface", &SiPnpConfig::omega_surface)
      .def_readwrite("omega_collision", &SiPnpConfig::omega_collision)
      .def_readwrite("learning_rate", &SiPnpConfig::learning_rate)
      .def_readwrite("steps", &SiPnpConfig::steps)
      .def_readwrite("optimize_plane", &SiPnpConfig::optimize_plane)
      .def_readwrite("trace_every", &SiPnpConfig::trace_every);

  py::class_<LossComponents>(m, "LossComponents")
      .def_readonly("reprojection", &LossComponents::reprojection)
      .def_readonly("surface", &LossComponents::surface)
      .def_readonly("collision", &LossComponents::collision)
      .def_readonly("total", &LossComponents::total);

  py::class_<LossTraceEntry>(m, "LossTraceEntry")
      .def_readonly("step", &LossTraceEntry::step)
      .def_readonly("reprojection", &LossTraceEntry::reprojection)
      .def_readonly("surface", &LossTraceEntry::surface)
      .def_readonly("collision", &LossTraceEntry::collision)
      .def_readonly("total", &LossTraceEntry::total);

  py::class_<SceneSolution>(m, "SceneSolution")
      .def(py::init<>())
      .def_readwrite("transforms", &SceneSolution::transforms)
      .def_readwrite("floor", &SceneSolution::floor)
      .def_readonly("loss_trace", &SceneSolution::loss_trace)
      .def_readonly("inliers", &SceneSolution::inliers)
      .def_readonly("matching_scores", &SceneSolution::matching_scores)
      .def_readonly("neglected", &SceneSolution::neglected)
      .def_readonly("diverged", &SceneSolution::diverged)
      .def_readonly("selected_step", &SceneSolution::selected_step);

  m.def("bbox_iou_3d", &bbox_iou_3d);
  m.def("transform_box", &transform_box);
  m.def("total_loss",
        [](const CameraIntrinsics& k, const std::vector<SceneObject>& objects,
           const std::vector<RigidTransform>& transforms, const Plane& floor,
           const std::vector<std::vector<Correspondence>>& corrs, const SiPnpConfig& cfg) {
          return total_loss(k, bodies_of(objects), transforms, floor, corrs, cfg);
        },
        py::arg("camera"), py::arg("objects"), py::arg("transforms"), py::arg("floor"), py::arg("correspondences"),
        py::arg("config") = SiPnpConfig{});
  m.def("optimize",
        [](const CameraIntrinsics& k, const std::vector<SceneObject>& objects, const std::vector<RigidTransform>& init,
           const std::vector<std::vector<Correspondence>>& corrs, const SiPnpConfig& cfg) {
          return optimize(k, std::span<const SceneObject>(objects), init, corrs, cfg);
        },
        py::arg("camera"), py::arg("objects"), py::arg("init"), py::arg("correspondences"),
        py::arg("config") = SiPnpConfig{});

  py::class_<SceneSpec>(m, "SceneSpec")
      .def(py::init<>())
      .def_readwrite("description", &SceneSpec::description)
      .def_readwrite("objects", &SceneSpec::objects)
      .def_readwrite("camera", &SceneSpec::camera)
      .def_readwrite("correspondences", &SceneSpec::correspondences);

  py::class_<ArrangeConfig>(m, "ArrangeConfig")
      .def(py::init<>())
      .def_readwrite("sipnp", &ArrangeConfig::sipnp)
      .def_readwrite("ransac", &ArrangeConfig::ransac)
      .def_readwrite("neglect_threshold", &ArrangeConfig::neglect_threshold);

  m.def("arrange_scene", &arrange_scene, py::arg("spec"), py::arg("config") = ArrangeConfig{});
  m.def("baseline_uniform",
        [](const std::vector<SceneObject>& o, std::uint64_t seed) { return baseline_uniform(o, seed); },
        py::arg("objects"), py::arg("seed"));
  m.def("baseline_circular",
        [](const std::vector<SceneObject>& o, double radius) { return baseline_circular(o, radius); },
        py::arg("objects"), py::arg("radius"));

  py::class_<SynthConfig>(m, "SynthConfig")
      .def(py::init<>())
      .def_readwrite("n_objects", &SynthConfig::n_objects)
      .def_readwrite("keypoints_per_object", &SynthConfig::keypoints_per_object)
      .def_readwrite("noise_sigma_px", &SynthConfig::noise_sigma_px)
      .def_readwrite("outlier_fraction", &SynthConfig::outlier_fraction)
      .def_readwrite("scene_extent", &SynthConfig::scene_extent)
      .def_readwrite("seed", &SynthConfig::seed)
      .def_readwrite("neglected_objects", &SynthConfig::neglected_objects)
      .def_readwrite("inlier_similarity", &SynthConfig::inlier_similarity);

  py::class_<PoseError>(m, "PoseError")
      .def_readonly("rotation_deg", &PoseError::rotation_deg)
      .def_readonly("translation", &PoseError::translation);

  py::class_<GroundTruthScene>(m, "GroundTruthScene")
      .def_readonly("objects", &GroundTruthScene::objects)
      .def_readonly("true_transforms", &GroundTruthScene::true_transforms)
      .def_readonly("camera_from_world", &GroundTruthScene::camera_from_world)
      .def_readonly("camera", &GroundTruthScene::camera)
      .def_readonly("scene_extent", &GroundTruthScene::scene_extent)
      .def("camera_transform", &GroundTruthScene::camera_transform)
      .def("to_spec", &GroundTruthScene::to_spec);

  m.def("generate_scene", &generate_scene, py::arg("config"));
  m.def("pose_error", &pose_error, py::arg("truth"), py::arg("estimate"));

  m.def("dump_solution", &dump_solution);
  m.def("parse_solution", &parse_solution);

  m.def("run_cli",
        [](const std::vector<std::string>& args) {
          std::vector<std::string> full{"layoutpnp"};
          full.insert(full.end(), args.begin(), args.end());
          std::ostringstream out, err;
          int code = 0;
          {
            py::gil_scoped_release release;
            code = run_cli(full, out, err);
          }
          return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs one command line; returns (exit_code, stdout, stderr).");
}
