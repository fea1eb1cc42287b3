#include "vprism/inference.hpp"
#include "vprism/io.hpp"
#include "vprism/model.hpp"
#include "vprism/pipeline.hpp"
#include "vprism/recon_eval.hpp"
#include "vprism/synth.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <utility>

namespace py = pybind11;
using namespace vprism;

namespace {

using PointRows = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

std::vector<Point3> to_points(const Eigen::Ref<const PointRows>& rows) {
  std::vector<Point3> out(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index i = 0; i < rows.rows(); ++i) out[static_cast<std::size_t>(i)] = rows.row(i).transpose();
  return out;
}

PointRows from_points(const std::vector<Point3>& pts) {
  PointRows out(static_cast<Eigen::Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  return out;
}

Hyperparams params_from(const std::string& json_text) {
  return json_text.empty() ? Hyperparams{} : hyperparams_from_json(nlohmann::json::parse(json_text));
}

std::string stats_json(const BuildStats& s) {
  return nlohmann::json{{"observed_points", s.observed_points},
                        {"training_samples", s.training_samples},
                        {"negative_samples", s.negative_samples},
                        {"hinges", s.hinges},
                        {"sampling_seconds", s.sampling_seconds},
                        {"fit_seconds", s.fit_seconds}}
      .dump();
}

py::tuple mesh_tuple(const MarchingCubesResult& mc) {
  Eigen::Matrix<std::uint32_t, Eigen::Dynamic, 3, Eigen::RowMajor> faces(
      static_cast<Eigen::Index>(mc.mesh.triangles.size()), 3);
  for (std::size_t t = 0; t < mc.mesh.triangles.size(); ++t)
    for (int j = 0; j < 3; ++j) faces(static_cast<Eigen::Index>(t), j) = mc.mesh.triangles[t][static_cast<std::size_t>(j)];
  return py::make_tuple(from_points(mc.mesh.vertices), faces);
}

}  // namespace

PYBIND11_MODULE(_vprism, m) {
  m.doc() = "Probabilistic multi-object scene reconstruction from segmented point clouds";

  auto input_error = py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  (void)input_error;

  py::class_<SegmentedCloud>(m, "Cloud")
      .def(py::init([](const Eigen::Ref<const PointRows>& points, std::vector<ClassIndex> labels,
                       const Point3& camera_origin, std::size_t num_classes) {
             return SegmentedCloud(to_points(points), std::move(labels), camera_origin, num_classes);
           }),
           py::arg("points"), py::arg("labels"), py::arg("camera_origin"), py::arg("num_classes"))
      .def_property_readonly("points", [](const SegmentedCloud& c) { return from_points(c.points()); })
      .def_property_readonly("labels", [](const SegmentedCloud& c) { return c.labels(); })
      .def_property_readonly("camera_origin", [](const SegmentedCloud& c) { return Point3(c.camera_origin()); })
      .def_property_readonly("num_classes", &SegmentedCloud::num_classes)
      .def("__len__", &SegmentedCloud::size)
      .def("digest", &cloud_digest)
      .def("save", [](const SegmentedCloud& c, const std::string& path) { write_cloud_file(path, c); }, py::arg("path"))
      .def_static("load", &read_cloud_file, py::arg("path"));

  py::class_<SceneSpec>(m, "Scene")
      .def_static("preset", &scene_preset, py::arg("name"))
      .def_static("random", &random_scene, py::arg("seed"), py::arg("max_objects") = 3)
      .def_static("from_json", [](const std::string& text) { return scene_from_json(nlohmann::json::parse(text)); })
      .def("to_json", [](const SceneSpec& s) { return scene_to_json(s).dump(); })
      .def_property_readonly("num_objects", [](const SceneSpec& s) { return s.oracle.num_objects(); })
      .def_property_readonly("camera_origin", [](const SceneSpec& s) { return Point3(s.camera.origin); })
      .def(
          "render",
          [](const SceneSpec& s, std::uint64_t noise_seed) {
            RenderedCloud rc = raycast_scene(s.oracle, s.camera, s.depth_noise, noise_seed);
            return py::make_tuple(std::move(rc.cloud), rc.class_to_object);
          },
          py::arg("noise_seed") = 0, "Returns (cloud, class_to_object).")
      .def(
          "occupancy",
          [](const SceneSpec& s, const Eigen::Ref<const PointRows>& points) {
            std::vector<ClassIndex> out(static_cast<std::size_t>(points.rows()));
            for (Eigen::Index i = 0; i < points.rows(); ++i)
              out[static_cast<std::size_t>(i)] = s.oracle.occupancy_label(points.row(i).transpose());
            return out;
          },
          py::arg("points"));

  m.def("preset_names", &preset_names);
  m.def("default_hyperparams", [] { return hyperparams_to_json(Hyperparams{}).dump(); },
        "Default hyperparameters as a JSON string.");

  py::class_<PosteriorModel>(m, "Model")
      .def_property_readonly("num_classes", &PosteriorModel::num_classes)
      .def_property_readonly("dim", &PosteriorModel::dim)
      .def_property_readonly("hyperparams", [](const PosteriorModel& pm) { return hyperparams_to_json(pm.params).dump(); })
      .def("digest", &model_digest)
      .def("to_json", &model_to_string)
      .def("save", [](const PosteriorModel& pm, const std::string& path) { write_model_file(path, pm); }, py::arg("path"))
      .def_static("load", &read_model_file, py::arg("path"))
      .def(
          "predict",
          [](const PosteriorModel& pm, const Eigen::Ref<const PointRows>& points) {
            const std::vector<Point3> pts = to_points(points);
            py::gil_scoped_release release;
            return BayesianPredictor(pm).predict_batch(pts);
          },
          py::arg("points"), "Class probabilities, one row per query point.")
      .def(
          "predict_mc",
          [](const PosteriorModel& pm, const Point3& x, std::size_t num_samples, std::uint64_t seed) {
            Rng rng(seed);
            return Eigen::VectorXd(predict_mc(pm, x, num_samples, rng).probs);
          },
          py::arg("point"), py::arg("num_samples"), py::arg("seed") = 0)
      .def(
          "entropy_slice",
          [](const PosteriorModel& pm, const Point3& origin, const Point3& axis_u, const Point3& axis_v, double extent,
             std::size_t resolution) {
            SliceSpec spec{origin, axis_u, axis_v, extent, resolution};
            const EntropySlice s = entropy_slice(pm, spec);
            return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                       s.values.data(), static_cast<Eigen::Index>(resolution), static_cast<Eigen::Index>(resolution))
                .eval();
          },
          py::arg("origin") = Point3(0, 0, 0.05), py::arg("axis_u") = Point3::UnitX(),
          py::arg("axis_v") = Point3::UnitY(), py::arg("extent") = 0.5, py::arg("resolution") = 64,
          "Entropy in nats, indexed [row, col].")
      .def(
          "reconstruct",
          [](const PosteriorModel& pm, ClassIndex k, double tau, double cell) {
            return mesh_tuple(reconstruct_object(pm, k, std::nullopt, cell, tau));
          },
          py::arg("class_index"), py::arg("tau") = 0.5, py::arg("cell") = 0.01, "Returns (vertices, faces).");

  m.def(
      "build_model",
      [](const SegmentedCloud& cloud, const std::string& hyperparams) {
        const Hyperparams p = params_from(hyperparams);
        BuildResult b = [&] {
          py::gil_scoped_release release;
          return build_model(cloud, p);
        }();
        return py::make_tuple(std::move(b.model), stats_json(b.stats));
      },
      py::arg("cloud"), py::arg("hyperparams") = "",
      "Fits a model. hyperparams is a JSON object string of overrides. Returns (model, stats JSON).");

  m.def(
      "evaluate",
      [](const PosteriorModel& pm, const SceneSpec& scene, const std::vector<ClassIndex>& class_to_object,
         std::uint64_t seed) {
        Rng rng(seed);
        nlohmann::json report = evaluate_scene(pm, scene.oracle, class_to_object, EvalOptions{}, rng).to_json();
        report["predictor"] = "bayesian";
        return report.dump();
      },
      py::arg("model"), py::arg("scene"), py::arg("class_to_object"), py::arg("seed") = 0,
      "Evaluation report as a JSON string.");

  m.def("bouchard_bound", [](const std::vector<double>& z, double alpha, const std::vector<double>& xi) {
    return bouchard_bound(z, alpha, xi);
  }, py::arg("z"), py::arg("alpha"), py::arg("xi"));
  m.def("log_sum_exp", [](const std::vector<double>& z) { return log_sum_exp(z); }, py::arg("z"));
  m.def("entropy", [](const Eigen::VectorXd& p) { return entropy(p); }, py::arg("probs"));
}
