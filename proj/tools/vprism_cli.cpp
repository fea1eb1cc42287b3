// vprism command-line interface: synth, build, reconstruct, entropy-slice, eval.
#include "vprism/core.hpp"
#include "vprism/inference.hpp"
#include "vprism/io.hpp"
#include "vprism/pipeline.hpp"
#include "vprism/recon_eval.hpp"
#include "vprism/synth.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vprism;

namespace {

std::uint64_t default_seed() {
  if (const char* env = std::getenv("VPRISM_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw InputError(std::string("VPRISM_SEED is not an integer: ") + env);
    }
  }
  return 0;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << j.dump(2) << '\n';
}

Point3 to_point(const std::vector<double>& v, const std::string& what) {
  if (v.size() != 3) throw InputError(what + " needs three values");
  return {v[0], v[1], v[2]};
}

std::vector<ClassIndex> mapping_from_json(const json& j) {
  if (!j.contains("class_to_object") || !j["class_to_object"].is_array()) {
    throw InputError("oracle sidecar lacks 'class_to_object'");
  }
  return j["class_to_object"].get<std::vector<ClassIndex>>();
}

struct SynthArgs {
  std::string scene, preset, out, oracle;
  std::vector<double> origin, look_at;
  double fov_deg = 0.0;
  std::size_t width = 0, height = 0;
  double noise = -1.0;
};

int cmd_synth(const SynthArgs& a, std::uint64_t seed) {
  if (a.scene.empty() == a.preset.empty()) throw InputError("give exactly one of --scene or --preset");
  SceneSpec spec = a.scene.empty() ? scene_preset(a.preset) : scene_from_json(read_json_file(a.scene));
  if (!a.origin.empty()) spec.camera.origin = to_point(a.origin, "--camera-origin");
  if (!a.look_at.empty()) spec.camera.look_at = to_point(a.look_at, "--look-at");
  if (a.fov_deg > 0.0) spec.camera.horizontal_fov = a.fov_deg * std::numbers::pi / 180.0;
  if (a.width) spec.camera.image_width = a.width;
  if (a.height) spec.camera.image_height = a.height;
  if (a.noise >= 0.0) spec.depth_noise = a.noise;

  const RenderedCloud rendered = raycast_scene(spec.oracle, spec.camera, spec.depth_noise, seed);
  write_cloud_file(a.out, rendered.cloud);
  const std::string oracle_path = a.oracle.empty() ? a.out + ".oracle.json" : a.oracle;
  json sidecar = oracle_to_json(spec.oracle);
  sidecar["class_to_object"] = rendered.class_to_object;
  sidecar["camera"] = camera_to_json(spec.camera);
  write_json_file(oracle_path, sidecar);

  std::cout << json{{"cloud", a.out},
                    {"oracle", oracle_path},
                    {"points", rendered.cloud.size()},
                    {"num_classes", rendered.cloud.num_classes()},
                    {"class_to_object", rendered.class_to_object},
                    {"digest", cloud_digest(rendered.cloud)}}
                   .dump()
            << '\n';
  return 0;
}

struct BuildArgs {
  std::string cloud, out, sampling = "vprism", covariance = "full";
  Hyperparams params;
};

int cmd_build(BuildArgs a, std::uint64_t seed) {
  a.params.rng_seed = seed;
  a.params.sampling = sampling_mode_from_string(a.sampling);
  a.params.covariance_mode = covariance_mode_from_string(a.covariance);
  const SegmentedCloud cloud = read_cloud_file(a.cloud);
  std::cerr << "building model from " << cloud.size() << " points, " << cloud.num_classes() << " classes\n";
  const BuildResult r = build_model(cloud, a.params);
  write_model_file(a.out, r.model);
  std::cout << json{{"model", a.out},
                    {"digest", model_digest(r.model)},
                    {"sampling", a.sampling},
                    {"observed_points", r.stats.observed_points},
                    {"training_samples", r.stats.training_samples},
                    {"negative_samples", r.stats.negative_samples},
                    {"hinges", r.stats.hinges},
                    {"sampling_seconds", r.stats.sampling_seconds},
                    {"fit_seconds", r.stats.fit_seconds},
                    {"hyperparams", hyperparams_to_json(r.model.params)}}
                   .dump()
            << '\n';
  return 0;
}

int cmd_reconstruct(const std::string& model_path, const std::string& out_dir, double tau, double cell) {
  const PosteriorModel model = read_model_file(model_path);
  if (tau <= 0.0) tau = model.params.level_set_tau;
  fs::create_directories(out_dir);
  const BayesianPredictor predictor(model);
  json objects = json::array();
  for (ClassIndex k = 1; k < model.num_classes(); ++k) {
    const MarchingCubesResult mc = reconstruct_object(predictor, k, default_reconstruction_bounds(model, k), cell, tau);
    const std::string path = (fs::path(out_dir) / ("object_" + std::to_string(k) + ".obj")).string();
    write_obj_file(path, mc.mesh);
    if (mc.empty) std::cerr << "class " << k << ": empty reconstruction at tau " << tau << '\n';
    objects.push_back({{"class", k},
                       {"path", path},
                       {"vertices", mc.mesh.vertices.size()},
                       {"faces", mc.mesh.triangles.size()},
                       {"degenerate_dropped", mc.degenerate_dropped},
                       {"empty", mc.empty}});
  }
  std::cout << json{{"tau", tau}, {"cell", cell}, {"objects", objects}}.dump() << '\n';
  return 0;
}

struct SliceArgs {
  std::string model, out, sidecar;
  std::vector<double> origin{0.0, 0.0, 0.05}, axis_u{1.0, 0.0, 0.0}, axis_v{0.0, 1.0, 0.0};
  double extent = 0.5;
  std::size_t resolution = 64;
};

int cmd_entropy_slice(const SliceArgs& a) {
  const PosteriorModel model = read_model_file(a.model);
  SliceSpec spec;
  spec.origin = to_point(a.origin, "--origin");
  spec.axis_u = to_point(a.axis_u, "--axis-u");
  spec.axis_v = to_point(a.axis_v, "--axis-v");
  spec.extent = a.extent;
  spec.resolution = a.resolution;
  const EntropySlice slice = entropy_slice(model, spec);
  write_pgm_file(a.out, slice);
  const std::string sidecar_path = a.sidecar.empty() ? a.out + ".json" : a.sidecar;
  const json sidecar = slice_sidecar(slice);
  write_json_file(sidecar_path, sidecar);
  json summary = sidecar;
  summary["pgm"] = a.out;
  summary["sidecar"] = sidecar_path;
  std::cout << summary.dump() << '\n';
  return 0;
}

struct EvalArgs {
  std::string model, oracle, out;
  EvalOptions options;
  bool perfect = false;
};

int cmd_eval(const EvalArgs& a, std::uint64_t seed) {
  const PosteriorModel model = read_model_file(a.model);
  const json sidecar = read_json_file(a.oracle);
  const SceneOracle oracle = oracle_from_json(sidecar);
  const std::vector<ClassIndex> mapping = mapping_from_json(sidecar);
  if (mapping.size() != model.num_classes()) {
    throw InputError("class count mismatch: model has " + std::to_string(model.num_classes()) +
                     " classes, oracle sidecar maps " + std::to_string(mapping.size()));
  }
  Rng rng = seeded_rng(seed);
  std::vector<Aabb> bounds;
  for (ClassIndex k = 1; k < model.num_classes(); ++k) bounds.push_back(default_reconstruction_bounds(model, k));
  EvalReport report;
  if (a.perfect) {
    report = evaluate_scene(oracle_predictor(oracle, mapping), oracle, mapping, bounds, a.options, rng);
  } else {
    report = evaluate_scene(BayesianPredictor(model), oracle, mapping, bounds, a.options, rng);
  }
  json j = report.to_json();
  j["predictor"] = a.perfect ? "oracle" : "bayesian";
  if (!a.out.empty()) write_json_file(a.out, j);
  std::cout << j.dump() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probabilistic multi-class tabletop maps from one segmented depth cloud"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  bool seed_given = false;
  auto add_seed = [&](CLI::App* sub) {
    sub->add_option_function<std::uint64_t>(
           "--seed", [&](std::uint64_t s) { seed = s, seed_given = true; },
           "Random seed (default: $VPRISM_SEED or 0)");
  };

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Render a synthetic scene into a cloud file plus oracle sidecar");
  s->add_option("--scene", synth.scene, "Scene JSON file");
  s->add_option("--preset", synth.preset, "Built-in scene preset");
  s->add_option("--out", synth.out, "Output cloud path")->required();
  s->add_option("--oracle", synth.oracle, "Oracle sidecar path (default: <out>.oracle.json)");
  s->add_option("--camera-origin", synth.origin, "Camera origin x y z")->expected(3);
  s->add_option("--look-at", synth.look_at, "Camera target x y z")->expected(3);
  s->add_option("--fov", synth.fov_deg, "Horizontal field of view in degrees");
  s->add_option("--width", synth.width, "Image width in pixels");
  s->add_option("--height", synth.height, "Image height in pixels");
  s->add_option("--depth-noise", synth.noise, "Depth noise standard deviation in meters");
  add_seed(s);

  BuildArgs build;
  Hyperparams& hp = build.params;
  auto* b = app.add_subcommand("build", "Fit a posterior map to a cloud file");
  b->add_option("cloud", build.cloud, "Input cloud file")->required();
  b->add_option("--out", build.out, "Output model path")->required();
  b->add_option("--sampling", build.sampling, "Negative sampling mode")
      ->check(CLI::IsMember({"vprism", "bhm", "no-under-table", "fixed-step"}));
  b->add_option("--covariance", build.covariance, "Posterior covariance mode")->check(CLI::IsMember({"full", "diagonal"}));
  b->add_option("--gamma", hp.kernel_gamma, "Kernel gamma (1/m^2)");
  b->add_option("--grid", hp.hinge_grid_spacing, "Hinge grid spacing (m)");
  b->add_option("--surface-hinges", hp.surface_hinges_per_object, "Surface hinges per object");
  b->add_option("--iterations", hp.em_iterations, "EM iterations");
  b->add_option("--r-obj", hp.r_obj, "Object sampling radius (m)");
  b->add_option("--res-surface", hp.subsample_res_surface, "Surface subsampling resolution (m)");
  b->add_option("--res-empty", hp.subsample_res_empty, "Free-space subsampling resolution (m)");
  b->add_option("--strata", hp.ray_strata, "Samples per ray");
  b->add_option("--fixed-step", hp.fixed_step, "Step length for fixed-step sampling (m)");
  b->add_option("--under-table", hp.under_table_samples_per_object, "Under-table samples per object");
  b->add_option("--prior-variance", hp.prior_variance, "Isotropic prior variance");
  b->add_option("--prior-mean", hp.prior_mean_scale, "Prior mean value");
  b->add_option("--kernel-cutoff", hp.kernel_cutoff, "Drop kernel entries below this value (0 keeps all)");
  b->add_option("--max-hinges", hp.max_hinges, "Refuse to build with more hinges than this");
  b->add_option("--ransac-iterations", hp.ransac_iterations, "RANSAC iterations");
  b->add_option("--ransac-threshold", hp.ransac_inlier_threshold, "RANSAC inlier distance (m)");
  b->add_option("--tau", hp.level_set_tau, "Default reconstruction level");
  add_seed(b);

  std::string rec_model, rec_dir;
  double rec_tau = 0.0, rec_cell = 0.01;
  auto* r = app.add_subcommand("reconstruct", "Extract one mesh per object class");
  r->add_option("model", rec_model, "Model file")->required();
  r->add_option("--out-dir", rec_dir, "Directory for OBJ files")->required();
  r->add_option("--tau", rec_tau, "Probability level (default: the model's tau)");
  r->add_option("--cell", rec_cell, "Marching-cubes cell size (m)");

  SliceArgs sl;
  auto* e = app.add_subcommand("entropy-slice", "Write an entropy map of a planar slice as 16-bit PGM");
  e->add_option("model", sl.model, "Model file")->required();
  e->add_option("--out", sl.out, "Output PGM path")->required();
  e->add_option("--sidecar", sl.sidecar, "Sidecar JSON path (default: <out>.json)");
  e->add_option("--origin", sl.origin, "Slice center x y z")->expected(3);
  e->add_option("--axis-u", sl.axis_u, "First in-plane axis")->expected(3);
  e->add_option("--axis-v", sl.axis_v, "Second in-plane axis")->expected(3);
  e->add_option("--extent", sl.extent, "Side length (m)");
  e->add_option("--resolution", sl.resolution, "Pixels per side");

  EvalArgs ev;
  auto* v = app.add_subcommand("eval", "Score a model against an oracle sidecar");
  v->add_option("model", ev.model, "Model file")->required();
  v->add_option("oracle", ev.oracle, "Oracle sidecar JSON")->required();
  v->add_option("--out", ev.out, "Also write the report here");
  v->add_option("--tau", ev.options.tau, "Reconstruction level");
  v->add_option("--cell", ev.options.recon_cell, "Reconstruction cell (m)");
  v->add_option("--iou-cell", ev.options.iou_cell, "IoU grid cell (m)");
  v->add_option("--iou-threshold", ev.options.iou_threshold, "Occupancy threshold for IoU");
  v->add_option("--chamfer-samples", ev.options.chamfer_samples, "Surface samples per mesh");
  v->add_flag("--perfect-oracle", ev.perfect, "Score the ground-truth predictor instead (test hook)");
  add_seed(v);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return 2;
  }

  try {
    if (!seed_given) seed = default_seed();
    if (*s) return cmd_synth(synth, seed);
    if (*b) return cmd_build(build, seed);
    if (*r) return cmd_reconstruct(rec_model, rec_dir, rec_tau, rec_cell);
    if (*e) return cmd_entropy_slice(sl);
    if (*v) return cmd_eval(ev, seed);
  } catch (const InputError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  } catch (const NumericalError& err) {
    std::cerr << "numerical failure: " << err.what() << '\n';
    return 3;
  } catch (const json::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  }
  return 0;
}
