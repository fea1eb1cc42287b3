#include "doctest.h"

#include "vprism/io.hpp"
#include "vprism/pipeline.hpp"
#include "vprism/recon_eval.hpp"
#include "vprism/synth.hpp"

#include <algorithm>
#include <cmath>

using namespace vprism;

namespace {

struct Fitted {
  SceneSpec scene;
  RenderedCloud rendered;
  BuildResult build;
};

const Fitted& one_sphere() {
  static const Fitted f = [] {
    SceneSpec scene = scene_preset("one-sphere");
    RenderedCloud rc = raycast_scene(scene.oracle, scene.camera);
    Hyperparams p;
    p.rng_seed = 1;
    BuildResult b = build_model(rc.cloud, p);
    return Fitted{scene, rc, std::move(b)};
  }();
  return f;
}

}  // namespace

TEST_CASE("one-sphere reconstruction hugs the true surface") {
  const Fitted& f = one_sphere();
  const MarchingCubesResult mc = reconstruct_object(f.build.model, 1, std::nullopt, 0.01, 0.5);
  REQUIRE_FALSE(mc.empty);
  const Shape& sphere = f.scene.oracle.object(1).shape;
  double worst = 0.0;
  std::size_t far = 0;
  for (const auto& v : mc.mesh.vertices) {
    const double d = std::abs(signed_distance(sphere, v));
    worst = std::max(worst, d);
    far += d > 0.02;
  }
  INFO("vertices farther than 2 cm: " << far << " of " << mc.mesh.vertices.size() << ", worst " << worst);
  CHECK(worst <= 0.02);

  const MarchingCubesResult none = reconstruct_object(f.build.model, 1, std::nullopt, 0.01, 0.999);
  CHECK(none.empty);
}

TEST_CASE("one-sphere evaluation") {
  const Fitted& f = one_sphere();
  EvalOptions opt;
  Rng rng(2);
  const EvalReport r = evaluate_scene(f.build.model, f.scene.oracle, f.rendered.class_to_object, opt, rng);
  CHECK(r.mean_iou >= 0.5);
  REQUIRE(r.mean_chamfer.has_value());
  CHECK(*r.mean_chamfer <= 0.02);
}

TEST_CASE("one-sphere entropy is higher behind the sphere") {
  const Fitted& f = one_sphere();
  const auto& sphere = std::get<Sphere>(f.scene.oracle.object(1).shape);
  SliceSpec spec;
  spec.origin = Point3(sphere.center.x(), sphere.center.y(), sphere.center.z());
  spec.extent = 0.4;
  spec.resolution = 41;
  const EntropySlice slice = entropy_slice(f.build.model, spec);
  const Point3 o = f.scene.camera.origin;
  double occ = 0.0, vis = 0.0;
  std::size_t n_occ = 0, n_vis = 0;
  for (std::size_t r = 0; r < spec.resolution; ++r)
    for (std::size_t c = 0; c < spec.resolution; ++c) {
      const Point3 q = spec.pixel(r, c);
      if (f.scene.oracle.occupancy_label(q) != 0 || !f.scene.camera.in_view(q)) continue;
      const Point3 d = (q - o).normalized();
      const double len = (q - o).norm();
      const auto hit = f.scene.oracle.cast(o, d);
      if (!hit) continue;
      const double h = slice.values[r * spec.resolution + c];
      if (hit->t < len - 1e-6 && hit->label == 1) {
        occ += h;
        ++n_occ;
      } else if (hit->t > len + 1e-6) {
        vis += h;
        ++n_vis;
      }
    }
  REQUIRE(n_occ > 0);
  REQUIRE(n_vis > 0);
  CHECK(occ / n_occ > vis / n_vis);
}

TEST_CASE("three-object reconstructions do not interlock") {
  const SceneSpec scene = scene_preset("three-object");
  const RenderedCloud rc = raycast_scene(scene.oracle, scene.camera);
  Hyperparams p;
  p.rng_seed = 2;
  const PosteriorModel m = build_model(rc.cloud, p).model;
  for (ClassIndex a = 1; a < m.num_classes(); ++a) {
    const MarchingCubesResult mc = reconstruct_object(m, a, std::nullopt, 0.01, 0.5);
    REQUIRE_FALSE(mc.empty);
    for (ClassIndex b = 1; b < m.num_classes(); ++b) {
      if (a == b) continue;
      const Shape& other = scene.oracle.object(rc.class_to_object[b]).shape;
      std::size_t inside = 0;
      for (const auto& v : mc.mesh.vertices) inside += signed_distance(other, v) < 0.0 ? 1 : 0;
      CHECK(inside == 0);
    }
  }
}

TEST_CASE("builds are deterministic") {
  const SceneSpec scene = scene_preset("one-sphere");
  const RenderedCloud rc = raycast_scene(scene.oracle, scene.camera);
  Hyperparams p;
  p.rng_seed = 1;
  const BuildResult again = build_model(rc.cloud, p);
  CHECK(model_digest(again.model) == model_digest(one_sphere().build.model));
  p.rng_seed = 2;
  CHECK(model_digest(build_model(rc.cloud, p).model) != model_digest(again.model));
  CHECK(again.stats.hinges == again.model.hinges.hinges.size());
  CHECK(again.stats.negative_samples < again.stats.training_samples);
}

TEST_CASE("diagonal covariance agrees with the full model") {
  const Fitted& f = one_sphere();
  Hyperparams p = f.build.model.params;
  p.covariance_mode = CovarianceMode::kDiagonal;
  const PosteriorModel diag = build_model(f.rendered.cloud, p).model;
  Rng rng(6);
  std::vector<Point3> xs;
  for (int i = 0; i < 2000; ++i) xs.emplace_back(rng.uniform(-0.15, 0.15), rng.uniform(-0.15, 0.15), rng.uniform(0, 0.2));
  const Eigen::MatrixXd a = BayesianPredictor(f.build.model).predict_batch(xs);
  const Eigen::MatrixXd b = BayesianPredictor(diag).predict_batch(xs);
  CHECK((a - b).cwiseAbs().mean() <= 0.05);
}

TEST_CASE("fit trace decreases on a real scene") {
  const SceneSpec scene = scene_preset("two-sphere-oblique");
  const RenderedCloud rc = raycast_scene(scene.oracle, scene.camera);
  Hyperparams p;
  p.em_iterations = 4;
  FitTrace trace;
  build_model(rc.cloud, p, &trace);
  REQUIRE(trace.negative_elbo.size() == 4);
  for (std::size_t i = 1; i < 4; ++i) {
    CHECK(trace.negative_elbo[i] <= trace.negative_elbo[i - 1] + 1e-8 * std::abs(trace.negative_elbo[i - 1]));
  }
}
