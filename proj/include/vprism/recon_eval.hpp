#pragma once

#include "vprism/core.hpp"
#include "vprism/inference.hpp"
#include "vprism/mesh.hpp"
#include "vprism/model.hpp"
#include "vprism/synth.hpp"

#include "json.hpp"

#include <optional>
#include <vector>

namespace vprism {

/// Default reconstruction region: the observed object AABB padded by 2 r_obj / 5.
Aabb default_reconstruction_bounds(const PosteriorModel& model, ClassIndex k);

/// Marching cubes on x -> P(class k | x) at level tau.
MarchingCubesResult reconstruct_object(const Predictor& predictor, ClassIndex k, const Aabb& bounds,
                                       double cell, double tau);
MarchingCubesResult reconstruct_object(const PosteriorModel& model, ClassIndex k,
                                       const std::optional<Aabb>& bounds, double cell, double tau);

struct IouGrid {
  Aabb bounds;
  double cell = 0.01;
};

/// Truth AABB of the object padded by 25% of its extent on every side, 1 cm cells.
IouGrid default_iou_grid(const SceneOracle& oracle, ClassIndex object_id, double cell = 0.01);

/// Intersection over union on the cell centers of grid. Class k of the
/// predictor is compared with oracle object object_id. Returns 1 when both
/// sets are empty.
double iou(const Predictor& predictor, const SceneOracle& oracle, ClassIndex k, ClassIndex object_id,
           const IouGrid& grid, double threshold = 0.5);

/// Symmetric mean nearest-neighbour distance between n_samples surface
/// samples of each mesh. Both meshes are sampled with one seed drawn from rng.
/// Throws InputError for an empty mesh.
double chamfer(const TriangleMesh& a, const TriangleMesh& b, std::size_t n_samples, Rng& rng);
/// Same, with the sampling seed given directly.
double chamfer(const TriangleMesh& a, const TriangleMesh& b, std::size_t n_samples, std::uint64_t seed);

struct EvalOptions {
  double recon_cell = 0.01;
  double tau = 0.5;
  double iou_cell = 0.01;
  double iou_threshold = 0.5;
  double truth_cell = 0.005;
  std::size_t chamfer_samples = 2048;
};

struct ObjectReport {
  ClassIndex class_index = 0;
  ClassIndex object_id = 0;
  double iou = 0.0;
  std::optional<double> chamfer;  // absent when the reconstruction is empty
  std::size_t vertices = 0;
  std::size_t faces = 0;
  std::size_t degenerate_dropped = 0;
  bool empty_mesh = false;
};

struct EvalReport {
  std::vector<ObjectReport> objects;
  double mean_iou = 0.0;
  std::optional<double> mean_chamfer;  // over objects with a reconstruction
  std::size_t missing_reconstructions = 0;

  nlohmann::json to_json() const;
};

/// Recomputes the aggregates from the per-object entries.
void finalize(EvalReport& report);

/// Per-object metrics. Class k of the predictor is scored against oracle
/// object class_to_object[k], reconstructed inside recon_bounds[k - 1].
EvalReport evaluate_scene(const Predictor& predictor, const SceneOracle& oracle,
                          const std::vector<ClassIndex>& class_to_object,
                          const std::vector<Aabb>& recon_bounds, const EvalOptions& options, Rng& rng);
EvalReport evaluate_scene(const PosteriorModel& model, const SceneOracle& oracle,
                          const std::vector<ClassIndex>& class_to_object, const EvalOptions& options,
                          Rng& rng);

}  // namespace vprism
