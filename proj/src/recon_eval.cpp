#include "vprism/recon_eval.hpp"

#include <cmath>
#include <limits>

namespace vprism {

Aabb default_reconstruction_bounds(const PosteriorModel& model, ClassIndex k) {
  if (k == 0 || k >= model.num_classes()) throw InputError("object class out of range");
  if (model.object_bounds.size() < k) throw InputError("model carries no bounds for class " + std::to_string(k));
  return model.object_bounds[k - 1].padded(2.0 * model.params.r_obj / 5.0);
}

MarchingCubesResult reconstruct_object(const Predictor& predictor, ClassIndex k, const Aabb& bounds,
                                       double cell, double tau) {
  if (k == 0 || k >= predictor.num_classes()) throw InputError("object class out of range");
  if (!(tau > 0.0 && tau < 1.0)) throw InputError("tau must lie in (0, 1)");
  BatchField field = [&predictor, k](std::span<const Point3> xs) {
    const Eigen::MatrixXd p = predictor.predict_batch(xs);
    std::vector<double> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = p(static_cast<Eigen::Index>(i), k);
    return out;
  };
  return marching_cubes(field, bounds, cell, tau);
}

MarchingCubesResult reconstruct_object(const PosteriorModel& model, ClassIndex k,
                                       const std::optional<Aabb>& bounds, double cell, double tau) {
  const BayesianPredictor predictor(model);
  return reconstruct_object(predictor, k, bounds ? *bounds : default_reconstruction_bounds(model, k), cell,
                            tau);
}

IouGrid default_iou_grid(const SceneOracle& oracle, ClassIndex object_id, double cell) {
  const Aabb box = bounding_box(oracle.object(object_id).shape);
  return {box.padded(Point3(0.25 * box.extent())), cell};
}

double iou(const Predictor& predictor, const SceneOracle& oracle, ClassIndex k, ClassIndex object_id,
           const IouGrid& grid, double threshold) {
  if (k >= predictor.num_classes()) throw InputError("class out of range for the predictor");
  if (!(grid.cell > 0.0)) throw InputError("IoU cell must be positive");
  std::array<std::size_t, 3> n{};
  for (int d = 0; d < 3; ++d) {
    n[d] = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(grid.bounds.extent()[d] / grid.cell - 1e-9)));
  }
  std::size_t inter = 0, uni = 0;
  std::vector<Point3> slab;
  slab.reserve(n[0] * n[1]);
  for (std::size_t z = 0; z < n[2]; ++z) {
    slab.clear();
    for (std::size_t y = 0; y < n[1]; ++y)
      for (std::size_t x = 0; x < n[0]; ++x) {
        slab.push_back(grid.bounds.lo + grid.cell * Point3(static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5,
                                                           static_cast<double>(z) + 0.5));
      }
    const Eigen::MatrixXd p = predictor.predict_batch(slab);
    for (std::size_t i = 0; i < slab.size(); ++i) {
      const bool pred = p(static_cast<Eigen::Index>(i), k) >= threshold;
      const bool truth = oracle.occupancy_label(slab[i]) == object_id;
      inter += pred && truth;
      uni += pred || truth;
    }
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

double mean_nearest(const std::vector<Point3>& from, const std::vector<Point3>& to) {
  double total = 0.0;
  for (const auto& p : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : to) best = std::min(best, (p - q).squaredNorm());
    total += std::sqrt(best);
  }
  return total / static_cast<double>(from.size());
}

}  // namespace

double chamfer(const TriangleMesh& a, const TriangleMesh& b, std::size_t n_samples, std::uint64_t seed) {
  if (a.empty() || b.empty()) throw InputError("chamfer distance needs two non-empty meshes");
  if (n_samples == 0) throw InputError("chamfer distance needs at least one sample");
  Rng ra(seed), rb(seed);
  const std::vector<Point3> pa = a.sample_surface(n_samples, ra);
  const std::vector<Point3> pb = b.sample_surface(n_samples, rb);
  return 0.5 * (mean_nearest(pa, pb) + mean_nearest(pb, pa));
}

double chamfer(const TriangleMesh& a, const TriangleMesh& b, std::size_t n_samples, Rng& rng) {
  return chamfer(a, b, n_samples, rng.bits());
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json objs = nlohmann::json::array();
  for (const auto& o : objects) {
    objs.push_back({{"class", o.class_index},
                    {"object_id", o.object_id},
                    {"iou", o.iou},
                    {"chamfer", o.chamfer ? nlohmann::json(*o.chamfer) : nlohmann::json(nullptr)},
                    {"empty_mesh", o.empty_mesh},
                    {"vertices", o.vertices},
                    {"faces", o.faces},
                    {"degenerate_dropped", o.degenerate_dropped}});
  }
  return {{"objects", objs},
          {"mean_iou", mean_iou},
          {"mean_chamfer", mean_chamfer ? nlohmann::json(*mean_chamfer) : nlohmann::json(nullptr)},
          {"missing_reconstructions", missing_reconstructions},
          {"chamfer_form", "symmetric mean of nearest-neighbour distances"}};
}

void finalize(EvalReport& report) {
  double iou_sum = 0.0, ch_sum = 0.0;
  std::size_t ch_n = 0;
  report.missing_reconstructions = 0;
  for (const auto& o : report.objects) {
    iou_sum += o.iou;
    if (o.chamfer) {
      ch_sum += *o.chamfer;
      ++ch_n;
    } else {
      ++report.missing_reconstructions;
    }
  }
  report.mean_iou = report.objects.empty() ? 0.0 : iou_sum / static_cast<double>(report.objects.size());
  report.mean_chamfer = ch_n ? std::optional<double>(ch_sum / static_cast<double>(ch_n)) : std::nullopt;
}

EvalReport evaluate_scene(const Predictor& predictor, const SceneOracle& oracle,
                          const std::vector<ClassIndex>& class_to_object,
                          const std::vector<Aabb>& recon_bounds, const EvalOptions& options, Rng& rng) {
  if (class_to_object.size() != predictor.num_classes()) {
    throw InputError("class count mismatch: predictor has " + std::to_string(predictor.num_classes()) +
                     " classes, mapping has " + std::to_string(class_to_object.size()));
  }
  if (recon_bounds.size() + 1 != class_to_object.size()) throw InputError("one bounding box per object class required");
  EvalReport report;
  for (ClassIndex k = 1; k < class_to_object.size(); ++k) {
    const ClassIndex obj = class_to_object[k];
    ObjectReport o;
    o.class_index = k;
    o.object_id = obj;
    o.iou = iou(predictor, oracle, k, obj, default_iou_grid(oracle, obj, options.iou_cell), options.iou_threshold);
    const MarchingCubesResult mc = reconstruct_object(predictor, k, recon_bounds[k - 1], options.recon_cell, options.tau);
    o.vertices = mc.mesh.vertices.size();
    o.faces = mc.mesh.triangles.size();
    o.degenerate_dropped = mc.degenerate_dropped;
    o.empty_mesh = mc.empty;
    const std::uint64_t seed = rng.bits();
    if (!mc.empty) {
      o.chamfer = chamfer(mc.mesh, ground_truth_mesh(oracle, obj, options.truth_cell), options.chamfer_samples, seed);
    }
    report.objects.push_back(o);
  }
  finalize(report);
  return report;
}

EvalReport evaluate_scene(const PosteriorModel& model, const SceneOracle& oracle,
                          const std::vector<ClassIndex>& class_to_object, const EvalOptions& options,
                          Rng& rng) {
  std::vector<Aabb> bounds;
  for (ClassIndex k = 1; k < model.num_classes(); ++k) bounds.push_back(default_reconstruction_bounds(model, k));
  return evaluate_scene(BayesianPredictor(model), oracle, class_to_object, bounds, options, rng);
}

}  // namespace vprism
