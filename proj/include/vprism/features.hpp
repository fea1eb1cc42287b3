#pragma once

#include "vprism/core.hpp"
#include "vprism/sampling.hpp"

#include <Eigen/Core>

#include <span>
#include <unordered_map>
#include <vector>

namespace vprism {

/// Hinge points of the Gaussian kernel feature map. Grid hinges come first,
/// then surface hinges.
struct HingeSet {
  std::vector<Point3> hinges;
  double kernel_gamma = 1000.0;
  std::size_t grid_count = 0;

  /// Feature dimension: one entry per hinge plus the bias.
  std::size_t dim() const { return hinges.size() + 1; }
};

/// Grid over the padded sample AABB (or params.hinge_bounds) plus up to
/// surface_hinges_per_object observed points per object. Throws InputError if
/// the hinge count exceeds params.max_hinges.
HingeSet generate_hinges(const SegmentedCloud& cloud, const LabeledSamples& samples,
                         const Hyperparams& params, Rng& rng);

/// Dense reference feature vector: exp(-gamma |x - h_j|^2) for every hinge, then 1.
Eigen::VectorXd featurize(const HingeSet& hinges, const Point3& x);

/// Row-compressed feature matrix. Column dim()-1 is the bias and is present in
/// every row; column indices within a row are strictly increasing.
struct FeatureMatrix {
  std::size_t dim = 0;
  std::vector<std::size_t> row_start{0};
  std::vector<std::uint32_t> cols;
  std::vector<double> vals;

  std::size_t rows() const { return row_start.size() - 1; }
  std::span<const std::uint32_t> row_cols(std::size_t i) const {
    return {cols.data() + row_start[i], row_start[i + 1] - row_start[i]};
  }
  std::span<const double> row_vals(std::size_t i) const {
    return {vals.data() + row_start[i], row_start[i + 1] - row_start[i]};
  }
  /// Row i as a dense vector.
  Eigen::VectorXd dense_row(std::size_t i) const;
  Eigen::MatrixXd to_dense() const;
  double row_dot(std::size_t i, const Eigen::Ref<const Eigen::VectorXd>& w) const;
};

/// Rows that share most of their support, densified over the union of their
/// columns. phi is rows.size() x cols.size().
struct FeatureBlock {
  std::vector<std::size_t> rows;
  std::vector<std::uint32_t> cols;
  Eigen::MatrixXd phi;
};

/// Groups rows by their largest kernel entry (the nearest hinge) and splits
/// groups larger than max_rows. Every row lands in exactly one block.
std::vector<FeatureBlock> block_rows(const FeatureMatrix& features, std::size_t max_rows = 96);

/// Evaluates feature rows, dropping kernel entries below `cutoff`. With
/// cutoff == 0 every entry is kept and rows match featurize() exactly.
class Featurizer {
 public:
  Featurizer(const HingeSet& hinges, double cutoff);

  FeatureMatrix operator()(std::span<const Point3> points) const;
  void append_row(const Point3& x, FeatureMatrix& out) const;
  std::size_t dim() const { return hinges_.dim(); }
  const HingeSet& hinges() const { return hinges_; }

 private:
  struct KeyHash {
    std::size_t operator()(const std::array<std::int64_t, 3>& k) const;
  };
  std::array<std::int64_t, 3> cell_of(const Point3& p) const;

  HingeSet hinges_;
  double cutoff_;
  double radius_sq_ = 0.0;
  double cell_ = 0.0;
  std::unordered_map<std::array<std::int64_t, 3>, std::vector<std::uint32_t>, KeyHash> buckets_;
};

}  // namespace vprism
