#include "vprism/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vprism {

HingeSet generate_hinges(const SegmentedCloud& cloud, const LabeledSamples& samples,
                         const Hyperparams& params, Rng& rng) {
  params.validate();
  const double s = params.hinge_grid_spacing;
  Aabb bounds;
  if (params.hinge_bounds) {
    bounds = *params.hinge_bounds;
  } else {
    if (samples.size() == 0) throw InputError("hinge grid needs at least one sample");
    bounds = Aabb::of(samples.points);
  }
  bounds = bounds.padded(s);

  std::array<std::size_t, 3> n{};
  for (int d = 0; d < 3; ++d) {
    n[d] = static_cast<std::size_t>(std::floor(bounds.extent()[d] / s + 1e-9)) + 1;
  }
  const std::size_t grid = n[0] * n[1] * n[2];
  if (grid > params.max_hinges) {
    throw InputError("hinge grid of " + std::to_string(grid) + " points exceeds max_hinges " +
                     std::to_string(params.max_hinges));
  }

  HingeSet out;
  out.kernel_gamma = params.kernel_gamma;
  out.hinges.reserve(grid + params.surface_hinges_per_object * (cloud.num_classes() - 1));
  for (std::size_t k = 0; k < n[2]; ++k)
    for (std::size_t j = 0; j < n[1]; ++j)
      for (std::size_t i = 0; i < n[0]; ++i) {
        out.hinges.push_back(bounds.lo + s * Point3(static_cast<double>(i), static_cast<double>(j),
                                                    static_cast<double>(k)));
      }
  out.grid_count = grid;

  auto near_grid_hinge = [&](const Point3& p) {
    for (int d = 0; d < 3; ++d) {
      const double f = (p[d] - bounds.lo[d]) / s;
      const double r = std::round(f);
      if (r < 0.0 || r >= static_cast<double>(n[d]) || std::abs(p[d] - (bounds.lo[d] + r * s)) > 1e-9) {
        return false;
      }
    }
    return true;
  };

  for (ClassIndex k = 1; k < cloud.num_classes(); ++k) {
    std::vector<Point3> pts = cloud.points_with_label(k);
    const std::size_t take = std::min(params.surface_hinges_per_object, pts.size());
    // Partial Fisher-Yates: the first `take` entries are a uniform draw without replacement.
    for (std::size_t i = 0; i < take; ++i) std::swap(pts[i], pts[i + rng.index(pts.size() - i)]);
    for (std::size_t i = 0; i < take; ++i) {
      const Point3& p = pts[i];
      if (near_grid_hinge(p)) continue;
      const bool dup = std::any_of(out.hinges.begin() + static_cast<std::ptrdiff_t>(grid),
                                   out.hinges.end(),
                                   [&](const Point3& h) { return (h - p).norm() <= 1e-9; });
      if (!dup) out.hinges.push_back(p);
    }
  }
  if (out.hinges.size() > params.max_hinges) {
    throw InputError(std::to_string(out.hinges.size()) + " hinges exceed max_hinges " +
                     std::to_string(params.max_hinges));
  }
  return out;
}

Eigen::VectorXd featurize(const HingeSet& hinges, const Point3& x) {
  Eigen::VectorXd phi(hinges.dim());
  for (std::size_t j = 0; j < hinges.hinges.size(); ++j) {
    phi[static_cast<Eigen::Index>(j)] = std::exp(-hinges.kernel_gamma * (x - hinges.hinges[j]).squaredNorm());
  }
  phi[static_cast<Eigen::Index>(hinges.hinges.size())] = 1.0;
  return phi;
}

Eigen::VectorXd FeatureMatrix::dense_row(std::size_t i) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  const auto c = row_cols(i);
  const auto v = row_vals(i);
  for (std::size_t a = 0; a < c.size(); ++a) out[c[a]] = v[a];
  return out;
}

Eigen::MatrixXd FeatureMatrix::to_dense() const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < rows(); ++i) out.row(static_cast<Eigen::Index>(i)) = dense_row(i).transpose();
  return out;
}

double FeatureMatrix::row_dot(std::size_t i, const Eigen::Ref<const Eigen::VectorXd>& w) const {
  double acc = 0.0;
  for (std::size_t a = row_start[i]; a < row_start[i + 1]; ++a) acc += vals[a] * w[cols[a]];
  return acc;
}

std::vector<FeatureBlock> block_rows(const FeatureMatrix& features, std::size_t max_rows) {
  if (max_rows == 0) throw InputError("block size must be positive");
  const std::size_t n = features.rows();
  std::vector<std::uint32_t> key(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = features.row_cols(i);
    const auto v = features.row_vals(i);
    std::size_t best = c.size() - 1;  // bias column when no hinge is in range
    for (std::size_t a = 0; a + 1 < c.size(); ++a) {
      if (best == c.size() - 1 || v[a] > v[best]) best = a;
    }
    key[i] = c[best];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });

  std::vector<FeatureBlock> blocks;
  std::vector<std::int64_t> slot(features.dim, -1);
  for (std::size_t start = 0; start < n;) {
    std::size_t end = start;
    while (end < n && end - start < max_rows && key[order[end]] == key[order[start]]) ++end;
    FeatureBlock b;
    b.rows.assign(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
    for (std::size_t r : b.rows)
      for (std::uint32_t c : features.row_cols(r)) {
        if (slot[c] < 0) {
          slot[c] = 0;
          b.cols.push_back(c);
        }
      }
    std::sort(b.cols.begin(), b.cols.end());
    for (std::size_t j = 0; j < b.cols.size(); ++j) slot[b.cols[j]] = static_cast<std::int64_t>(j);
    b.phi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(b.rows.size()), static_cast<Eigen::Index>(b.cols.size()));
    for (std::size_t r = 0; r < b.rows.size(); ++r) {
      const auto c = features.row_cols(b.rows[r]);
      const auto v = features.row_vals(b.rows[r]);
      for (std::size_t a = 0; a < c.size(); ++a) b.phi(static_cast<Eigen::Index>(r), slot[c[a]]) = v[a];
    }
    for (std::uint32_t c : b.cols) slot[c] = -1;
    blocks.push_back(std::move(b));
    start = end;
  }
  return blocks;
}

std::size_t Featurizer::KeyHash::operator()(const std::array<std::int64_t, 3>& k) const {
  std::uint64_t h = mix_seed(static_cast<std::uint64_t>(k[0]), 0);
  h = mix_seed(h ^ static_cast<std::uint64_t>(k[1]), 1);
  h = mix_seed(h ^ static_cast<std::uint64_t>(k[2]), 2);
  return static_cast<std::size_t>(h);
}

Featurizer::Featurizer(const HingeSet& hinges, double cutoff) : hinges_(hinges), cutoff_(cutoff) {
  if (!(cutoff >= 0.0 && cutoff < 1.0)) throw InputError("kernel cutoff must be in [0, 1)");
  if (cutoff_ > 0.0) {
    radius_sq_ = -std::log(cutoff_) / hinges.kernel_gamma;
    cell_ = std::sqrt(radius_sq_);
    for (std::size_t j = 0; j < hinges.hinges.size(); ++j) {
      buckets_[cell_of(hinges.hinges[j])].push_back(static_cast<std::uint32_t>(j));
    }
  }
}

std::array<std::int64_t, 3> Featurizer::cell_of(const Point3& p) const {
  return {static_cast<std::int64_t>(std::floor(p.x() / cell_)),
          static_cast<std::int64_t>(std::floor(p.y() / cell_)),
          static_cast<std::int64_t>(std::floor(p.z() / cell_))};
}

void Featurizer::append_row(const Point3& x, FeatureMatrix& out) const {
  const HingeSet& h = hinges_;
  const double gamma = h.kernel_gamma;
  if (cutoff_ == 0.0) {
    for (std::size_t j = 0; j < h.hinges.size(); ++j) {
      out.cols.push_back(static_cast<std::uint32_t>(j));
      out.vals.push_back(std::exp(-gamma * (x - h.hinges[j]).squaredNorm()));
    }
  } else {
    const std::size_t first = out.cols.size();
    const auto c = cell_of(x);
    for (std::int64_t dz = -1; dz <= 1; ++dz)
      for (std::int64_t dy = -1; dy <= 1; ++dy)
        for (std::int64_t dx = -1; dx <= 1; ++dx) {
          auto it = buckets_.find({c[0] + dx, c[1] + dy, c[2] + dz});
          if (it == buckets_.end()) continue;
          for (std::uint32_t j : it->second) {
            if ((x - h.hinges[j]).squaredNorm() <= radius_sq_) out.cols.push_back(j);
          }
        }
    std::sort(out.cols.begin() + static_cast<std::ptrdiff_t>(first), out.cols.end());
    for (std::size_t a = first; a < out.cols.size(); ++a) {
      const double v = std::exp(-gamma * (x - h.hinges[out.cols[a]]).squaredNorm());
      out.vals.push_back(v);
    }
    // Drop entries that fall under the cutoff after rounding of the radius test.
    std::size_t w = first;
    for (std::size_t a = first; a < out.cols.size(); ++a) {
      if (out.vals[a] >= cutoff_) {
        out.cols[w] = out.cols[a];
        out.vals[w] = out.vals[a];
        ++w;
      }
    }
    out.cols.resize(w);
    out.vals.resize(w);
  }
  out.cols.push_back(static_cast<std::uint32_t>(h.hinges.size()));
  out.vals.push_back(1.0);
  out.row_start.push_back(out.cols.size());
}

FeatureMatrix Featurizer::operator()(std::span<const Point3> points) const {
  FeatureMatrix out;
  out.dim = dim();
  out.row_start.reserve(points.size() + 1);
  for (const auto& p : points) append_row(p, out);
  return out;
}

}  // namespace vprism
