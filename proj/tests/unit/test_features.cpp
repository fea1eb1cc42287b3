#include "doctest.h"

#include "vprism/features.hpp"

#include <cmath>
#include <set>

using namespace vprism;

namespace {

SegmentedCloud cloud_with_object(std::size_t n_object_points) {
  std::vector<Point3> pts{{0, 0, 0}, {0.1, 0, 0}};
  std::vector<ClassIndex> labels{0, 0};
  for (std::size_t i = 0; i < n_object_points; ++i) {
    pts.emplace_back(0.0123 + 0.001 * static_cast<double>(i), 0.0271, 0.0311);
    labels.push_back(1);
  }
  return SegmentedCloud(pts, labels, Point3(0, 0, 1), 2);
}

LabeledSamples cube_samples() {
  LabeledSamples s;
  s.push({0, 0, 0}, 0);
  s.push({0.1, 0.1, 0.1}, 0);
  return s;
}

HingeSet random_hinges(Rng& rng, std::size_t m, double gamma) {
  HingeSet h;
  h.kernel_gamma = gamma;
  for (std::size_t i = 0; i < m; ++i) h.hinges.emplace_back(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(0, 0.2));
  h.grid_count = m;
  return h;
}

}  // namespace

TEST_CASE("hinge grid arithmetic") {
  Hyperparams p;
  p.surface_hinges_per_object = 1;
  Rng rng(0);
  const HingeSet h = generate_hinges(cloud_with_object(1), cube_samples(), p, rng);
  CHECK(h.grid_count == 125);
  CHECK(h.hinges.size() == 126);
  CHECK(h.hinges.front().isApprox(Point3(-0.05, -0.05, -0.05)));
  CHECK(h.hinges[124].isApprox(Point3(0.15, 0.15, 0.15)));
  CHECK(h.kernel_gamma == p.kernel_gamma);
  CHECK(h.dim() == 127);
}

TEST_CASE("surface hinges clamp to the available points") {
  Hyperparams p;
  Rng rng(1);
  const SegmentedCloud c = cloud_with_object(10);
  const HingeSet h = generate_hinges(c, cube_samples(), p, rng);
  CHECK(h.hinges.size() - h.grid_count == 10);
  const auto obj = c.points_with_label(1);
  for (std::size_t i = h.grid_count; i < h.hinges.size(); ++i) {
    CHECK(std::find(obj.begin(), obj.end(), h.hinges[i]) != obj.end());
  }
}

TEST_CASE("surface hinges are drawn without replacement") {
  Hyperparams p;
  Rng rng(2);
  const SegmentedCloud c = cloud_with_object(60);
  const HingeSet h = generate_hinges(c, cube_samples(), p, rng);
  CHECK(h.hinges.size() - h.grid_count == 32);
  std::set<std::array<double, 3>> uniq;
  for (const auto& x : h.hinges) uniq.insert({x.x(), x.y(), x.z()});
  CHECK(uniq.size() == h.hinges.size());
}

TEST_CASE("duplicate surface hinges are removed") {
  Hyperparams p;
  Rng rng(3);
  std::vector<Point3> pts{{0, 0, 0}, {0.05, 0.05, 0.05}, {0.05, 0.05, 0.05}, {0.0123, 0.02, 0.03}};
  SegmentedCloud c(pts, {0, 1, 1, 1}, Point3(0, 0, 1), 2);
  const HingeSet h = generate_hinges(c, cube_samples(), p, rng);
  // (0.05, 0.05, 0.05) coincides with a grid hinge and appears twice.
  CHECK(h.hinges.size() - h.grid_count == 1);
}

TEST_CASE("hinge cap and explicit bounds") {
  Hyperparams p;
  p.max_hinges = 100;
  Rng rng(0);
  CHECK_THROWS_AS(generate_hinges(cloud_with_object(1), cube_samples(), p, rng), InputError);
  p = Hyperparams{};
  p.hinge_bounds = Aabb{Point3::Zero(), Point3(0.05, 0.05, 0.05)};
  const HingeSet h = generate_hinges(cloud_with_object(1), cube_samples(), p, rng);
  CHECK(h.grid_count == 64);
}

TEST_CASE("featurize values") {
  HingeSet h;
  h.kernel_gamma = 1000.0;
  h.hinges = {Point3(0, 0, 0), Point3(0.0316228, 0, 0), Point3(1, 1, 1)};
  const Eigen::VectorXd phi = featurize(h, Point3::Zero());
  REQUIRE(phi.size() == 4);
  CHECK(phi[0] == 1.0);
  CHECK(phi[1] == doctest::Approx(std::exp(-1.0)).epsilon(1e-5));
  CHECK(phi[2] < 1e-300);
  CHECK(phi[3] == 1.0);
}

TEST_CASE("featurize is translation consistent and monotone") {
  Rng rng(4);
  HingeSet h = random_hinges(rng, 40, 1000.0);
  const Point3 x(0.01, 0.02, 0.05), shift(0.3, -0.7, 1.1);
  HingeSet moved = h;
  for (auto& p : moved.hinges) p += shift;
  const Eigen::VectorXd a = featurize(h, x), b = featurize(moved, x + shift);
  for (Eigen::Index j = 0; j < a.size(); ++j) CHECK(a[j] == doctest::Approx(b[j]).epsilon(1e-9));
  for (std::size_t i = 0; i < h.hinges.size(); ++i)
    for (std::size_t j = 0; j < h.hinges.size(); ++j) {
      if ((x - h.hinges[i]).norm() < (x - h.hinges[j]).norm()) CHECK(a[i] >= a[j]);
    }
  for (Eigen::Index j = 0; j + 1 < a.size(); ++j) {
    CHECK(a[j] > 0.0);
    CHECK(a[j] <= 1.0);
  }
}

TEST_CASE("sparse featurizer matches the dense path") {
  Rng rng(5);
  const HingeSet h = random_hinges(rng, 300, 1000.0);
  std::vector<Point3> xs;
  for (int i = 0; i < 200; ++i) xs.emplace_back(rng.uniform(-0.25, 0.25), rng.uniform(-0.25, 0.25), rng.uniform(-0.05, 0.25));

  const FeatureMatrix exact = Featurizer(h, 0.0)(xs);
  const FeatureMatrix sparse = Featurizer(h, 1e-12)(xs);
  CHECK(exact.rows() == xs.size());
  CHECK(sparse.vals.size() < exact.vals.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Eigen::VectorXd dense = featurize(h, xs[i]);
    CHECK((exact.dense_row(i) - dense).cwiseAbs().maxCoeff() == 0.0);
    CHECK((sparse.dense_row(i) - dense).cwiseAbs().maxCoeff() <= 1e-9);
    const auto cols = sparse.row_cols(i);
    CHECK(cols.back() == h.dim() - 1);
    for (std::size_t a = 1; a < cols.size(); ++a) CHECK(cols[a - 1] < cols[a]);
  }
  // Reproducible bit for bit.
  const FeatureMatrix again = Featurizer(h, 1e-12)(xs);
  CHECK(again.vals == sparse.vals);
  CHECK(again.cols == sparse.cols);
}

TEST_CASE("row blocks cover every row once and match the sparse rows") {
  Rng rng(6);
  const HingeSet h = random_hinges(rng, 150, 1000.0);
  std::vector<Point3> xs;
  for (int i = 0; i < 500; ++i) xs.emplace_back(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(0, 0.2));
  const FeatureMatrix f = Featurizer(h, 1e-12)(xs);
  const auto blocks = block_rows(f, 32);
  std::vector<int> seen(xs.size(), 0);
  for (const auto& b : blocks) {
    CHECK(b.rows.size() <= 32);
    CHECK(static_cast<std::size_t>(b.phi.rows()) == b.rows.size());
    CHECK(static_cast<std::size_t>(b.phi.cols()) == b.cols.size());
    for (std::size_t r = 0; r < b.rows.size(); ++r) {
      ++seen[b.rows[r]];
      const Eigen::VectorXd dense = f.dense_row(b.rows[r]);
      Eigen::VectorXd rebuilt = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(f.dim));
      for (std::size_t c = 0; c < b.cols.size(); ++c) rebuilt[b.cols[c]] = b.phi(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      CHECK((rebuilt - dense).cwiseAbs().maxCoeff() == 0.0);
    }
  }
  for (int s : seen) CHECK(s == 1);
  CHECK_THROWS_AS(block_rows(f, 0), InputError);
}

TEST_CASE("far points keep only the bias") {
  Rng rng(7);
  const HingeSet h = random_hinges(rng, 20, 1000.0);
  const std::vector<Point3> xs{Point3(5, 5, 5)};
  const FeatureMatrix f = Featurizer(h, 1e-12)(xs);
  CHECK(f.row_cols(0).size() == 1);
  CHECK(f.row_vals(0)[0] == 1.0);
}
