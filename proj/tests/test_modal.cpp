#include "oracles.hpp"
#include "scenarios.hpp"

#include <semimodal/modal.hpp>

#include <Eigen/Eigenvalues>

#include <gtest/gtest.h>

#include <numeric>
#include <random>

using namespace semimodal;

namespace {

Matrix two_clusters(Index per, double sep, std::uint64_t seed)
{
  Matrix X(2 * per, 2);
  X.topRows(per) = oracle::normal_matrix(per, 2, seed, 0.0, 0.4);
  X.bottomRows(per) = oracle::normal_matrix(per, 2, seed + 1, 0.0, 0.4);
  X.bottomRows(per).col(0).array() += sep;
  return X;
}

} // namespace

TEST(MeanShift, ConvergesToStationaryPoint)
{
  const DensityModel model(Dataset(oracle::normal_matrix(200, 2, 3)), 0.5);
  const Vector m = ascend(model, Vector::Constant(2, 1.0));
  const double scale = model.density(m) / (model.bandwidth() * model.bandwidth());
  EXPECT_LT(model.gradient(m).norm() / scale, 1e-5);
  EXPECT_GT(model.density(m), model.density(Vector::Constant(2, 1.0)));
  const auto eig = Eigen::SelfAdjointEigenSolver<Matrix>(model.hessian(m)).eigenvalues();
  EXPECT_LT(eig.maxCoeff(), 0.0);
}

TEST(MeanShift, DensityNeverDecreasesAlongPath)
{
  const DensityModel model(Dataset(two_clusters(80, 3.0, 5)), 0.4);
  Vector x = Vector::Constant(2, 1.2);
  MeanShiftOptions one;
  one.max_iter = 1;
  double f = model.density(x);
  for (int k = 0; k < 50; ++k) {
    x = ascend(model, x, one);
    const double next = model.density(x);
    EXPECT_GE(next, f * (1.0 - 1e-12));
    f = next;
  }
}

TEST(MeanShift, UnreachableStartIsReported)
{
  const DensityModel model(Dataset(oracle::normal_matrix(20, 1, 1)), 0.01);
  EXPECT_THROW(ascend(model, Vector::Constant(1, 100.0)), Error);
  EXPECT_THROW(ascend(model, Vector::Zero(2)), Error);
}

TEST(Cluster, SeparatesTwoBlobs)
{
  const Matrix X = two_clusters(100, 4.0, 7);
  const DensityModel model(Dataset(X), 0.4);
  const auto c = cluster(model, X);
  ASSERT_EQ(c.partition.modes.size(), 2u);
  for (Index i = 1; i < 100; ++i)
    EXPECT_EQ(c.partition.labels[static_cast<std::size_t>(i)], c.partition.labels[0]);
  for (Index i = 100; i < 200; ++i)
    EXPECT_NE(c.partition.labels[static_cast<std::size_t>(i)], c.partition.labels[0]);
  EXPECT_EQ(c.partition.unassigned(), 0u);
  const auto sizes = c.partition.cluster_sizes();
  EXPECT_EQ(sizes[0] + sizes[1], 200u);
  EXPECT_GE(c.partition.modes.densities(0), c.partition.modes.densities(1));
}

TEST(Cluster, ModesAreDistinctLocalMaxima)
{
  const Matrix X = two_clusters(60, 2.5, 9);
  for (double h : { 0.15, 0.3, 0.6 }) {
    const DensityModel model(Dataset(X), h);
    const auto modes = find_modes(model, X);
    for (std::size_t a = 0; a < modes.size(); ++a) {
      EXPECT_NEAR(modes.densities(static_cast<Index>(a)), model.density(modes.location(a)), 1e-15);
      for (std::size_t b = a + 1; b < modes.size(); ++b)
        EXPECT_GE((modes.location(a) - modes.location(b)).norm(), 0.1 * h);
    }
  }
}

TEST(Cluster, OneDimensionalCountMatchesGridOracle)
{
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const Matrix X = oracle::normal_matrix(40, 1, seed);
    std::vector<double> xs(X.data(), X.data() + X.size());
    for (double h : { 0.15, 0.3, 0.6 }) {
      const DensityModel model(Dataset(X), h);
      EXPECT_EQ(count_modes(model), oracle::grid_mode_count_1d(xs, h)) << "seed " << seed << " h " << h;
    }
  }
}

TEST(Cluster, ModesAreStationaryWithNegativeCurvature)
{
  for (Index d = 1; d <= 3; ++d) {
    Matrix X = oracle::normal_matrix(150, d, 9);
    X.bottomRows(75).col(0).array() += 3.0;
    for (double h : { 0.15, 0.3, 0.6 }) {
      const DensityModel model(Dataset(X), h);
      const auto modes = find_modes(model, X);
      const double threshold = 1e-6 / (150.0 * std::pow(h, static_cast<double>(d + 1)));
      for (std::size_t k = 0; k < modes.size(); ++k) {
        const Vector m = modes.location(k);
        EXPECT_LT(model.gradient(m).norm(), threshold) << "d " << d << " h " << h;
        EXPECT_LE(Eigen::SelfAdjointEigenSolver<Matrix>(model.hessian(m)).eigenvalues().maxCoeff(), 1e-8);
      }
    }
  }
}

TEST(Cluster, InvariantUnderRowPermutation)
{
  const Matrix X = two_clusters(60, 2.0, 13);
  std::vector<int> perm(120);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(8));
  const Matrix Y = X(perm, Eigen::all);
  const DensityModel mx(Dataset(X), 0.3);
  const DensityModel my(Dataset(Y), 0.3);
  const auto a = cluster(mx, X);
  const auto b = cluster(my, Y);
  ASSERT_EQ(a.partition.modes.size(), b.partition.modes.size());
  EXPECT_LT((a.partition.modes.locations - b.partition.modes.locations).cwiseAbs().maxCoeff(), 1e-10);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    EXPECT_EQ(b.partition.labels[i], a.partition.labels[static_cast<std::size_t>(perm[i])]);
    const Vector y = Y.row(static_cast<Index>(i)).transpose();
    EXPECT_NEAR(my.density(y), mx.density(y), 1e-14 * mx.density(y));
  }
}

TEST(Cluster, AgreesWithBayesRuleOnSeparatedMixture)
{
  // Equal-weight N((-2.5, 0), I) and N((2.5, 0), I): the Bayes rule splits at x = 0.
  for (std::uint64_t seed : { 1u, 2u, 3u }) {
    Matrix X = oracle::normal_matrix(400, 2, seed);
    X.topRows(200).col(0).array() -= 2.5;
    X.bottomRows(200).col(0).array() += 2.5;
    const DensityModel model(Dataset(X), 0.7);
    MeanShiftOptions opts;
    opts.min_cluster_fraction = 0.01;
    const auto c = cluster(model, X, opts);
    std::size_t agree = 0;
    for (Index i = 0; i < X.rows(); ++i) {
      const int l = c.partition.labels[static_cast<std::size_t>(i)];
      const bool modal_right = c.partition.modes.locations(l - 1, 0) > 0.0;
      agree += modal_right == (X(i, 0) > 0.0);
    }
    EXPECT_GE(static_cast<double>(agree) / 400.0, 0.95) << "seed " << seed;
  }
}

TEST(Cluster, ThreadsDoNotChangeResult)
{
  const Matrix X = two_clusters(70, 3.0, 2);
  const DensityModel model(Dataset(X), 0.35);
  MeanShiftOptions serial, threaded;
  threaded.threads = 4;
  const auto a = cluster(model, X, serial);
  const auto b = cluster(model, X, threaded);
  EXPECT_EQ(a.partition.labels, b.partition.labels);
  EXPECT_EQ(a.partition.modes.locations, b.partition.modes.locations);
}

TEST(Cluster, SmallGroupsJoinNearestKeptMode)
{
  Matrix X = two_clusters(100, 4.0, 4);
  X.conservativeResize(203, 2);
  X.bottomRows(3) << 12.0, 0.0, 12.05, 0.0, 11.95, 0.0;
  const DensityModel model(Dataset(X), 0.4);
  EXPECT_EQ(cluster(model, X).partition.modes.size(), 3u);
  MeanShiftOptions opts;
  opts.min_cluster_fraction = 0.05;
  const auto c = cluster(model, X, opts);
  ASSERT_EQ(c.partition.modes.size(), 2u);
  const int right = c.partition.labels[150];
  for (std::size_t i = 200; i < 203; ++i)
    EXPECT_EQ(c.partition.labels[i], right);
}

TEST(Cluster, AllGroupsSmallKeepsLargest)
{
  const Matrix X = oracle::normal_matrix(30, 1, 8);
  const DensityModel model(Dataset(X), 0.01);
  MeanShiftOptions opts;
  opts.min_cluster_fraction = 0.5;
  EXPECT_EQ(cluster(model, X, opts).partition.modes.size(), 1u);
}

TEST(Assign, LabelsFollowAscentEndpoints)
{
  const Matrix X = two_clusters(80, 4.0, 12);
  const DensityModel model(Dataset(X), 0.4);
  const auto c = cluster(model, X);
  const auto p = assign(c.partition.modes, model, X);
  EXPECT_EQ(p.labels, c.partition.labels);
  Matrix far(1, 2);
  far << 1e4, 1e4;
  EXPECT_EQ(assign(c.partition.modes, model, far).labels[0], kUnassigned);
  EXPECT_THROW(assign(ModeSet{}, model, X), Error);
}

TEST(Assign, NearestModeTieGoesToLowerIndex)
{
  ModeSet m;
  m.locations.resize(2, 1);
  m.locations << -1.0, 1.0;
  m.densities = Vector::Ones(2);
  EXPECT_EQ(nearest_mode(m, Vector::Zero(1)), 1);
  EXPECT_EQ(nearest_mode(m, Vector::Constant(1, 0.5)), 2);
}
