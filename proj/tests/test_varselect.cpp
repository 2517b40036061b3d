#include "oracles.hpp"
#include "scenarios.hpp"

#include <semimodal/varselect.hpp>

#include <gtest/gtest.h>

#include <numeric>

using namespace semimodal;

namespace {

std::vector<double> column(const Matrix& m) { return std::vector<double>(m.data(), m.data() + m.rows()); }

} // namespace

TEST(Ise, MatchesQuadratureIn1d)
{
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 8; ++trial) {
    const Matrix a = oracle::normal_matrix(5 + static_cast<Index>(rng() % 40), 1, rng());
    const Matrix b = oracle::normal_matrix(5 + static_cast<Index>(rng() % 40), 1, rng(), 0.5, 1.3);
    const double h = 0.2 + std::uniform_real_distribution<double>()(rng);
    const double exact = ise_statistic(Dataset(a), Dataset(b), h);
    const double quad = oracle::ise_quadrature_1d(column(a), column(b), h);
    EXPECT_NEAR(exact / quad, 1.0, 1e-6);
  }
}

TEST(Ise, ZeroOnIdenticalSamplesAndSymmetric)
{
  const Dataset a(oracle::normal_matrix(50, 3, 1));
  const Dataset b(oracle::normal_matrix(40, 3, 2));
  EXPECT_EQ(ise_statistic(a, a, 0.5), 0.0);
  EXPECT_NEAR(ise_statistic(a, b, 0.5), ise_statistic(b, a, 0.5), 1e-15);
  EXPECT_GT(ise_statistic(a, b, 0.5), 0.0);
  EXPECT_THROW(ise_statistic(a, Dataset(oracle::normal_matrix(4, 2, 3)), 0.5), Error);
  EXPECT_THROW(ise_statistic(a, b, 0.0), Error);
}

TEST(Ise, MatchesTensorQuadratureIn2d)
{
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 4; ++trial) {
    const Matrix a = oracle::normal_matrix(5 + static_cast<Index>(rng() % 30), 2, rng());
    const Matrix b = oracle::normal_matrix(5 + static_cast<Index>(rng() % 30), 2, rng(), 0.4, 1.2);
    const double h = 0.3 + 0.7 * std::uniform_real_distribution<double>()(rng);
    const double exact = ise_statistic(Dataset(a), Dataset(b), h);
    EXPECT_NEAR(exact / oracle::ise_quadrature_2d(a, b, h), 1.0, 1e-6);
  }
}

TEST(Ise, InvariantUnderRowPermutation)
{
  const Matrix a = oracle::normal_matrix(70, 3, 41);
  const Matrix b = oracle::normal_matrix(55, 3, 42, 0.2);
  std::vector<int> pa(70), pb(55);
  std::iota(pa.begin(), pa.end(), 0);
  std::iota(pb.begin(), pb.end(), 0);
  std::mt19937_64 rng(3);
  std::shuffle(pa.begin(), pa.end(), rng);
  std::shuffle(pb.begin(), pb.end(), rng);
  const Matrix a2 = a(pa, Eigen::all);
  const Matrix b2 = b(pb, Eigen::all);
  const double base = ise_statistic(Dataset(a), Dataset(b), 0.6);
  EXPECT_NEAR(ise_statistic(Dataset(a2), Dataset(b2), 0.6), base, 1e-12 * base);
}

TEST(PermutationTest, CachedAndStreamedPathsAgree)
{
  const Dataset a(oracle::normal_matrix(60, 2, 5));
  const Dataset b(oracle::normal_matrix(45, 2, 6, 0.3));
  const auto cached = detail::ise_test(a, b, 0.5, 199, 77, 1000);
  const auto streamed = detail::ise_test(a, b, 0.5, 199, 77, 0);
  EXPECT_EQ(cached.statistic, streamed.statistic);
  EXPECT_NEAR(cached.p_value, streamed.p_value, 1.0 / 200.0);
  const auto swapped = detail::ise_test(b, a, 0.5, 199, 77, 1000);
  EXPECT_NEAR(swapped.statistic, cached.statistic, 1e-15);
}

TEST(PermutationTest, PValueShapeAndSeed)
{
  const Dataset a(oracle::normal_matrix(50, 1, 11));
  const Dataset b(oracle::normal_matrix(50, 1, 12, 2.0));
  const auto far = ise_test(a, b, 0.4, 199, 1);
  EXPECT_DOUBLE_EQ(far.p_value, 1.0 / 200.0);
  EXPECT_EQ(far.permutations, 199u);
  const auto same = ise_test(a, a, 0.4, 199, 1);
  EXPECT_DOUBLE_EQ(same.p_value, 1.0);
  const auto null = ise_test(a, Dataset(oracle::normal_matrix(50, 1, 13)), 0.4, 199, 2);
  EXPECT_EQ(null.p_value, ise_test(a, Dataset(oracle::normal_matrix(50, 1, 13)), 0.4, 199, 2).p_value);
  const double steps = null.p_value * 200.0;
  EXPECT_NEAR(steps, std::round(steps), 1e-9);
  EXPECT_THROW(ise_test(a, b, 0.4, 50, 1), Error);
}

TEST(PermutationTest, NullPValuesAreSuperUniform)
{
  // Same distribution on both sides: P(p <= u) <= u up to Monte Carlo error.
  const int reps = 150;
  int at05 = 0, at20 = 0;
  for (int r = 0; r < reps; ++r) {
    const Dataset a(oracle::normal_matrix(40, 1, 1000 + static_cast<std::uint64_t>(r)));
    const Dataset b(oracle::normal_matrix(40, 1, 5000 + static_cast<std::uint64_t>(r)));
    const double p = ise_test(a, b, normal_scale_bandwidth(40, 1), 99, static_cast<std::uint64_t>(r)).p_value;
    at05 += p <= 0.05;
    at20 += p <= 0.20;
  }
  auto bound = [&](double u) { return u + 3.0 * std::sqrt(u * (1.0 - u) / reps); };
  EXPECT_LE(at05 / static_cast<double>(reps), bound(0.05));
  EXPECT_LE(at20 / static_cast<double>(reps), bound(0.20));
}

TEST(LargestGap, Rule)
{
  EXPECT_EQ(largest_gap_selection({ 90, 5, 85, 4, 6 }), (std::vector<std::size_t>{ 0, 2 }));
  EXPECT_TRUE(largest_gap_selection({ 0, 0, 0, 0 }).empty());
  EXPECT_TRUE(largest_gap_selection({ 7 }).empty());
  // Gap exists but head is not twice the tail.
  EXPECT_TRUE(largest_gap_selection({ 30, 30, 30, 20 }).empty());
  EXPECT_EQ(largest_gap_selection({ 3, 0, 0, 0, 0 }), std::vector<std::size_t>{ 0 });
}

TEST(SelectVariables, RecoversShiftedPair)
{
  const auto bg = scenario::sample(scenario::shifted_pair(8, 0.0, 3.0), 200, 1).without_truth();
  const auto ex = scenario::sample(scenario::shifted_pair(8, 0.3, 3.0), 200, 2).without_truth();
  const auto st = fit_standardizer(bg);
  VariableSelectionOptions opts;
  opts.iterations = 80;
  opts.permutations = 99;
  opts.subset_size = 2;
  opts.threshold = 0.02;
  const auto vs = select_variables(st.apply(bg), st.apply(ex), opts, 5);
  EXPECT_EQ(vs.selected, (std::vector<std::size_t>{ 0, 1 }));
  EXPECT_TRUE(vs.relevant());
  EXPECT_EQ(vs.tests.size(), 80u);
  std::size_t total = 0;
  for (const auto& t : vs.tests) {
    EXPECT_EQ(t.variables.size(), 2u);
    EXPECT_NE(t.variables[0], t.variables[1]);
    if (t.outcome.p_value < opts.threshold)
      total += 2;
  }
  std::size_t counted = 0;
  for (auto c : vs.counter.count) {
    counted += c;
    EXPECT_LE(c, vs.counter.significant_iterations);
  }
  EXPECT_EQ(counted, total);
  EXPECT_EQ(counted, 2 * vs.counter.significant_iterations);
}

TEST(SelectVariables, DeterministicAcrossThreads)
{
  const auto bg = Dataset(oracle::normal_matrix(80, 4, 3));
  const auto ex = Dataset(oracle::normal_matrix(80, 4, 4));
  VariableSelectionOptions serial;
  serial.iterations = 12;
  serial.permutations = 99;
  auto threaded = serial;
  threaded.threads = 4;
  const auto a = select_variables(bg, ex, serial, 9);
  const auto b = select_variables(bg, ex, threaded, 9);
  EXPECT_EQ(a.counter.count, b.counter.count);
  for (std::size_t i = 0; i < a.tests.size(); ++i) {
    EXPECT_EQ(a.tests[i].variables, b.tests[i].variables);
    EXPECT_EQ(a.tests[i].outcome.p_value, b.tests[i].outcome.p_value);
  }
}

TEST(SelectVariables, ArgumentChecks)
{
  const Dataset a(oracle::normal_matrix(20, 3, 1));
  VariableSelectionOptions o;
  o.subset_size = 3;
  EXPECT_THROW(select_variables(a, a, o, 1), Error);
  o.subset_size = 0;
  EXPECT_THROW(select_variables(a, a, o, 1), Error);
  o.subset_size = 2;
  o.iterations = 0;
  EXPECT_THROW(select_variables(a, a, o, 1), Error);
  EXPECT_THROW(select_variables(a, Dataset(oracle::normal_matrix(20, 2, 1)), VariableSelectionOptions{}, 1), Error);
}
