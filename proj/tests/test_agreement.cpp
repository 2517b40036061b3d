#include "oracles.hpp"

#include <semimodal/agreement.hpp>

#include <gtest/gtest.h>

#include <algorithm>

using namespace semimodal;

namespace {

std::vector<int> random_labels(std::size_t n, int k, std::mt19937_64& rng)
{
  std::uniform_int_distribution<int> pick(0, k - 1);
  std::vector<int> l(n);
  for (auto& v : l)
    v = pick(rng);
  return l;
}

} // namespace

TEST(Contingency, CountsAndSortedLabels)
{
  const auto t = contingency({ 3, 1, 3, 0 }, { 5, 5, 7, 7 });
  EXPECT_EQ(t.row_labels, (std::vector<int>{ 0, 1, 3 }));
  EXPECT_EQ(t.col_labels, (std::vector<int>{ 5, 7 }));
  EXPECT_EQ(t.counts, (std::vector<std::vector<std::int64_t>>{ { 0, 1 }, { 1, 0 }, { 1, 1 } }));
  EXPECT_EQ(t.n, 4);
  EXPECT_THROW(contingency({ 1 }, { 1, 2 }), Error);
  EXPECT_THROW(ContingencyTable::from_counts({ { 1, -1 } }), Error);
  EXPECT_THROW(ContingencyTable::from_counts({ { 1, 2 }, { 3 } }), Error);
}

TEST(Indices, MatchPairEnumeration)
{
  std::mt19937_64 rng(123);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 2 + rng() % 299;
    const auto a = random_labels(n, 1 + static_cast<int>(rng() % 6), rng);
    const auto b = random_labels(n, 1 + static_cast<int>(rng() % 6), rng);
    const auto t = contingency(a, b);
    const auto p = oracle::enumerate_pairs(a, b);
    const bool fm_defined = p.both + p.only_a > 0 && p.both + p.only_b > 0;
    if (fm_defined) {
      EXPECT_NEAR(fowlkes_mallows(t), oracle::fowlkes_mallows(p), 1e-12);
    }
    if (p.both + p.only_a + p.only_b > 0) {
      EXPECT_NEAR(jaccard(t), oracle::jaccard(p), 1e-12);
    }
    const double ari_den = (p.both + p.only_a) * (p.only_a + p.neither) + (p.both + p.only_b) * (p.only_b + p.neither);
    if (ari_den > 0) {
      EXPECT_NEAR(adjusted_rand(t), oracle::adjusted_rand(p), 1e-12);
    }
  }
}

TEST(Indices, IdenticalPartitionsScoreOne)
{
  std::mt19937_64 rng(5);
  const auto a = random_labels(100, 4, rng);
  std::vector<int> relabeled(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    relabeled[i] = 10 - a[i];
  const auto t = contingency(a, relabeled);
  EXPECT_DOUBLE_EQ(fowlkes_mallows(t), 1.0);
  EXPECT_DOUBLE_EQ(jaccard(t), 1.0);
  EXPECT_DOUBLE_EQ(adjusted_rand(t), 1.0);
}

TEST(Indices, SymmetricAndBounded)
{
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_labels(80, 3, rng);
    const auto b = random_labels(80, 4, rng);
    for (auto idx : { AgreementIndex::fowlkes_mallows, AgreementIndex::jaccard, AgreementIndex::adjusted_rand }) {
      const double ab = agreement(idx, contingency(a, b));
      EXPECT_NEAR(ab, agreement(idx, contingency(b, a)), 1e-14);
      EXPECT_LE(ab, 1.0);
      if (idx != AgreementIndex::adjusted_rand) {
        EXPECT_GE(ab, 0.0);
      }
    }
  }
}

TEST(Indices, InvariantUnderRelabeling)
{
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_labels(120, 5, rng);
    const auto b = random_labels(120, 4, rng);
    std::vector<int> pa{ 0, 1, 2, 3, 4 }, pb{ 0, 1, 2, 3 };
    std::shuffle(pa.begin(), pa.end(), rng);
    std::shuffle(pb.begin(), pb.end(), rng);
    std::vector<int> a2(a.size()), b2(b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      a2[i] = pa[static_cast<std::size_t>(a[i])];
      b2[i] = pb[static_cast<std::size_t>(b[i])];
    }
    const auto t = contingency(a, b);
    const auto u = contingency(a2, b2);
    for (auto idx : { AgreementIndex::fowlkes_mallows, AgreementIndex::jaccard, AgreementIndex::adjusted_rand }) {
      EXPECT_NEAR(agreement(idx, t), agreement(idx, u), 1e-14);
    }
  }
}

TEST(Indices, DegenerateConventions)
{
  std::vector<std::string> seen;
  agreement_warning_sink() = [&](const std::string& m) { seen.push_back(m); };
  const std::vector<int> singletons{ 1, 2, 3, 4 };
  const std::vector<int> one_class{ 1, 1, 1, 1 };
  EXPECT_THROW(fowlkes_mallows(contingency(singletons, singletons)), Error);
  EXPECT_DOUBLE_EQ(jaccard(contingency(singletons, singletons)), 1.0);
  EXPECT_DOUBLE_EQ(adjusted_rand(contingency(one_class, one_class)), 1.0);
  EXPECT_DOUBLE_EQ(fowlkes_mallows(contingency(one_class, one_class)), 1.0);
  EXPECT_EQ(seen.size(), 2u);
  agreement_warning_sink() = nullptr;
  EXPECT_THROW(adjusted_rand(contingency({ 1 }, { 1 })), Error);
}

TEST(Indices, PublishedTableValues)
{
  const auto t = ContingencyTable::from_counts({ { 6582, 441 }, { 604, 2373 } });
  EXPECT_NEAR(fowlkes_mallows(t), 0.841, 0.005);
  EXPECT_NEAR(true_positive_rate(t, 1, 1), 0.797, 0.005);
  EXPECT_THROW(true_positive_rate(t, 2, 0), Error);
}

TEST(Indices, ParseNames)
{
  EXPECT_EQ(parse_agreement_index("fowlkes_mallows"), AgreementIndex::fowlkes_mallows);
  EXPECT_EQ(parse_agreement_index("ari"), AgreementIndex::adjusted_rand);
  EXPECT_EQ(parse_agreement_index("jaccard"), AgreementIndex::jaccard);
  EXPECT_EQ(to_string(AgreementIndex::adjusted_rand), "adjusted_rand");
  EXPECT_THROW(parse_agreement_index("rand"), Error);
}
