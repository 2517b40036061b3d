#pragma once

#include "core.hpp"
#include "dataset.hpp"
#include "kde.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

namespace semimodal {

struct IseTestOutcome
{
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t permutations = 0;
};

namespace detail {

//! sum_i sum_j exp(-|a_i - b_j|^2 / (4 h^2))
inline double cross_kernel_sum(const Matrix& a, const Matrix& b, double h)
{
  const double c = -0.25 / (h * h);
  double total = 0.0;
  for (Index i = 0; i < a.rows(); ++i) {
    double row = 0.0;
    for (Index j = 0; j < b.rows(); ++j)
      row += std::exp(c * (a.row(i) - b.row(j)).squaredNorm());
    total += row;
  }
  return total;
}

//! Normalizing constant of the k-variate Gaussian with scale h * sqrt(2).
inline double convolution_norm(Index k, double h)
{
  return std::pow(4.0 * std::numbers::pi * h * h, -0.5 * static_cast<double>(k));
}

// Pooled Gram matrices above this many rows are not cached.
inline constexpr Index kMaxCachedGram = 3000;

} // namespace detail

//! Closed-form integrated squared difference between two Gaussian kernel
//! estimates sharing bandwidth h, via the convolution identity
//! int phi_h(x - a) phi_h(x - b) dx = phi_{h sqrt 2}(a - b).
inline double ise_statistic(const Dataset& xb, const Dataset& xbs, double h)
{
  if (xb.cols() != xbs.cols())
    throw invalid_argument("samples differ in dimension");
  if (!(h > 0.0) || !std::isfinite(h))
    throw invalid_argument("bandwidth must be positive");
  const auto& x = xb.values();
  const auto& y = xbs.values();
  const double nb = static_cast<double>(x.rows());
  const double ns = static_cast<double>(y.rows());
  const double t = detail::cross_kernel_sum(x, x, h) / (nb * nb) - 2.0 * detail::cross_kernel_sum(x, y, h) / (nb * ns) +
                   detail::cross_kernel_sum(y, y, h) / (ns * ns);
  return std::max(0.0, t * detail::convolution_norm(x.cols(), h));
}

namespace detail {

inline IseTestOutcome ise_test(const Dataset& xb,
                               const Dataset& xbs,
                               double h,
                               std::size_t n_perm,
                               std::uint64_t seed,
                               Index max_cached)
{
  if (n_perm < 99)
    throw invalid_argument("permutation test needs at least 99 permutations");
  IseTestOutcome out;
  out.statistic = ise_statistic(xb, xbs, h);
  out.permutations = n_perm;

  const Index nb = xb.rows();
  const Index ns = xbs.rows();
  const Index n = nb + ns;
  const Index k = xb.cols();
  Matrix pooled(n, k);
  pooled.topRows(nb) = xb.values();
  pooled.bottomRows(ns) = xbs.values();
  const double norm = detail::convolution_norm(k, h);
  const double c = -0.25 / (h * h);

  std::vector<unsigned char> in_first(static_cast<std::size_t>(n), 0);
  std::fill(in_first.begin(), in_first.begin() + nb, 1);
  std::mt19937_64 rng(seed);
  const double fb = static_cast<double>(nb);
  const double fs = static_cast<double>(ns);
  // Within-group sums from the smaller group only: with A the smaller group,
  // S_AA = sum_{i,j in A} G_ij and S_CC = S - 2 sum_{i in A} r_i + S_AA.
  const unsigned char small_flag = nb <= ns ? 1 : 0;
  auto statistic = [&](double s_bb, double s_ss, double total) {
    const double s_bs = 0.5 * (total - s_bb - s_ss);
    return std::max(0.0, norm * (s_bb / (fb * fb) - 2.0 * s_bs / (fb * fs) + s_ss / (fs * fs)));
  };

  std::size_t exceed = 0;
  if (n <= max_cached) {
    Matrix gram(n, n);
    for (Index j = 0; j < n; ++j) {
      gram(j, j) = 1.0;
      for (Index i = j + 1; i < n; ++i)
        gram(i, j) = gram(j, i) = std::exp(c * (pooled.row(i) - pooled.row(j)).squaredNorm());
    }
    const Vector rowsum = gram.rowwise().sum();
    const double total = rowsum.sum();
    Vector acc(n);
    for (std::size_t p = 0; p < n_perm; ++p) {
      std::shuffle(in_first.begin(), in_first.end(), rng);
      acc.setZero();
      double r_small = 0.0;
      for (Index i = 0; i < n; ++i) {
        if (in_first[static_cast<std::size_t>(i)] == small_flag) {
          acc += gram.col(i);
          r_small += rowsum(i);
        }
      }
      double s_small = 0.0;
      for (Index j = 0; j < n; ++j)
        if (in_first[static_cast<std::size_t>(j)] == small_flag)
          s_small += acc(j);
      const double s_large = total - 2.0 * r_small + s_small;
      const double t = small_flag ? statistic(s_small, s_large, total) : statistic(s_large, s_small, total);
      if (t >= out.statistic)
        ++exceed;
    }
  } else {
    for (std::size_t p = 0; p < n_perm; ++p) {
      std::shuffle(in_first.begin(), in_first.end(), rng);
      double s_bb = 0.0, s_ss = 0.0, total = 0.0;
      for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
          const double g = std::exp(c * (pooled.row(i) - pooled.row(j)).squaredNorm());
          total += g;
          const bool bi = in_first[static_cast<std::size_t>(i)], bj = in_first[static_cast<std::size_t>(j)];
          if (bi && bj)
            s_bb += g;
          else if (!bi && !bj)
            s_ss += g;
        }
      }
      if (statistic(s_bb, s_ss, total) >= out.statistic)
        ++exceed;
    }
  }
  out.p_value = static_cast<double>(1 + exceed) / static_cast<double>(n_perm + 1);
  return out;
}

} // namespace detail

//! Two-sample permutation test on the integrated squared difference.
//! p = (1 + #{permuted >= observed}) / (n_perm + 1).
inline IseTestOutcome ise_test(const Dataset& xb, const Dataset& xbs, double h, std::size_t n_perm, std::uint64_t seed)
{
  return detail::ise_test(xb, xbs, h, n_perm, seed, detail::kMaxCachedGram);
}

struct VariableSelectionOptions
{
  std::size_t iterations = 1000;   //!< M
  std::size_t subset_size = 3;     //!< k
  double threshold = 0.01;         //!< increment when p < threshold
  std::size_t permutations = 199;
  unsigned threads = 1;
};

//! Per-variable tally of significant subset tests.
struct RelevanceCounter
{
  std::vector<std::size_t> count;
  std::size_t iterations = 0;
  std::size_t subset_size = 0;
  double threshold = 0.0;
  std::size_t significant_iterations = 0;
};

struct SubsetTest
{
  std::vector<std::size_t> variables;
  double bandwidth = 0.0;
  IseTestOutcome outcome;
};

struct VariableSelection
{
  RelevanceCounter counter;
  std::vector<std::size_t> selected;  //!< ascending column indices; empty when no variable stands out
  std::vector<SubsetTest> tests;

  bool relevant() const { return !selected.empty(); }
};

//! Largest-gap rule on counts sorted in descending order: the variables
//! before the largest gap are selected when their mean count exceeds twice
//! the mean of the rest.
inline std::vector<std::size_t> largest_gap_selection(const std::vector<std::size_t>& count)
{
  const std::size_t d = count.size();
  if (d < 2)
    return {};
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), std::size_t{ 0 });
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return count[a] > count[b]; });
  std::size_t cut = 0;
  std::size_t widest = 0;
  for (std::size_t m = 0; m + 1 < d; ++m) {
    const std::size_t gap = count[order[m]] - count[order[m + 1]];
    if (gap > widest) {
      widest = gap;
      cut = m + 1;
    }
  }
  if (widest == 0)
    return {};
  double head = 0.0, tail = 0.0;
  for (std::size_t m = 0; m < d; ++m)
    (m < cut ? head : tail) += static_cast<double>(count[order[m]]);
  head /= static_cast<double>(cut);
  tail /= static_cast<double>(d - cut);
  if (!(head > 2.0 * tail))
    return {};
  std::vector<std::size_t> selected(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cut));
  std::sort(selected.begin(), selected.end());
  return selected;
}

//! Repeated random-subset two-sample tests. Iteration i draws its subset and
//! permutations from seeds derived from (seed, i) only. Both samples are
//! expected on the background standardization.
inline VariableSelection select_variables(const Dataset& xb,
                                          const Dataset& xbs,
                                          const VariableSelectionOptions& opts,
                                          std::uint64_t seed)
{
  const auto d = static_cast<std::size_t>(xb.cols());
  if (static_cast<std::size_t>(xbs.cols()) != d)
    throw invalid_argument("samples differ in dimension");
  if (opts.subset_size < 1 || opts.subset_size >= d)
    throw invalid_argument("subset size k = " + std::to_string(opts.subset_size) + " must satisfy 1 <= k < d = " +
                           std::to_string(d));
  if (opts.iterations < 1)
    throw invalid_argument("variable selection needs at least one iteration");

  const double h = normal_scale_bandwidth(xb.rows(), static_cast<Index>(opts.subset_size));
  std::vector<SubsetTest> tests(opts.iterations);
  parallel_for(opts.iterations, opts.threads, [&](std::size_t i) {
    const std::uint64_t iter_seed = derive_seed(seed, Stage::variable_selection, i);
    std::mt19937_64 rng(iter_seed);
    std::vector<std::size_t> all(d);
    std::iota(all.begin(), all.end(), std::size_t{ 0 });
    std::vector<std::size_t> subset;
    std::sample(all.begin(), all.end(), std::back_inserter(subset), static_cast<std::ptrdiff_t>(opts.subset_size), rng);
    tests[i].variables = subset;
    tests[i].bandwidth = h;
    tests[i].outcome = ise_test(project(xb, subset), project(xbs, subset), h, opts.permutations,
                                derive_seed(iter_seed, static_cast<std::uint64_t>(Stage::permutation)));
  });

  VariableSelection out;
  out.counter.count.assign(d, 0);
  out.counter.iterations = opts.iterations;
  out.counter.subset_size = opts.subset_size;
  out.counter.threshold = opts.threshold;
  for (const auto& t : tests) {
    if (t.outcome.p_value < opts.threshold) {
      ++out.counter.significant_iterations;
      for (auto v : t.variables)
        ++out.counter.count[v];
    }
  }
  out.selected = largest_gap_selection(out.counter.count);
  out.tests = std::move(tests);
  return out;
}

} // namespace semimodal
