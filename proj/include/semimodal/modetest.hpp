#pragma once

#include "core.hpp"
#include "dataset.hpp"
#include "kde.hpp"
#include "modal.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace semimodal {

struct ModeTestOptions
{
  double alpha = 0.001;
  std::size_t replicates = 1000;  //!< B
  unsigned threads = 1;
};

inline constexpr std::size_t kMinReplicates = 200;

struct ModeVerdict
{
  Vector location;
  Vector eigenvalues;  //!< nondecreasing, from the full test sample
  Vector lower;
  Vector upper;
  Vector nonnegative_share;  //!< bootstrap share of replicates with eigenvalue >= 0
  double p = 1.0;
  bool significant = false;
};

struct ModeTestResult
{
  std::vector<ModeVerdict> modes;
  double alpha = 0.0;
  std::size_t replicates = 0;
  double bandwidth = 0.0;
};

namespace detail {

//! Type-7 sample quantile (linear interpolation between order statistics).
inline double quantile_sorted(const std::vector<double>& sorted, double prob)
{
  const double pos = prob * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline Vector symmetric_eigenvalues(Matrix h)
{
  h = 0.5 * (h + h.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(h, Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

} // namespace detail

//! Bootstrap confidence intervals for the eigenvalues of the density Hessian
//! at fixed mode locations. Each replicate resamples the test data with
//! replacement and re-evaluates the Hessian at the same locations. Intervals
//! are percentile intervals at level alpha / d per eigenvalue (Bonferroni);
//! a mode is significant when every upper bound is negative.
inline ModeTestResult test_modes(const ModeSet& modes,
                                 const Dataset& test_data,
                                 double h,
                                 const ModeTestOptions& opts,
                                 std::uint64_t seed)
{
  if (opts.replicates < kMinReplicates)
    throw invalid_argument("mode test needs at least " + std::to_string(kMinReplicates) + " bootstrap replicates, got " +
                           std::to_string(opts.replicates));
  if (!(opts.alpha > 0.0 && opts.alpha < 1.0))
    throw invalid_argument("alpha must lie in (0, 1)");
  if (test_data.rows() < 2)
    throw invalid_argument("mode test needs at least two test observations");
  if (modes.locations.cols() != test_data.cols())
    throw invalid_argument("modes and test data differ in dimension");

  const Index n = test_data.rows();
  const Index d = test_data.cols();
  const std::size_t B = opts.replicates;
  const auto M = modes.size();
  const Matrix& X = test_data.values();
  const double h2 = h * h;
  const double scale = detail::gaussian_norm(d) / (static_cast<double>(n) * std::pow(h, static_cast<double>(d + 2)));
  const Index packed = d * (d + 1) / 2;

  // Per-point Hessian terms at each location, lower triangle packed column-wise.
  std::vector<Matrix> terms(M, Matrix(n, packed));
  for (std::size_t m = 0; m < M; ++m) {
    const Vector loc = modes.location(m);
    for (Index i = 0; i < n; ++i) {
      const Vector diff = loc - X.row(i).transpose();
      const double w = std::exp(-0.5 * diff.squaredNorm() / h2) * scale;
      Index k = 0;
      for (Index c = 0; c < d; ++c)
        for (Index r = c; r < d; ++r, ++k)
          terms[m](i, k) = w * (diff(r) * diff(c) / h2 - (r == c ? 1.0 : 0.0));
    }
  }
  auto unpack = [d](const Vector& v) {
    Matrix H(d, d);
    Index k = 0;
    for (Index c = 0; c < d; ++c)
      for (Index r = c; r < d; ++r, ++k)
        H(r, c) = H(c, r) = v(k);
    return H;
  };

  // draws[m] is B x d: eigenvalues of replicate b in row b.
  std::vector<Matrix> draws(M, Matrix(static_cast<Index>(B), d));
  parallel_for(B, opts.threads, [&](std::size_t b) {
    std::mt19937_64 rng(derive_seed(seed, Stage::bootstrap, b));
    std::uniform_int_distribution<Index> pick(0, n - 1);
    Vector counts = Vector::Zero(n);
    for (Index i = 0; i < n; ++i)
      counts(pick(rng)) += 1.0;
    for (std::size_t m = 0; m < M; ++m)
      draws[m].row(static_cast<Index>(b)) = detail::symmetric_eigenvalues(unpack(terms[m].transpose() * counts)).transpose();
  });

  ModeTestResult result;
  result.alpha = opts.alpha;
  result.replicates = B;
  result.bandwidth = h;
  const double tail = opts.alpha / static_cast<double>(d) / 2.0;
  for (std::size_t m = 0; m < M; ++m) {
    ModeVerdict v;
    v.location = modes.location(m);
    v.eigenvalues = detail::symmetric_eigenvalues(unpack(terms[m].colwise().sum().transpose()));
    v.lower.resize(d);
    v.upper.resize(d);
    v.nonnegative_share.resize(d);
    double worst_share = 0.0;
    for (Index j = 0; j < d; ++j) {
      std::vector<double> col(B);
      for (std::size_t b = 0; b < B; ++b)
        col[b] = draws[m](static_cast<Index>(b), j);
      std::sort(col.begin(), col.end());
      // Intervals always cover the point estimate.
      v.lower(j) = std::min(detail::quantile_sorted(col, tail), v.eigenvalues(j));
      v.upper(j) = std::max(detail::quantile_sorted(col, 1.0 - tail), v.eigenvalues(j));
      const auto nonneg = static_cast<double>(col.end() - std::lower_bound(col.begin(), col.end(), 0.0));
      v.nonnegative_share(j) = nonneg / static_cast<double>(B);
      worst_share = std::max(worst_share, v.nonnegative_share(j));
    }
    // All eigenvalues must be negative, so the least negative one decides.
    v.p = std::min(1.0, static_cast<double>(d) * worst_share);
    v.significant = (v.upper.array() < 0.0).all();
    result.modes.push_back(std::move(v));
  }
  return result;
}

struct GateSummary
{
  bool signal_claim = false;
  std::vector<std::size_t> background_matched;  //!< experimental modes paired with a background mode
  std::vector<std::size_t> candidates;          //!< the remaining (extra) modes
  std::vector<std::size_t> significant_candidates;
};

//! Pairs each background mode, in order, with the nearest unpaired
//! experimental mode; the rest are signal candidates. A signal is claimed
//! when every candidate is significant.
inline GateSummary gate(const ModeTestResult& result, const ModeSet& background_modes)
{
  const auto m_bs = result.modes.size();
  const auto m_b = background_modes.size();
  if (m_bs <= m_b)
    throw invalid_argument("gate needs more experimental modes (" + std::to_string(m_bs) + ") than background modes (" +
                           std::to_string(m_b) + ")");
  GateSummary g;
  std::vector<bool> taken(m_bs, false);
  for (std::size_t b = 0; b < m_b; ++b) {
    const Vector loc = background_modes.location(b);
    std::size_t best = m_bs;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < m_bs; ++k) {
      if (taken[k])
        continue;
      const double d2 = (result.modes[k].location - loc).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = k;
      }
    }
    taken[best] = true;
    g.background_matched.push_back(best);
  }
  std::sort(g.background_matched.begin(), g.background_matched.end());
  for (std::size_t k = 0; k < m_bs; ++k) {
    if (taken[k])
      continue;
    g.candidates.push_back(k);
    if (result.modes[k].significant)
      g.significant_candidates.push_back(k);
  }
  g.signal_claim = g.significant_candidates.size() >= m_bs - m_b;
  return g;
}

} // namespace semimodal
