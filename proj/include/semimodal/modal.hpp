#pragma once

#include "core.hpp"
#include "kde.hpp"

#include <Eigen/Cholesky>

#include <limits>
#include <numeric>
#include <optional>
#include <vector>

namespace semimodal {

//! Label of points whose ascent could not reach any mode.
inline constexpr int kUnassigned = 0;

struct MeanShiftOptions
{
  double tol_step = 1e-6;  //!< stop when a step is shorter than tol_step * h
  int max_iter = 10000;
  double tol_merge = 0.1;  //!< endpoints closer than tol_merge * h share a mode
  //! Groups holding fewer than this fraction of the starts are not kept as
  //! modes; their members join the nearest kept mode.
  double min_cluster_fraction = 0.0;
  unsigned threads = 1;
};

//! Distinct modes sorted by descending density; row k of `locations` is mode k.
struct ModeSet
{
  Matrix locations;
  Vector densities;

  std::size_t size() const noexcept { return static_cast<std::size_t>(locations.rows()); }
  Vector location(std::size_t k) const { return locations.row(static_cast<Index>(k)).transpose(); }
};

//! Cluster labels in {1..M} (kUnassigned for unreachable points); label k
//! refers to row k - 1 of `modes.locations`.
struct Partition
{
  std::vector<int> labels;
  ModeSet modes;

  std::size_t unassigned() const
  {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), kUnassigned));
  }

  std::vector<std::size_t> cluster_sizes() const
  {
    std::vector<std::size_t> sizes(modes.size(), 0);
    for (int l : labels)
      if (l != kUnassigned)
        ++sizes[static_cast<std::size_t>(l - 1)];
    return sizes;
  }
};

namespace detail {

struct Ascent
{
  Vector point;
  int iterations = 0;
  bool converged = false;
  bool reachable = true;
};

//! Mean-shift fixed point iteration x <- sum_i w_i x_i / sum_i w_i with
//! Gaussian weights. Weights are rescaled by the largest one before
//! exponentiation; terms below e^-700 of the largest are dropped, which
//! leaves every sum unchanged in double precision.
inline Ascent mean_shift(const DensityModel& model, Vector x, const MeanShiftOptions& opts, std::vector<double>& work)
{
  const Matrix& X = model.data().values();
  const Index n = X.rows();
  const Index d = X.cols();
  const double h = model.bandwidth();
  const double c = -0.5 / (h * h);
  const double tol = opts.tol_step * h;
  work.resize(static_cast<std::size_t>(n));
  double* arg = work.data();

  Ascent out;
  Vector next(d);
  for (int it = 0; it < opts.max_iter; ++it) {
    std::fill(arg, arg + n, 0.0);
    for (Index j = 0; j < d; ++j) {
      const double xj = x(j);
      const double* col = X.col(j).data();
#pragma omp simd
      for (Index i = 0; i < n; ++i) {
        const double diff = xj - col[i];
        arg[i] += diff * diff;
      }
    }
    double top = -std::numeric_limits<double>::infinity();
#pragma omp simd reduction(max : top)
    for (Index i = 0; i < n; ++i) {
      arg[i] *= c;
      top = arg[i] > top ? arg[i] : top;
    }
    if (std::exp(top) == 0.0) {
      out.point = std::move(x);
      out.iterations = it;
      out.reachable = false;
      return out;
    }
    double wsum = 0.0;
#pragma omp simd reduction(+ : wsum)
    for (Index i = 0; i < n; ++i) {
      const double t = arg[i] - top;
      const double clamped = t < -700.0 ? -700.0 : t;
      const double w = exp_nonpositive(clamped) * static_cast<double>(t >= -700.0);
      arg[i] = w;
      wsum += w;
    }
    for (Index j = 0; j < d; ++j) {
      const double* col = X.col(j).data();
      double acc = 0.0;
#pragma omp simd reduction(+ : acc)
      for (Index i = 0; i < n; ++i)
        acc += arg[i] * col[i];
      next(j) = acc / wsum;
    }
    const double step = (next - x).norm();
    x.swap(next);
    out.iterations = it + 1;
    if (step < tol) {
      out.converged = true;
      break;
    }
  }
  out.point = std::move(x);
  return out;
}

class DisjointSets
{
public:
  explicit DisjointSets(std::size_t n)
    : parent_(n)
  {
    std::iota(parent_.begin(), parent_.end(), std::size_t{ 0 });
  }

  std::size_t find(std::size_t i)
  {
    while (parent_[i] != i) {
      parent_[i] = parent_[parent_[i]];
      i = parent_[i];
    }
    return i;
  }

  void unite(std::size_t a, std::size_t b)
  {
    a = find(a);
    b = find(b);
    if (a != b)
      parent_[std::max(a, b)] = std::min(a, b);
  }

private:
  std::vector<std::size_t> parent_;
};

//! Single-linkage grouping of the rows of `points` at distance < radius.
//! Returns a group id per row, or -1 for rows flagged in `skip`.
inline std::vector<long> single_linkage(const Matrix& points, double radius, const std::vector<bool>& skip)
{
  const auto n = static_cast<std::size_t>(points.rows());
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < n; ++i)
    if (!skip[i])
      order.push_back(i);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double pa = points(static_cast<Index>(a), 0), pb = points(static_cast<Index>(b), 0);
    return pa < pb || (pa == pb && a < b);
  });
  DisjointSets sets(n);
  const double r2 = radius * radius;
  for (std::size_t a = 0; a < order.size(); ++a) {
    const auto ia = static_cast<Index>(order[a]);
    for (std::size_t b = a + 1; b < order.size(); ++b) {
      const auto ib = static_cast<Index>(order[b]);
      if (points(ib, 0) - points(ia, 0) >= radius)
        break;
      if ((points.row(ia) - points.row(ib)).squaredNorm() < r2)
        sets.unite(order[a], order[b]);
    }
  }
  std::vector<long> group(n, -1);
  for (std::size_t i = 0; i < n; ++i)
    if (!skip[i])
      group[i] = static_cast<long>(sets.find(i));
  return group;
}

//! Newton polish of a converged endpoint, falling back to a mean-shift step
//! when the Hessian is not negative definite, the Newton step leaves the
//! merge radius, or it lowers the density. Stops once |grad| * n * h^(d+1)
//! drops below 1e-9.
inline Vector refine_mode(const DensityModel& model, Vector x, double radius)
{
  const double h = model.bandwidth();
  const double scale = static_cast<double>(model.size()) * std::pow(h, static_cast<double>(model.dimension() + 1));
  double f = model.density(x);
  for (int it = 0; it < 50 && f > 0.0; ++it) {
    const Vector g = model.gradient(x);
    if (g.norm() * scale < 1e-9)
      break;
    Vector next;
    double fn = -1.0;
    const Eigen::LLT<Matrix> llt(-model.hessian(x));
    if (llt.info() == Eigen::Success) {
      next = x + llt.solve(g);
      if ((next - x).norm() < radius)
        fn = model.density(next);
    }
    if (!(fn >= f)) {
      next = x + (h * h / f) * g;
      fn = model.density(next);
      if (!(fn >= f))
        break;
    }
    if (next == x)
      break;
    x = std::move(next);
    f = fn;
  }
  return x;
}

} // namespace detail

//! Follows the mean-shift path from x0 until the step length drops below
//! tol_step * h or max_iter is reached. Throws if every kernel weight
//! underflows at x0.
inline Vector ascend(const DensityModel& model, const Vector& x0, const MeanShiftOptions& opts = {})
{
  if (x0.size() != model.dimension())
    throw invalid_argument("start point has dimension " + std::to_string(x0.size()) + ", model has " +
                           std::to_string(model.dimension()));
  std::vector<double> work;
  auto a = detail::mean_shift(model, x0, opts, work);
  if (!a.reachable)
    throw Error(ErrorKind::numerical, "unreachable point: all kernel weights underflow");
  return std::move(a.point);
}

//! Index of the mode nearest to `endpoint`; lower index wins ties.
inline int nearest_mode(const ModeSet& modes, const Vector& endpoint)
{
  int best = kUnassigned;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < modes.size(); ++k) {
    const double d2 = (modes.locations.row(static_cast<Index>(k)).transpose() - endpoint).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = static_cast<int>(k + 1);
    }
  }
  return best;
}

//! Mode seeking plus the grouping of the start points.
struct ModalClustering
{
  Partition partition;              //!< labels of the start points
  Matrix endpoints;                 //!< converged location of each start
  std::vector<int> iterations;
  std::size_t failed = 0;           //!< starts whose weights all underflowed
};

inline std::vector<detail::Ascent> ascend_all(const DensityModel& model, const Matrix& starts, const MeanShiftOptions& opts)
{
  std::vector<detail::Ascent> out(static_cast<std::size_t>(starts.rows()));
  parallel_for(out.size(), opts.threads, [&](std::size_t i) {
    thread_local std::vector<double> work;
    out[i] = detail::mean_shift(model, starts.row(static_cast<Index>(i)).transpose(), opts, work);
  });
  return out;
}

//! Ascends from every start, merges endpoints by single linkage at
//! tol_merge * h, and represents each group by its highest-density endpoint
//! after Newton polishing.
inline ModalClustering cluster(const DensityModel& model, const Matrix& starts, const MeanShiftOptions& opts = {})
{
  if (starts.rows() < 1)
    throw invalid_argument("mode search needs at least one start point");
  if (starts.cols() != model.dimension())
    throw invalid_argument("start points have the wrong dimension");
  const auto n = static_cast<std::size_t>(starts.rows());
  auto ascents = ascend_all(model, starts, opts);

  ModalClustering out;
  out.endpoints.resize(starts.rows(), starts.cols());
  out.iterations.resize(n);
  std::vector<bool> skip(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    out.endpoints.row(static_cast<Index>(i)) = ascents[i].point.transpose();
    out.iterations[i] = ascents[i].iterations;
    if (!ascents[i].reachable) {
      skip[i] = true;
      ++out.failed;
    }
  }
  if (out.failed == n)
    throw Error(ErrorKind::numerical, "unreachable point: no start could ascend to a mode");

  const auto group = detail::single_linkage(out.endpoints, opts.tol_merge * model.bandwidth(), skip);
  Vector dens = Vector::Zero(static_cast<Index>(n));
  parallel_for(n, opts.threads, [&](std::size_t i) {
    if (!skip[i])
      dens(static_cast<Index>(i)) = model.density(Vector(out.endpoints.row(static_cast<Index>(i)).transpose()));
  });

  // Highest-density endpoint per group; lowest index on ties.
  std::vector<long> reps;
  std::vector<long> best(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (skip[i])
      continue;
    auto g = static_cast<std::size_t>(group[i]);
    if (best[g] < 0) {
      best[g] = static_cast<long>(i);
      reps.push_back(static_cast<long>(g));
    } else if (dens(static_cast<Index>(i)) > dens(best[g])) {
      best[g] = static_cast<long>(i);
    }
  }
  std::vector<std::size_t> group_size(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    if (!skip[i])
      ++group_size[static_cast<std::size_t>(group[i])];
  const double min_size = opts.min_cluster_fraction * static_cast<double>(n - out.failed);
  std::vector<std::size_t> rep_rows;
  for (long g : reps)
    if (static_cast<double>(group_size[static_cast<std::size_t>(g)]) >= min_size)
      rep_rows.push_back(static_cast<std::size_t>(best[static_cast<std::size_t>(g)]));
  if (rep_rows.empty()) {
    // Every group is small: keep the largest (first seen on ties).
    long keep = reps.front();
    for (long g : reps)
      if (group_size[static_cast<std::size_t>(g)] > group_size[static_cast<std::size_t>(keep)])
        keep = g;
    rep_rows.push_back(static_cast<std::size_t>(best[static_cast<std::size_t>(keep)]));
  }
  std::vector<Vector> polished(n);
  parallel_for(rep_rows.size(), opts.threads, [&](std::size_t k) {
    const auto r = static_cast<Index>(rep_rows[k]);
    polished[rep_rows[k]] = detail::refine_mode(model, out.endpoints.row(r).transpose(), opts.tol_merge * model.bandwidth());
    dens(r) = model.density(polished[rep_rows[k]]);
  });
  std::sort(rep_rows.begin(), rep_rows.end(), [&](std::size_t a, std::size_t b) {
    const double da = dens(static_cast<Index>(a)), db = dens(static_cast<Index>(b));
    return da > db || (da == db && a < b);
  });

  ModeSet modes;
  modes.locations.resize(static_cast<Index>(rep_rows.size()), starts.cols());
  modes.densities.resize(static_cast<Index>(rep_rows.size()));
  std::vector<int> label_of_group(n, kUnassigned);
  for (std::size_t k = 0; k < rep_rows.size(); ++k) {
    const auto r = static_cast<Index>(rep_rows[k]);
    modes.locations.row(static_cast<Index>(k)) = polished[rep_rows[k]].transpose();
    modes.densities(static_cast<Index>(k)) = dens(r);
    label_of_group[static_cast<std::size_t>(group[rep_rows[k]])] = static_cast<int>(k + 1);
  }
  out.partition.labels.resize(n, kUnassigned);
  for (std::size_t i = 0; i < n; ++i) {
    if (skip[i])
      continue;
    const int l = label_of_group[static_cast<std::size_t>(group[i])];
    out.partition.labels[i] = l != kUnassigned ? l : nearest_mode(modes, out.endpoints.row(static_cast<Index>(i)).transpose());
  }
  out.partition.modes = std::move(modes);
  return out;
}

inline ModeSet find_modes(const DensityModel& model, const Matrix& starts, const MeanShiftOptions& opts = {})
{
  return cluster(model, starts, opts).partition.modes;
}

inline std::size_t count_modes(const DensityModel& model, const MeanShiftOptions& opts = {})
{
  return find_modes(model, model.data().values(), opts).size();
}

//! Labels arbitrary points by the mode nearest to their ascent endpoint on
//! `model`. Points whose weights all underflow get kUnassigned.
inline Partition assign(const ModeSet& modes, const DensityModel& model, const Matrix& points, const MeanShiftOptions& opts = {})
{
  if (modes.size() == 0)
    throw invalid_argument("cannot assign points to an empty mode set");
  if (points.cols() != model.dimension() || modes.locations.cols() != model.dimension())
    throw invalid_argument("points, modes and model must share a dimension");
  auto ascents = ascend_all(model, points, opts);
  Partition p;
  p.modes = modes;
  p.labels.resize(ascents.size(), kUnassigned);
  for (std::size_t i = 0; i < ascents.size(); ++i)
    if (ascents[i].reachable)
      p.labels[i] = nearest_mode(modes, ascents[i].point);
  return p;
}

} // namespace semimodal
