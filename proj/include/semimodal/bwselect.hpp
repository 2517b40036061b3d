#pragma once

#include "agreement.hpp"
#include "core.hpp"
#include "kde.hpp"
#include "modal.hpp"

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace semimodal {

//! Strictly increasing positive bandwidths.
struct BandwidthGrid
{
  std::vector<double> values;

  explicit BandwidthGrid(std::vector<double> v)
    : values(std::move(v))
  {
    if (values.size() < 2)
      throw invalid_argument("bandwidth grid needs at least two values");
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!(values[i] > 0.0) || !std::isfinite(values[i]))
        throw invalid_argument("bandwidth grid values must be positive and finite");
      if (i > 0 && !(values[i] > values[i - 1]))
        throw invalid_argument("bandwidth grid must be strictly increasing");
    }
  }

  static BandwidthGrid log_spaced(double lo, double hi, std::size_t count)
  {
    if (count < 2 || !(lo > 0.0) || !(hi > lo))
      throw invalid_argument("log-spaced grid needs 0 < lo < hi and count >= 2");
    std::vector<double> v(count);
    const double step = std::log(hi / lo) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i)
      v[i] = lo * std::exp(step * static_cast<double>(i));
    v.back() = hi;
    return BandwidthGrid(std::move(v));
  }

  //! Default: log-spaced between lo_factor and hi_factor times the
  //! normal-scale bandwidth of the experimental sample.
  static BandwidthGrid around_normal_scale(const Dataset& experimental,
                                           double lo_factor = 0.2,
                                           double hi_factor = 3.0,
                                           std::size_t count = 30)
  {
    const double h = normal_scale_bandwidth(experimental);
    return log_spaced(lo_factor * h, hi_factor * h, count);
  }
};

struct BackgroundReference
{
  DensityModel model;
  Partition partition;  //!< modal partition of the background sample
  std::size_t modes() const { return partition.modes.size(); }
};

struct SweepOptions
{
  MeanShiftOptions mean_shift;
  AgreementIndex index = AgreementIndex::fowlkes_mallows;
  unsigned threads = 1;  //!< concurrent grid points
};

struct SweepRecord
{
  double bandwidth = 0.0;
  std::size_t modes = 0;             //!< modes of the experimental estimate
  double index = 0.0;                //!< agreement on the background sample
  bool in_constraint_set = false;    //!< modes > background modes
  std::size_t background_unassigned = 0;
  Partition experimental;            //!< modal partition of the experimental sample
};

enum class SweepStatus
{
  selected,
  no_extra_mode
};

struct BandwidthSearchResult
{
  std::vector<SweepRecord> records;
  std::size_t background_modes = 0;
  double background_bandwidth = 0.0;
  Partition background_partition;
  AgreementIndex index = AgreementIndex::fowlkes_mallows;
  std::optional<std::size_t> selected;  //!< position in `records`
  std::shared_ptr<const Dataset> experimental;

  SweepStatus status() const { return selected ? SweepStatus::selected : SweepStatus::no_extra_mode; }

  std::optional<double> selected_bandwidth() const
  {
    if (!selected)
      return std::nullopt;
    return records[*selected].bandwidth;
  }

  const SweepRecord& selected_record() const
  {
    if (!selected)
      throw Error(ErrorKind::numerical, "no candidate signal bandwidth");
    return records[*selected];
  }
};

inline BackgroundReference background_reference(const Dataset& background, double hb, const MeanShiftOptions& opts = {})
{
  DensityModel model(background, hb);
  auto clustering = cluster(model, background.values(), opts);
  return { std::move(model), std::move(clustering.partition) };
}

namespace detail {

inline SweepRecord evaluate_bandwidth(const BackgroundReference& ref,
                                      const std::shared_ptr<const Dataset>& experimental,
                                      double h,
                                      const SweepOptions& opts)
{
  DensityModel model(experimental, h);
  auto clustering = cluster(model, experimental->values(), opts.mean_shift);
  const auto& xb = ref.model.data().values();
  auto on_background = assign(clustering.partition.modes, model, xb, opts.mean_shift);

  SweepRecord rec;
  rec.bandwidth = h;
  rec.modes = clustering.partition.modes.size();
  rec.in_constraint_set = rec.modes > ref.modes();
  rec.background_unassigned = on_background.unassigned();
  const auto table = contingency(ref.partition.labels, on_background.labels);
  try {
    rec.index = agreement(opts.index, table);
  } catch (const Error&) {
    // Every cluster a singleton: no pair agrees.
    warn_agreement("agreement undefined at h = " + std::to_string(h) + ", using 0");
    rec.index = 0.0;
  }
  rec.experimental = std::move(clustering.partition);
  return rec;
}

//! Position of the largest index among constraint-set records; ties go to
//! the later (larger) bandwidth.
inline std::optional<std::size_t> select_record(const std::vector<SweepRecord>& records)
{
  std::optional<std::size_t> best;
  for (std::size_t g = 0; g < records.size(); ++g)
    if (records[g].in_constraint_set && (!best || records[g].index >= records[*best].index))
      best = g;
  return best;
}

} // namespace detail

//! Evaluates every grid bandwidth and selects the one maximizing agreement
//! among those whose experimental estimate has more modes than the
//! background estimate. Ties go to the larger bandwidth.
inline BandwidthSearchResult sweep(const BackgroundReference& ref,
                                   const Dataset& experimental,
                                   const BandwidthGrid& grid,
                                   const SweepOptions& opts = {})
{
  if (experimental.cols() != ref.model.dimension())
    throw invalid_argument("background and experimental samples differ in dimension");
  auto xbs = std::make_shared<const Dataset>(experimental.without_truth());
  BandwidthSearchResult result;
  result.records.resize(grid.values.size());
  parallel_for(grid.values.size(), opts.threads, [&](std::size_t g) {
    result.records[g] = detail::evaluate_bandwidth(ref, xbs, grid.values[g], opts);
  });
  result.background_modes = ref.modes();
  result.background_bandwidth = ref.model.bandwidth();
  result.background_partition = ref.partition;
  result.index = opts.index;
  result.experimental = xbs;
  result.selected = detail::select_record(result.records);
  return result;
}

inline BandwidthSearchResult sweep(const Dataset& background,
                                   const Dataset& experimental,
                                   double hb,
                                   const BandwidthGrid& grid,
                                   const SweepOptions& opts = {})
{
  if (background.cols() != experimental.cols())
    throw invalid_argument("background and experimental samples differ in dimension");
  return sweep(background_reference(background, hb, opts.mean_shift), experimental, grid, opts);
}

//! Modal partition of the experimental sample at the selected bandwidth.
inline Partition final_partition(const BandwidthSearchResult& result,
                                 const Dataset& experimental,
                                 const MeanShiftOptions& opts = {})
{
  const auto& rec = result.selected_record();
  if (result.experimental && result.experimental->values() == experimental.values())
    return rec.experimental;
  DensityModel model(experimental, rec.bandwidth);
  return cluster(model, experimental.values(), opts).partition;
}

//! Longest run of consecutive grid points with `mode_count` modes whose
//! agreement values all lie within `tolerance` of the run maximum.
struct Plateau
{
  std::size_t first = 0;
  std::size_t length = 0;
  double max_index = 0.0;
};

inline Plateau longest_plateau(const BandwidthSearchResult& result, std::size_t mode_count, double tolerance)
{
  Plateau best;
  const auto& r = result.records;
  for (std::size_t a = 0; a < r.size(); ++a) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t b = a; b < r.size() && r[b].modes == mode_count; ++b) {
      lo = std::min(lo, r[b].index);
      hi = std::max(hi, r[b].index);
      if (hi - lo > tolerance)
        break;
      if (b - a + 1 > best.length)
        best = { a, b - a + 1, hi };
    }
  }
  return best;
}

} // namespace semimodal
