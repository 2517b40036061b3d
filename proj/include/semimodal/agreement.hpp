#pragma once

#include "core.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace semimodal {

//! Cross-tabulation of two labelings of the same n points. Rows follow the
//! sorted distinct labels of the first labeling, columns those of the second.
struct ContingencyTable
{
  std::vector<std::vector<std::int64_t>> counts;
  std::vector<int> row_labels;
  std::vector<int> col_labels;
  std::int64_t n = 0;

  std::size_t rows() const { return counts.size(); }
  std::size_t cols() const { return counts.empty() ? 0 : counts.front().size(); }

  static ContingencyTable from_counts(std::vector<std::vector<std::int64_t>> counts)
  {
    ContingencyTable t;
    if (counts.empty() || counts.front().empty())
      throw invalid_argument("contingency table must be non-empty");
    for (const auto& row : counts) {
      if (row.size() != counts.front().size())
        throw invalid_argument("contingency table rows differ in length");
      for (auto c : row) {
        if (c < 0)
          throw invalid_argument("contingency counts must be nonnegative");
        t.n += c;
      }
    }
    for (std::size_t r = 0; r < counts.size(); ++r)
      t.row_labels.push_back(static_cast<int>(r + 1));
    for (std::size_t c = 0; c < counts.front().size(); ++c)
      t.col_labels.push_back(static_cast<int>(c + 1));
    t.counts = std::move(counts);
    return t;
  }
};

inline ContingencyTable contingency(const std::vector<int>& a, const std::vector<int>& b)
{
  if (a.size() != b.size())
    throw invalid_argument("labelings differ in length (" + std::to_string(a.size()) + " vs " +
                           std::to_string(b.size()) + ")");
  std::map<int, std::size_t> ra, cb;
  for (int l : a)
    ra.emplace(l, 0);
  for (int l : b)
    cb.emplace(l, 0);
  ContingencyTable t;
  for (auto& [label, idx] : ra) {
    idx = t.row_labels.size();
    t.row_labels.push_back(label);
  }
  for (auto& [label, idx] : cb) {
    idx = t.col_labels.size();
    t.col_labels.push_back(label);
  }
  t.counts.assign(ra.size(), std::vector<std::int64_t>(cb.size(), 0));
  for (std::size_t i = 0; i < a.size(); ++i)
    ++t.counts[ra[a[i]]][cb[b[i]]];
  t.n = static_cast<std::int64_t>(a.size());
  return t;
}

//! Pair counts derived from a table: pairs together in both labelings,
//! together in the first, together in the second, and all pairs.
struct PairCounts
{
  double both = 0;
  double first = 0;
  double second = 0;
  double total = 0;
};

inline PairCounts pair_counts(const ContingencyTable& t)
{
  auto choose2 = [](std::int64_t m) { return 0.5 * static_cast<double>(m) * static_cast<double>(m - 1); };
  PairCounts p;
  std::vector<std::int64_t> col_sums(t.cols(), 0);
  for (const auto& row : t.counts) {
    std::int64_t row_sum = 0;
    for (std::size_t c = 0; c < row.size(); ++c) {
      p.both += choose2(row[c]);
      row_sum += row[c];
      col_sums[c] += row[c];
    }
    p.first += choose2(row_sum);
  }
  for (auto s : col_sums)
    p.second += choose2(s);
  p.total = choose2(t.n);
  return p;
}

//! TP / sqrt((TP + FP)(TP + FN)). Defined when one side is a single class.
inline double fowlkes_mallows(const ContingencyTable& t)
{
  const auto p = pair_counts(t);
  if (p.first == 0.0 || p.second == 0.0)
    throw invalid_argument("degenerate partition: all classes are singletons");
  return p.both / std::sqrt(p.first * p.second);
}

//! Invoked when an index falls back to its degenerate-denominator convention.
inline std::function<void(const std::string&)>& agreement_warning_sink()
{
  static std::function<void(const std::string&)> sink;
  return sink;
}

namespace detail {
inline void warn_agreement(const std::string& msg)
{
  if (auto& sink = agreement_warning_sink())
    sink(msg);
}
} // namespace detail

//! Permutation-model adjusted Rand index. Returns 1 when the expected and
//! maximum indices coincide (e.g. both labelings single-class).
inline double adjusted_rand(const ContingencyTable& t)
{
  const auto p = pair_counts(t);
  if (p.total == 0.0)
    throw invalid_argument("adjusted Rand index needs n >= 2");
  const double expected = p.first * p.second / p.total;
  const double maximum = 0.5 * (p.first + p.second);
  const double denom = maximum - expected;
  if (denom == 0.0) {
    detail::warn_agreement("adjusted Rand index: zero denominator, using 1");
    return 1.0;
  }
  return (p.both - expected) / denom;
}

//! Pairwise Jaccard TP / (TP + FP + FN); 1 when no pair is together anywhere.
inline double jaccard(const ContingencyTable& t)
{
  const auto p = pair_counts(t);
  const double denom = p.first + p.second - p.both;
  if (denom == 0.0) {
    detail::warn_agreement("Jaccard index: no co-clustered pairs, using 1");
    return 1.0;
  }
  return p.both / denom;
}

inline double true_positive_rate(const ContingencyTable& t, std::size_t positive_row, std::size_t positive_col)
{
  if (positive_row >= t.rows() || positive_col >= t.cols())
    throw invalid_argument("positive class index out of range");
  std::int64_t margin = 0;
  for (auto c : t.counts[positive_row])
    margin += c;
  if (margin == 0)
    throw invalid_argument("positive class row is empty");
  return static_cast<double>(t.counts[positive_row][positive_col]) / static_cast<double>(margin);
}

enum class AgreementIndex
{
  fowlkes_mallows,
  jaccard,
  adjusted_rand
};

inline double agreement(AgreementIndex index, const ContingencyTable& t)
{
  switch (index) {
    case AgreementIndex::jaccard:
      return jaccard(t);
    case AgreementIndex::adjusted_rand:
      return adjusted_rand(t);
    case AgreementIndex::fowlkes_mallows:
    default:
      return fowlkes_mallows(t);
  }
}

inline std::string to_string(AgreementIndex index)
{
  switch (index) {
    case AgreementIndex::jaccard:
      return "jaccard";
    case AgreementIndex::adjusted_rand:
      return "adjusted_rand";
    case AgreementIndex::fowlkes_mallows:
    default:
      return "fowlkes_mallows";
  }
}

inline AgreementIndex parse_agreement_index(const std::string& name)
{
  if (name == "fowlkes_mallows" || name == "fm")
    return AgreementIndex::fowlkes_mallows;
  if (name == "jaccard")
    return AgreementIndex::jaccard;
  if (name == "adjusted_rand" || name == "ari")
    return AgreementIndex::adjusted_rand;
  throw Error(ErrorKind::config, "unknown agreement index '" + name + "'");
}

} // namespace semimodal
