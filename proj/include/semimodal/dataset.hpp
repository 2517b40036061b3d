#pragma once

#include "core.hpp"

#include <Eigen/Cholesky>

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace semimodal {

//! Evaluation-only class tag of a row.
enum class Truth : std::uint8_t
{
  background,
  signal
};

//! An n x d table of finite reals with column names and optional truth tags.
//! Immutable after construction.
class Dataset
{
public:
  Dataset(Matrix values,
          std::vector<std::string> columns,
          std::optional<std::vector<Truth>> truth = std::nullopt)
    : values_(std::move(values))
    , columns_(std::move(columns))
    , truth_(std::move(truth))
  {
    if (values_.rows() < 1 || values_.cols() < 1)
      throw invalid_argument("dataset must have at least one row and one column");
    if (static_cast<Index>(columns_.size()) != values_.cols())
      throw invalid_argument("dataset has " + std::to_string(values_.cols()) + " columns but " +
                             std::to_string(columns_.size()) + " names");
    if (truth_ && static_cast<Index>(truth_->size()) != values_.rows())
      throw invalid_argument("truth labels do not match the number of rows");
    for (Index j = 0; j < values_.cols(); ++j)
      for (Index i = 0; i < values_.rows(); ++i)
        if (!std::isfinite(values_(i, j)))
          throw invalid_argument("non-finite value at row " + std::to_string(i + 1) +
                                 ", column '" + columns_[j] + "'");
  }

  //! Unnamed columns x1..xd.
  explicit Dataset(const Matrix& values)
    : Dataset(values, default_names(values.cols()))
  {}

  Index rows() const noexcept { return values_.rows(); }
  Index cols() const noexcept { return values_.cols(); }
  const Matrix& values() const noexcept { return values_; }
  const std::vector<std::string>& columns() const noexcept { return columns_; }
  bool has_truth() const noexcept { return truth_.has_value(); }
  const std::optional<std::vector<Truth>>& truth() const noexcept { return truth_; }
  Vector row(Index i) const { return values_.row(i).transpose(); }

  Dataset without_truth() const { return Dataset(values_, columns_); }

  static std::vector<std::string> default_names(Index d)
  {
    std::vector<std::string> names;
    for (Index j = 0; j < d; ++j)
      names.push_back("x" + std::to_string(j + 1));
    return names;
  }

private:
  Matrix values_;
  std::vector<std::string> columns_;
  std::optional<std::vector<Truth>> truth_;
};

//! Raw label values of the truth column.
struct LabelMap
{
  std::string background;
  std::string signal;
};

namespace detail {

inline std::string_view trim(std::string_view s)
{
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line, char sep = ',')
{
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s)
{
  if (!s.empty() && s.front() == '+')
    s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    return std::nullopt;
  return v;
}

inline std::string format_double(double v)
{
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline LabelMap infer_label_map(const std::set<std::string>& seen, const std::string& column)
{
  static const std::pair<const char*, const char*> known[] = {
    { "0", "1" }, { "b", "s" }, { "B", "S" }, { "background", "signal" }
  };
  for (const auto& [bg, sig] : known) {
    bool ok = true;
    for (const auto& v : seen)
      ok = ok && (v == bg || v == sig);
    if (ok)
      return { bg, sig };
  }
  std::string values;
  for (const auto& v : seen)
    values += (values.empty() ? "" : ", ") + v;
  throw Error(ErrorKind::parse,
              "cannot infer background/signal from values {" + values + "} of label column '" +
                column + "'; configure the label values explicitly");
}

} // namespace detail

//! Parses a header-first comma-separated table. The named label column, if
//! any, is removed from the values and mapped to truth tags.
inline Dataset read_csv(std::istream& in,
                        const std::string& source,
                        const std::optional<std::string>& label_column = std::nullopt,
                        const std::optional<LabelMap>& labels = std::nullopt)
{
  std::string line;
  if (!std::getline(in, line))
    throw Error(ErrorKind::parse, source + ": empty file, header row expected");
  std::vector<std::string> header;
  for (auto f : detail::split_fields(line))
    header.emplace_back(f);

  std::optional<std::size_t> label_pos;
  if (label_column) {
    auto it = std::find(header.begin(), header.end(), *label_column);
    if (it == header.end())
      throw Error(ErrorKind::parse, source + ": label column '" + *label_column + "' not found");
    label_pos = static_cast<std::size_t>(it - header.begin());
  }

  std::vector<std::string> names;
  for (std::size_t j = 0; j < header.size(); ++j)
    if (!label_pos || j != *label_pos)
      names.push_back(header[j]);
  if (names.empty())
    throw Error(ErrorKind::parse, source + ": no numeric columns");

  std::vector<double> flat;
  std::vector<std::string> raw_labels;
  std::size_t line_no = 1;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty())
      continue;
    auto fields = detail::split_fields(line);
    if (fields.size() != header.size())
      throw Error(ErrorKind::parse,
                  source + ":" + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                    " fields, found " + std::to_string(fields.size()));
    ++n;
    for (std::size_t j = 0; j < fields.size(); ++j) {
      if (label_pos && j == *label_pos) {
        raw_labels.emplace_back(fields[j]);
        continue;
      }
      auto v = detail::parse_double(fields[j]);
      if (!v || !std::isfinite(*v))
        throw Error(ErrorKind::parse,
                    source + ": row " + std::to_string(n) + " (line " + std::to_string(line_no) +
                      "), column '" + header[j] + "': invalid numeric value '" + std::string(fields[j]) + "'");
      flat.push_back(*v);
    }
  }
  if (n == 0)
    throw Error(ErrorKind::parse, source + ": no data rows");

  const auto d = static_cast<Index>(names.size());
  Matrix values(static_cast<Index>(n), d);
  for (std::size_t i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j)
      values(static_cast<Index>(i), j) = flat[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)];

  std::optional<std::vector<Truth>> truth;
  if (label_pos) {
    LabelMap map;
    if (labels) {
      map = *labels;
    } else {
      map = detail::infer_label_map(std::set<std::string>(raw_labels.begin(), raw_labels.end()), *label_column);
    }
    std::vector<Truth> t;
    t.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (raw_labels[i] == map.background)
        t.push_back(Truth::background);
      else if (raw_labels[i] == map.signal)
        t.push_back(Truth::signal);
      else
        throw Error(ErrorKind::parse, source + ": row " + std::to_string(i + 1) + ": label '" + raw_labels[i] +
                                        "' is neither '" + map.background + "' nor '" + map.signal + "'");
    }
    truth = std::move(t);
  }
  return Dataset(std::move(values), std::move(names), std::move(truth));
}

inline Dataset load_csv(const std::string& path,
                        const std::optional<std::string>& label_column = std::nullopt,
                        const std::optional<LabelMap>& labels = std::nullopt)
{
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorKind::io, "cannot open '" + path + "'");
  return read_csv(in, path, label_column, labels);
}

//! Shortest round-trip decimal representation; truth, if present, becomes the
//! last column.
inline void write_csv(std::ostream& out,
                      const Dataset& data,
                      const std::string& label_column = "class",
                      const LabelMap& labels = { "0", "1" })
{
  const auto& names = data.columns();
  for (std::size_t j = 0; j < names.size(); ++j)
    out << (j ? "," : "") << names[j];
  if (data.has_truth())
    out << ',' << label_column;
  out << '\n';
  for (Index i = 0; i < data.rows(); ++i) {
    for (Index j = 0; j < data.cols(); ++j)
      out << (j ? "," : "") << detail::format_double(data.values()(i, j));
    if (data.has_truth())
      out << ',' << ((*data.truth())[static_cast<std::size_t>(i)] == Truth::signal ? labels.signal : labels.background);
    out << '\n';
  }
}

inline void write_csv(const std::string& path,
                      const Dataset& data,
                      const std::string& label_column = "class",
                      const LabelMap& labels = { "0", "1" })
{
  std::ofstream out(path);
  if (!out)
    throw Error(ErrorKind::io, "cannot write '" + path + "'");
  write_csv(out, data, label_column, labels);
  if (!out)
    throw Error(ErrorKind::io, "write failed for '" + path + "'");
}

//! Per-column location and spread. Sample standard deviation (n - 1).
struct Standardizer
{
  Vector center;
  Vector scale;

  Dataset apply(const Dataset& data) const
  {
    check(data);
    Matrix z = (data.values().rowwise() - center.transpose()).array().rowwise() / scale.transpose().array();
    return Dataset(std::move(z), data.columns(), data.truth());
  }

  Dataset invert(const Dataset& data) const
  {
    check(data);
    Matrix x = (data.values().array().rowwise() * scale.transpose().array()).matrix().rowwise() + center.transpose();
    return Dataset(std::move(x), data.columns(), data.truth());
  }

  Vector invert_point(const Vector& z) const { return (z.array() * scale.array()).matrix() + center; }

  //! Restricts to a subset of columns, matching `project`.
  Standardizer select(const std::vector<std::size_t>& columns) const
  {
    Standardizer s{ Vector(static_cast<Index>(columns.size())), Vector(static_cast<Index>(columns.size())) };
    for (std::size_t k = 0; k < columns.size(); ++k) {
      s.center(static_cast<Index>(k)) = center(static_cast<Index>(columns[k]));
      s.scale(static_cast<Index>(k)) = scale(static_cast<Index>(columns[k]));
    }
    return s;
  }

private:
  void check(const Dataset& data) const
  {
    if (data.cols() != center.size())
      throw invalid_argument("standardizer has dimension " + std::to_string(center.size()) + ", data has " +
                             std::to_string(data.cols()));
  }
};

inline Standardizer fit_standardizer(const Dataset& data)
{
  if (data.rows() < 2)
    throw invalid_argument("standardizer needs at least two rows");
  const auto& x = data.values();
  const double n = static_cast<double>(x.rows());
  Vector center = x.colwise().mean().transpose();
  Vector scale(x.cols());
  for (Index j = 0; j < x.cols(); ++j) {
    const double ss = (x.col(j).array() - center(j)).square().sum();
    scale(j) = std::sqrt(ss / (n - 1.0));
    if (!(scale(j) > 0.0))
      throw invalid_argument("column '" + data.columns()[static_cast<std::size_t>(j)] + "' is constant");
  }
  return { std::move(center), std::move(scale) };
}

//! Restricts to the given columns, in the given order.
inline Dataset project(const Dataset& data, const std::vector<std::size_t>& columns)
{
  if (columns.empty())
    throw invalid_argument("projection needs at least one column");
  std::set<std::size_t> seen;
  for (auto c : columns) {
    if (c >= static_cast<std::size_t>(data.cols()))
      throw invalid_argument("column index " + std::to_string(c) + " out of range (d = " +
                             std::to_string(data.cols()) + ")");
    if (!seen.insert(c).second)
      throw invalid_argument("duplicate column index " + std::to_string(c));
  }
  Matrix out(data.rows(), static_cast<Index>(columns.size()));
  std::vector<std::string> names;
  for (std::size_t k = 0; k < columns.size(); ++k) {
    out.col(static_cast<Index>(k)) = data.values().col(static_cast<Index>(columns[k]));
    names.push_back(data.columns()[columns[k]]);
  }
  return Dataset(std::move(out), std::move(names), data.truth());
}

inline std::vector<std::size_t> column_indices(const Dataset& data, const std::vector<std::string>& names)
{
  std::vector<std::size_t> idx;
  for (const auto& name : names) {
    auto it = std::find(data.columns().begin(), data.columns().end(), name);
    if (it == data.columns().end())
      throw invalid_argument("unknown column '" + name + "'");
    idx.push_back(static_cast<std::size_t>(it - data.columns().begin()));
  }
  return idx;
}

inline Dataset take_rows(const Dataset& data, const std::vector<std::size_t>& rows)
{
  Matrix out(static_cast<Index>(rows.size()), data.cols());
  std::optional<std::vector<Truth>> truth;
  if (data.has_truth())
    truth.emplace();
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.row(static_cast<Index>(k)) = data.values().row(static_cast<Index>(rows[k]));
    if (truth)
      truth->push_back((*data.truth())[rows[k]]);
  }
  return Dataset(std::move(out), data.columns(), std::move(truth));
}

//! Row indices of a random disjoint split of n rows; the first part has
//! round(fraction * n) rows. Both parts are sorted ascending.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n,
                                                                                    double fraction,
                                                                                    std::uint64_t seed)
{
  if (n < 2)
    throw invalid_argument("split needs at least two rows");
  if (!(fraction > 0.0 && fraction < 1.0))
    throw invalid_argument("split fraction must lie in (0, 1)");
  const auto first = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (first == 0 || first == n)
    throw invalid_argument("split fraction " + detail::format_double(fraction) + " leaves an empty part for n = " +
                           std::to_string(n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{ 0 });
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> a(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(first));
  std::vector<std::size_t> b(order.begin() + static_cast<std::ptrdiff_t>(first), order.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return { std::move(a), std::move(b) };
}

//! Random disjoint row split; rows keep their relative order in each part.
inline std::pair<Dataset, Dataset> split(const Dataset& data, double fraction, std::uint64_t seed)
{
  auto [a, b] = split_indices(static_cast<std::size_t>(data.rows()), fraction, seed);
  return { take_rows(data, a), take_rows(data, b) };
}

struct MixtureComponent
{
  double weight = 1.0;
  Vector mean;
  Matrix covariance;
};

//! Synthetic background/signal mixture. Component weights sum to one; each
//! class draws among its own components with renormalized weights, and a row
//! is signal with probability `signal_fraction`.
struct MixtureSpec
{
  std::vector<MixtureComponent> components;
  double signal_fraction = 0.0;
  std::vector<std::size_t> signal_components;

  Index dimension() const { return components.empty() ? 0 : components.front().mean.size(); }

  bool is_signal(std::size_t c) const
  {
    return std::find(signal_components.begin(), signal_components.end(), c) != signal_components.end();
  }

  void validate() const
  {
    if (components.empty())
      throw invalid_argument("mixture has no components");
    const Index d = dimension();
    double total = 0.0;
    for (std::size_t c = 0; c < components.size(); ++c) {
      const auto& comp = components[c];
      const std::string tag = "mixture component " + std::to_string(c + 1);
      if (!(comp.weight > 0.0))
        throw invalid_argument(tag + ": weight must be positive");
      if (comp.mean.size() != d || comp.covariance.rows() != d || comp.covariance.cols() != d)
        throw invalid_argument(tag + ": dimension mismatch");
      if (!comp.covariance.isApprox(comp.covariance.transpose(), 1e-12))
        throw invalid_argument(tag + ": covariance is not symmetric");
      Eigen::LLT<Matrix> llt(comp.covariance);
      if (llt.info() != Eigen::Success)
        throw invalid_argument(tag + ": covariance is not positive definite");
      total += comp.weight;
    }
    if (std::abs(total - 1.0) > 1e-9)
      throw invalid_argument("mixture weights sum to " + detail::format_double(total) + ", expected 1");
    if (!(signal_fraction >= 0.0 && signal_fraction < 1.0))
      throw invalid_argument("signal fraction must lie in [0, 1)");
    for (auto s : signal_components)
      if (s >= components.size())
        throw invalid_argument("signal component index out of range");
    const auto n_signal = signal_components.size();
    if (signal_fraction > 0.0 && n_signal == 0)
      throw invalid_argument("positive signal fraction but no signal components");
    if (n_signal == components.size())
      throw invalid_argument("mixture has no background components");
  }
};

//! n i.i.d. draws; truth marks rows drawn from signal components.
inline Dataset sample_mixture(const MixtureSpec& spec, std::size_t n, std::uint64_t seed)
{
  spec.validate();
  if (n == 0)
    throw invalid_argument("sample size must be positive");
  const Index d = spec.dimension();
  std::vector<Matrix> factors;
  for (const auto& c : spec.components)
    factors.push_back(Eigen::LLT<Matrix>(c.covariance).matrixL());

  std::vector<std::size_t> bg_idx, sig_idx;
  std::vector<double> bg_w, sig_w;
  for (std::size_t c = 0; c < spec.components.size(); ++c) {
    if (spec.is_signal(c)) {
      sig_idx.push_back(c);
      sig_w.push_back(spec.components[c].weight);
    } else {
      bg_idx.push_back(c);
      bg_w.push_back(spec.components[c].weight);
    }
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::discrete_distribution<std::size_t> pick_bg(bg_w.begin(), bg_w.end());
  std::discrete_distribution<std::size_t> pick_sig(sig_w.begin(), sig_w.end());

  Matrix x(static_cast<Index>(n), d);
  std::vector<Truth> truth(n, Truth::background);
  Vector z(d);
  for (std::size_t i = 0; i < n; ++i) {
    const bool signal = spec.signal_fraction > 0.0 && unif(rng) < spec.signal_fraction;
    const std::size_t c = signal ? sig_idx[pick_sig(rng)] : bg_idx[pick_bg(rng)];
    for (Index j = 0; j < d; ++j)
      z(j) = normal(rng);
    x.row(static_cast<Index>(i)) = (spec.components[c].mean + factors[c] * z).transpose();
    if (signal)
      truth[i] = Truth::signal;
  }
  return Dataset(std::move(x), Dataset::default_names(d), std::move(truth));
}

} // namespace semimodal
