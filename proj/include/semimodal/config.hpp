#pragma once

#include "agreement.hpp"
#include "core.hpp"
#include "dataset.hpp"
#include "modal.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace semimodal {

struct DataConfig
{
  std::string background;
  std::string experimental;
  std::string test;  //!< empty: split the experimental file
  std::string label_column = "class";
  std::string label_background = "0";
  std::string label_signal = "1";
  std::vector<std::string> variables;  //!< fixed list; skips variable selection
  double test_fraction = 0.5;
};

struct VarselectConfig
{
  bool enabled = true;
  std::size_t iterations = 1000;
  std::size_t subset_size = 3;
  double threshold = 0.01;
  std::size_t permutations = 199;
};

struct BandwidthConfig
{
  //! plugin_gradient, plugin, normal_scale, normal_scale_gradient or a positive number
  std::string background = "plugin_gradient";
  std::vector<double> grid;            //!< explicit grid; empty: around the normal scale
  double grid_lo_factor = 0.2;
  double grid_hi_factor = 3.0;
  std::size_t grid_points = 30;
  AgreementIndex index = AgreementIndex::fowlkes_mallows;
  double plateau_tolerance = 0.02;
};

struct ModetestConfig
{
  double alpha = 0.001;
  std::size_t replicates = 1000;
  std::optional<double> bandwidth;  //!< default: the selected bandwidth
};

struct RunConfig
{
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string output_dir = ".";
  bool canonical_output = false;
};

struct SynthComponent
{
  std::string name;
  MixtureComponent component;
  bool signal = false;
};

struct SynthConfig
{
  std::size_t background_rows = 2000;
  std::size_t experimental_rows = 2000;
  std::size_t test_rows = 0;
  double signal_fraction = 0.0;
  std::string background_file = "background.csv";
  std::string experimental_file = "experimental.csv";
  std::string test_file = "test.csv";
  std::vector<std::string> columns;  //!< default x1..xd
  std::vector<SynthComponent> components;

  bool present() const { return !components.empty(); }

  MixtureSpec mixture(double fraction) const
  {
    if (components.empty())
      throw Error(ErrorKind::config, "no [component NAME] sections: mixture spec missing");
    MixtureSpec spec;
    double total = 0.0;
    for (const auto& c : components)
      total += c.component.weight;
    for (std::size_t i = 0; i < components.size(); ++i) {
      auto comp = components[i].component;
      comp.weight /= total;
      spec.components.push_back(comp);
      if (components[i].signal)
        spec.signal_components.push_back(i);
    }
    spec.signal_fraction = fraction;
    spec.validate();
    return spec;
  }
};

struct PipelineConfig
{
  DataConfig data;
  VarselectConfig varselect;
  BandwidthConfig bandwidth;
  MeanShiftOptions meanshift{ 1e-6, 10000, 0.1, 0.01, 1 };
  ModetestConfig modetest;
  RunConfig run;
  SynthConfig synth;
};

namespace detail {

inline Error config_error(const std::string& where, const std::string& what)
{
  return Error(ErrorKind::config, where + ": " + what);
}

inline std::vector<std::string> split_list(const std::string& s, char sep = ',')
{
  std::vector<std::string> out;
  for (auto f : split_fields(s, sep))
    if (!f.empty())
      out.emplace_back(f);
  return out;
}

class SectionReader
{
public:
  SectionReader(std::string name, const boost::property_tree::ptree& tree, std::set<std::string> allowed)
    : name_(std::move(name))
    , tree_(tree)
  {
    for (const auto& [key, node] : tree_) {
      if (!node.empty())
        throw config_error("[" + name_ + "]", "nested keys are not supported ('" + key + "')");
      if (!allowed.count(key))
        throw config_error("[" + name_ + "]", "unknown key '" + key + "'");
    }
  }

  std::optional<std::string> raw(const std::string& key) const
  {
    auto v = tree_.get_optional<std::string>(key);
    if (!v)
      return std::nullopt;
    return std::string(trim(*v));
  }

  void text(const std::string& key, std::string& out) const
  {
    if (auto v = raw(key))
      out = *v;
  }

  void real(const std::string& key, double& out, double lo, double hi, bool lo_open = false, bool hi_open = false) const
  {
    auto v = raw(key);
    if (!v)
      return;
    auto x = parse_double(*v);
    if (!x || !std::isfinite(*x))
      throw error(key, "expected a number, got '" + *v + "'");
    const bool ok = (lo_open ? *x > lo : *x >= lo) && (hi_open ? *x < hi : *x <= hi);
    if (!ok)
      throw error(key, "value " + *v + " outside " + std::string(lo_open ? "(" : "[") + format_double(lo) + ", " +
                         format_double(hi) + (hi_open ? ")" : "]"));
    out = *x;
  }

  template <class Int>
  void integer(const std::string& key, Int& out, Int lo, Int hi) const
  {
    auto v = raw(key);
    if (!v)
      return;
    Int x{};
    auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), x);
    if (ec != std::errc() || p != v->data() + v->size())
      throw error(key, "expected an integer, got '" + *v + "'");
    if (x < lo || x > hi)
      throw error(key, "value " + *v + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    out = x;
  }

  void boolean(const std::string& key, bool& out) const
  {
    auto v = raw(key);
    if (!v)
      return;
    if (*v == "true" || *v == "yes" || *v == "1")
      out = true;
    else if (*v == "false" || *v == "no" || *v == "0")
      out = false;
    else
      throw error(key, "expected true or false, got '" + *v + "'");
  }

  std::vector<double> reals(const std::string& key) const
  {
    std::vector<double> out;
    auto v = raw(key);
    if (!v)
      return out;
    for (const auto& f : split_list(*v)) {
      auto x = parse_double(f);
      if (!x || !std::isfinite(*x))
        throw error(key, "invalid number '" + f + "'");
      out.push_back(*x);
    }
    return out;
  }

  Error error(const std::string& key, const std::string& what) const
  {
    return config_error("[" + name_ + "] " + key, what);
  }

private:
  std::string name_;
  const boost::property_tree::ptree& tree_;
};

inline SynthComponent read_component(const std::string& name, const boost::property_tree::ptree& tree)
{
  SectionReader r("component " + name, tree, { "weight", "mean", "sd", "covariance", "signal" });
  SynthComponent c;
  c.name = name;
  r.real("weight", c.component.weight, 0.0, 1e300, true);
  r.boolean("signal", c.signal);
  auto mean = r.reals("mean");
  if (mean.empty())
    throw r.error("mean", "required");
  const auto d = static_cast<Index>(mean.size());
  c.component.mean = Eigen::Map<const Vector>(mean.data(), d);
  const bool has_sd = r.raw("sd").has_value();
  const bool has_cov = r.raw("covariance").has_value();
  if (has_sd && has_cov)
    throw r.error("sd", "give either sd or covariance, not both");
  if (has_cov) {
    auto cov = r.reals("covariance");
    if (static_cast<Index>(cov.size()) != d * d)
      throw r.error("covariance", "expected " + std::to_string(d * d) + " row-major entries");
    c.component.covariance = Eigen::Map<const Eigen::Matrix<double, -1, -1, Eigen::RowMajor>>(cov.data(), d, d);
  } else {
    auto sd = r.reals("sd");
    if (sd.empty())
      sd.assign(static_cast<std::size_t>(d), 1.0);
    if (sd.size() == 1)
      sd.assign(static_cast<std::size_t>(d), sd.front());
    if (static_cast<Index>(sd.size()) != d)
      throw r.error("sd", "expected 1 or " + std::to_string(d) + " values");
    Vector var(d);
    for (Index j = 0; j < d; ++j) {
      if (!(sd[static_cast<std::size_t>(j)] > 0.0))
        throw r.error("sd", "standard deviations must be positive");
      var(j) = sd[static_cast<std::size_t>(j)] * sd[static_cast<std::size_t>(j)];
    }
    c.component.covariance = var.asDiagonal();
  }
  return c;
}

} // namespace detail

//! Parses the key-value config. Sections: [run], [data], [varselect],
//! [bandwidth], [meanshift], [modetest], [synth], [component NAME].
inline PipelineConfig parse_config(std::istream& in, const std::string& source = "config")
{
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorKind::config, source + ":" + std::to_string(e.line()) + ": " + e.message());
  }

  PipelineConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw detail::config_error(source, "key '" + section + "' outside any section");
    if (section.rfind("component", 0) == 0) {
      const std::string name(detail::trim(std::string_view(section).substr(9)));
      if (name.empty())
        throw detail::config_error(source, "[component] sections need a name, e.g. [component signal]");
      cfg.synth.components.push_back(detail::read_component(name, body));
      continue;
    }
    using R = detail::SectionReader;
    if (section == "run") {
      R r(section, body, { "seed", "threads", "output_dir", "canonical_output" });
      r.integer<std::uint64_t>("seed", cfg.run.seed, 0, std::numeric_limits<std::uint64_t>::max());
      r.integer<unsigned>("threads", cfg.run.threads, 1, 1024);
      r.text("output_dir", cfg.run.output_dir);
      r.boolean("canonical_output", cfg.run.canonical_output);
    } else if (section == "data") {
      R r(section, body,
          { "background", "experimental", "test", "label_column", "label_background", "label_signal", "variables",
            "test_fraction" });
      r.text("background", cfg.data.background);
      r.text("experimental", cfg.data.experimental);
      r.text("test", cfg.data.test);
      r.text("label_column", cfg.data.label_column);
      r.text("label_background", cfg.data.label_background);
      r.text("label_signal", cfg.data.label_signal);
      if (auto v = r.raw("variables"))
        cfg.data.variables = detail::split_list(*v);
      r.real("test_fraction", cfg.data.test_fraction, 0.0, 1.0, true, true);
      if (cfg.data.label_background == cfg.data.label_signal)
        throw r.error("label_signal", "must differ from label_background");
    } else if (section == "varselect") {
      R r(section, body, { "enabled", "iterations", "subset_size", "threshold", "permutations" });
      r.boolean("enabled", cfg.varselect.enabled);
      r.integer<std::size_t>("iterations", cfg.varselect.iterations, 1, 1000000);
      r.integer<std::size_t>("subset_size", cfg.varselect.subset_size, 1, 1000);
      r.real("threshold", cfg.varselect.threshold, 0.0, 1.0, true, true);
      r.integer<std::size_t>("permutations", cfg.varselect.permutations, 99, 1000000);
    } else if (section == "bandwidth") {
      R r(section, body,
          { "background", "grid", "grid_lo_factor", "grid_hi_factor", "grid_points", "index", "plateau_tolerance" });
      r.text("background", cfg.bandwidth.background);
      static const std::set<std::string> selectors{ "plugin_gradient", "plugin", "normal_scale",
                                                    "normal_scale_gradient" };
      if (!selectors.count(cfg.bandwidth.background)) {
        auto h = detail::parse_double(cfg.bandwidth.background);
        if (!h || !(*h > 0.0) || !std::isfinite(*h))
          throw r.error("background",
                        "expected plugin_gradient, plugin, normal_scale, normal_scale_gradient or a positive number");
      }
      cfg.bandwidth.grid = r.reals("grid");
      r.real("grid_lo_factor", cfg.bandwidth.grid_lo_factor, 0.0, 1e6, true);
      r.real("grid_hi_factor", cfg.bandwidth.grid_hi_factor, 0.0, 1e6, true);
      r.integer<std::size_t>("grid_points", cfg.bandwidth.grid_points, 2, 100000);
      if (auto v = r.raw("index"))
        cfg.bandwidth.index = parse_agreement_index(*v);
      r.real("plateau_tolerance", cfg.bandwidth.plateau_tolerance, 0.0, 1.0);
      if (!(cfg.bandwidth.grid_hi_factor > cfg.bandwidth.grid_lo_factor))
        throw r.error("grid_hi_factor", "must exceed grid_lo_factor");
    } else if (section == "meanshift") {
      R r(section, body, { "tol_step", "max_iter", "tol_merge", "min_cluster_fraction" });
      r.real("tol_step", cfg.meanshift.tol_step, 0.0, 1.0, true);
      r.integer<int>("max_iter", cfg.meanshift.max_iter, 1, 100000000);
      r.real("tol_merge", cfg.meanshift.tol_merge, 0.0, 10.0, true);
      r.real("min_cluster_fraction", cfg.meanshift.min_cluster_fraction, 0.0, 0.5);
    } else if (section == "modetest") {
      R r(section, body, { "alpha", "replicates", "bandwidth" });
      r.real("alpha", cfg.modetest.alpha, 0.0, 1.0, true, true);
      r.integer<std::size_t>("replicates", cfg.modetest.replicates, 1, 10000000);
      if (cfg.modetest.replicates < 200)
        throw r.error("replicates", "at least 200 bootstrap replicates are required");
      if (auto v = r.raw("bandwidth"); v && *v != "selected") {
        double h = 0.0;
        r.real("bandwidth", h, 0.0, 1e6, true);
        cfg.modetest.bandwidth = h;
      }
    } else if (section == "synth") {
      R r(section, body,
          { "background_rows", "experimental_rows", "test_rows", "signal_fraction", "background_file",
            "experimental_file", "test_file", "columns" });
      r.integer<std::size_t>("background_rows", cfg.synth.background_rows, 1, 100000000);
      r.integer<std::size_t>("experimental_rows", cfg.synth.experimental_rows, 1, 100000000);
      r.integer<std::size_t>("test_rows", cfg.synth.test_rows, 0, 100000000);
      r.real("signal_fraction", cfg.synth.signal_fraction, 0.0, 1.0, false, true);
      r.text("background_file", cfg.synth.background_file);
      r.text("experimental_file", cfg.synth.experimental_file);
      r.text("test_file", cfg.synth.test_file);
      if (auto v = r.raw("columns"))
        cfg.synth.columns = detail::split_list(*v);
    } else {
      throw detail::config_error(source, "unknown section [" + section + "]");
    }
  }
  return cfg;
}

inline PipelineConfig load_config(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorKind::io, "cannot open config '" + path + "'");
  return parse_config(in, path);
}

inline PipelineConfig parse_config_string(const std::string& text)
{
  std::istringstream in(text);
  return parse_config(in);
}

} // namespace semimodal
