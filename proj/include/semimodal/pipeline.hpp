#pragma once

#include "agreement.hpp"
#include "bwselect.hpp"
#include "config.hpp"
#include "core.hpp"
#include "dataset.hpp"
#include "kde.hpp"
#include "modal.hpp"
#include "modetest.hpp"
#include "varselect.hpp"

#include <json.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace semimodal {

inline constexpr const char* kVersion = "0.1.0";

namespace exit_status {
inline constexpr int success = 0;
inline constexpr int failure = 1;
inline constexpr int config_error = 2;
inline constexpr int io_error = 3;
inline constexpr int no_relevance_signal = 10;
inline constexpr int no_candidate_bandwidth = 11;
inline constexpr int no_signal_evidence = 12;
} // namespace exit_status

inline int exit_code(ErrorKind kind)
{
  switch (kind) {
    case ErrorKind::config:
    case ErrorKind::invalid_argument:
      return exit_status::config_error;
    case ErrorKind::io:
    case ErrorKind::parse:
      return exit_status::io_error;
    default:
      return exit_status::failure;
  }
}

enum class RunStatus
{
  signal_claim,
  selection_found,
  no_relevance_signal,
  no_candidate_bandwidth,
  no_signal_evidence,
  written
};

inline std::string to_string(RunStatus s)
{
  switch (s) {
    case RunStatus::signal_claim:
      return "signal claim";
    case RunStatus::selection_found:
      return "selection found";
    case RunStatus::no_relevance_signal:
      return "no relevance signal";
    case RunStatus::no_candidate_bandwidth:
      return "no candidate signal bandwidth";
    case RunStatus::no_signal_evidence:
      return "no signal evidence";
    case RunStatus::written:
    default:
      return "written";
  }
}

inline int exit_code(RunStatus s)
{
  switch (s) {
    case RunStatus::no_relevance_signal:
      return exit_status::no_relevance_signal;
    case RunStatus::no_candidate_bandwidth:
      return exit_status::no_candidate_bandwidth;
    case RunStatus::no_signal_evidence:
      return exit_status::no_signal_evidence;
    default:
      return exit_status::success;
  }
}

struct RunReport
{
  RunStatus status = RunStatus::written;
  nlohmann::ordered_json json;
  std::vector<std::string> outputs;  //!< paths written, in order
  std::vector<std::string> warnings;

  int exit_code() const { return semimodal::exit_code(status); }
};

//! Receives warnings as they are raised; defaults to silence.
using WarningSink = std::function<void(const std::string&)>;

namespace detail {

using ojson = nlohmann::ordered_json;

inline std::vector<std::string> csv_header(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorKind::io, "cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw Error(ErrorKind::parse, path + ": empty file, header row expected");
  std::vector<std::string> out;
  for (auto f : split_fields(line))
    out.emplace_back(f);
  return out;
}

class RunContext
{
public:
  RunContext(const PipelineConfig& cfg, WarningSink sink)
    : cfg_(cfg)
    , sink_(std::move(sink))
    , out_dir_(cfg.run.output_dir)
  {
    std::error_code ec;
    std::filesystem::create_directories(out_dir_, ec);
    if (ec)
      throw Error(ErrorKind::io, "cannot create output directory '" + out_dir_.string() + "': " + ec.message());
  }

  void warn(const std::string& msg)
  {
    report.warnings.push_back(msg);
    if (sink_)
      sink_(msg);
  }

  std::string path(const std::string& name) const { return (out_dir_ / name).string(); }

  std::ofstream open(const std::string& name)
  {
    const auto p = path(name);
    std::ofstream out(p);
    if (!out)
      throw Error(ErrorKind::io, "cannot write '" + p + "'");
    report.outputs.push_back(name);
    return out;
  }

  void close(std::ofstream& out, const std::string& name)
  {
    out.close();
    if (!out)
      throw Error(ErrorKind::io, "write failed for '" + path(name) + "'");
  }

  //! Loads a sample, keeping the label column as truth when it is present.
  Dataset load(const std::string& file, const std::string& role, bool want_truth)
  {
    if (file.empty())
      throw Error(ErrorKind::config, "[data] " + role + ": path required");
    const auto header = csv_header(file);
    const auto& col = cfg_.data.label_column;
    const bool has_label = !col.empty() && std::find(header.begin(), header.end(), col) != header.end();
    if (want_truth && !has_label && !col.empty())
      warn(role + " file '" + file + "' has no '" + col + "' column; evaluation against truth omitted");
    if (!has_label)
      return load_csv(file);
    auto data = load_csv(file, col, LabelMap{ cfg_.data.label_background, cfg_.data.label_signal });
    return want_truth ? data : data.without_truth();
  }

  RunReport report;

private:
  const PipelineConfig& cfg_;
  WarningSink sink_;
  std::filesystem::path out_dir_;
};

inline ojson vector_json(const Vector& v)
{
  ojson a = ojson::array();
  for (Index i = 0; i < v.size(); ++i)
    a.push_back(v(i));
  return a;
}

inline ojson config_json(const PipelineConfig& c)
{
  ojson j;
  j["run"] = { { "seed", c.run.seed }, { "threads", c.run.threads } };
  if (!c.run.canonical_output)
    j["run"]["output_dir"] = c.run.output_dir;
  j["data"] = { { "background", c.data.background },
                { "experimental", c.data.experimental },
                { "test", c.data.test },
                { "label_column", c.data.label_column },
                { "label_background", c.data.label_background },
                { "label_signal", c.data.label_signal },
                { "variables", c.data.variables },
                { "test_fraction", c.data.test_fraction } };
  j["varselect"] = { { "enabled", c.varselect.enabled },
                     { "iterations", c.varselect.iterations },
                     { "subset_size", c.varselect.subset_size },
                     { "threshold", c.varselect.threshold },
                     { "permutations", c.varselect.permutations } };
  j["bandwidth"] = { { "background", c.bandwidth.background },
                     { "grid", c.bandwidth.grid },
                     { "grid_lo_factor", c.bandwidth.grid_lo_factor },
                     { "grid_hi_factor", c.bandwidth.grid_hi_factor },
                     { "grid_points", c.bandwidth.grid_points },
                     { "index", to_string(c.bandwidth.index) },
                     { "plateau_tolerance", c.bandwidth.plateau_tolerance } };
  j["meanshift"] = { { "tol_step", c.meanshift.tol_step },
                     { "max_iter", c.meanshift.max_iter },
                     { "tol_merge", c.meanshift.tol_merge },
                     { "min_cluster_fraction", c.meanshift.min_cluster_fraction } };
  j["modetest"] = { { "alpha", c.modetest.alpha },
                    { "replicates", c.modetest.replicates },
                    { "bandwidth", c.modetest.bandwidth ? ojson(*c.modetest.bandwidth) : ojson("selected") } };
  return j;
}

inline void write_counter_csv(std::ostream& out,
                              const std::vector<std::string>& names,
                              const RelevanceCounter& counter,
                              const std::vector<std::size_t>& selected)
{
  out << "variable,count,selected\n";
  for (std::size_t j = 0; j < names.size(); ++j) {
    const bool sel = std::find(selected.begin(), selected.end(), j) != selected.end();
    out << names[j] << ',' << counter.count[j] << ',' << (sel ? 1 : 0) << '\n';
  }
}

inline ojson selection_json(const std::vector<std::string>& names, const VariableSelection& vs)
{
  ojson counts = ojson::object();
  for (std::size_t j = 0; j < names.size(); ++j)
    counts[names[j]] = vs.counter.count[j];
  ojson selected = ojson::array();
  for (auto j : vs.selected)
    selected.push_back(names[j]);
  return { { "selected", selected },
           { "status", vs.relevant() ? "selection found" : "no relevance signal" },
           { "iterations", vs.counter.iterations },
           { "subset_size", vs.counter.subset_size },
           { "threshold", vs.counter.threshold },
           { "significant_iterations", vs.counter.significant_iterations },
           { "bandwidth", vs.tests.empty() ? 0.0 : vs.tests.front().bandwidth },
           { "counts", counts } };
}

//! Experimental estimate on a regular grid (100 points in 1-d, 60 x 60 in
//! 2-d) spanning the sample plus three bandwidths, in original units.
inline void write_density_grid(RunContext& ctx,
                               const DensityModel& model,
                               const Standardizer& stdz,
                               const std::vector<std::string>& names)
{
  const auto& X = model.data().values();
  const Index d = X.cols();
  const Index per_axis = d == 1 ? 100 : 60;
  const Vector lo = X.colwise().minCoeff().transpose().array() - 3.0 * model.bandwidth();
  const Vector hi = X.colwise().maxCoeff().transpose().array() + 3.0 * model.bandwidth();
  const double jacobian = stdz.scale.prod();
  auto out = ctx.open("density.csv");
  for (const auto& n : names)
    out << n << ',';
  out << "density\n";
  Index total = 1;
  for (Index j = 0; j < d; ++j)
    total *= per_axis;
  Vector z(d);
  for (Index k = 0; k < total; ++k) {
    Index rest = k;
    for (Index j = d - 1; j >= 0; --j) {
      const Index step = rest % per_axis;
      rest /= per_axis;
      z(j) = lo(j) + (hi(j) - lo(j)) * static_cast<double>(step) / static_cast<double>(per_axis - 1);
    }
    const Vector x = stdz.invert_point(z);
    for (Index j = 0; j < d; ++j)
      out << format_double(x(j)) << ',';
    out << format_double(model.density(z) / jacobian) << '\n';
  }
  ctx.close(out, "density.csv");
}

inline std::string timestamp()
{
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

inline void finish_report(RunContext& ctx, const PipelineConfig& cfg)
{
  auto& j = ctx.report.json;
  j["status"] = to_string(ctx.report.status);
  j["exit_code"] = ctx.report.exit_code();
  j["warnings"] = ctx.report.warnings;
  ctx.report.outputs.push_back("report.json");
  j["outputs"] = ctx.report.outputs;
  if (!cfg.run.canonical_output)
    j["generated_at"] = timestamp();
  auto out = ctx.open("report.json");
  ctx.report.outputs.pop_back();
  out << j.dump(2) << '\n';
  ctx.close(out, "report.json");
}

inline ojson report_header(const PipelineConfig& cfg, const std::string& command)
{
  ojson j;
  j["tool"] = "semimodal";
  j["version"] = kVersion;
  j["command"] = command;
  j["seed"] = cfg.run.seed;
  j["seeds"] = { { "split", derive_seed(cfg.run.seed, Stage::split) },
                 { "variable_selection", derive_seed(cfg.run.seed, Stage::variable_selection) },
                 { "bootstrap", derive_seed(cfg.run.seed, Stage::bootstrap) } };
  j["config"] = config_json(cfg);
  return j;
}

} // namespace detail

//! Variable selection only: writes counter.csv, selected_variables.json and
//! report.json.
inline RunReport cmd_select_vars(const PipelineConfig& cfg, const WarningSink& sink = {})
{
  detail::RunContext ctx(cfg, sink);
  ctx.report.json = detail::report_header(cfg, "select-vars");
  const auto xb = ctx.load(cfg.data.background, "background", false);
  const auto xbs = ctx.load(cfg.data.experimental, "experimental", false);
  if (xb.columns() != xbs.columns())
    throw Error(ErrorKind::parse, "background and experimental files have different columns");
  const auto stdz = fit_standardizer(xb);
  VariableSelectionOptions opts{ cfg.varselect.iterations, cfg.varselect.subset_size, cfg.varselect.threshold,
                                 cfg.varselect.permutations, cfg.run.threads };
  if (opts.subset_size >= static_cast<std::size_t>(xb.cols()))
    throw Error(ErrorKind::config, "[varselect] subset_size " + std::to_string(opts.subset_size) +
                                     " must be below the number of variables (" + std::to_string(xb.cols()) + ")");
  const auto vs =
    select_variables(stdz.apply(xb), stdz.apply(xbs), opts, derive_seed(cfg.run.seed, Stage::variable_selection));

  auto out = ctx.open("counter.csv");
  detail::write_counter_csv(out, xb.columns(), vs.counter, vs.selected);
  ctx.close(out, "counter.csv");
  auto js = ctx.open("selected_variables.json");
  js << detail::selection_json(xb.columns(), vs).dump(2) << '\n';
  ctx.close(js, "selected_variables.json");

  ctx.report.status = vs.relevant() ? RunStatus::selection_found : RunStatus::no_relevance_signal;
  ctx.report.json["variable_selection"] = detail::selection_json(xb.columns(), vs);
  ctx.report.json["variable_selection"]["counter_file"] = "counter.csv";
  detail::finish_report(ctx, cfg);
  return std::move(ctx.report);
}

//! Full pipeline: variable selection, bandwidth sweep, mode test, gate and
//! final partition. Always writes report.json; sweep.csv once a sweep ran;
//! modes.json once a bandwidth is selected; labels.csv on a signal claim.
inline RunReport cmd_detect(const PipelineConfig& cfg, const WarningSink& sink = {})
{
  using detail::ojson;
  detail::RunContext ctx(cfg, sink);
  auto& J = ctx.report.json;
  J = detail::report_header(cfg, "detect");

  // Inputs. Truth is read only for the evaluation block.
  const auto xb_raw = ctx.load(cfg.data.background, "background", false);
  const auto xbs_all = ctx.load(cfg.data.experimental, "experimental", true);
  if (xb_raw.columns() != xbs_all.columns())
    throw Error(ErrorKind::parse, "background and experimental files have different columns");
  std::vector<std::size_t> est_rows(static_cast<std::size_t>(xbs_all.rows()));
  std::iota(est_rows.begin(), est_rows.end(), std::size_t{ 0 });
  std::optional<Dataset> test_raw;
  std::string test_source;
  if (!cfg.data.test.empty()) {
    test_raw = ctx.load(cfg.data.test, "test", false);
    if (test_raw->columns() != xb_raw.columns())
      throw Error(ErrorKind::parse, "test file columns differ from the background file");
    test_source = "file";
  } else {
    auto [test_idx, est_idx] =
      split_indices(est_rows.size(), cfg.data.test_fraction, derive_seed(cfg.run.seed, Stage::split));
    test_raw = take_rows(xbs_all, test_idx).without_truth();
    est_rows = std::move(est_idx);
    test_source = "split";
  }
  const auto xbs_raw = take_rows(xbs_all, est_rows);
  J["data"] = { { "background_rows", xb_raw.rows() },
                { "experimental_rows", xbs_raw.rows() },
                { "test_rows", test_raw->rows() },
                { "test_source", test_source },
                { "columns", xb_raw.columns() },
                { "truth_available", xbs_raw.has_truth() } };

  const auto stdz = fit_standardizer(xb_raw);
  const auto xb_std = stdz.apply(xb_raw);
  const auto xbs_std = stdz.apply(xbs_raw.without_truth());
  const auto test_std = stdz.apply(*test_raw);

  // Variables.
  const auto d = static_cast<std::size_t>(xb_raw.cols());
  std::vector<std::size_t> vars;
  ojson vsj;
  if (!cfg.data.variables.empty()) {
    try {
      vars = column_indices(xb_raw, cfg.data.variables);
    } catch (const Error& e) {
      throw Error(ErrorKind::config, std::string("[data] variables: ") + e.what());
    }
    vsj["mode"] = "fixed";
  } else if (!cfg.varselect.enabled || d <= cfg.varselect.subset_size) {
    vars.resize(d);
    std::iota(vars.begin(), vars.end(), std::size_t{ 0 });
    vsj["mode"] = "all";
    if (cfg.varselect.enabled)
      ctx.warn("variable selection skipped: " + std::to_string(d) + " variables, subset size " +
               std::to_string(cfg.varselect.subset_size));
  } else {
    VariableSelectionOptions opts{ cfg.varselect.iterations, cfg.varselect.subset_size, cfg.varselect.threshold,
                                   cfg.varselect.permutations, cfg.run.threads };
    const auto vs = select_variables(xb_std, xbs_std, opts, derive_seed(cfg.run.seed, Stage::variable_selection));
    auto out = ctx.open("counter.csv");
    detail::write_counter_csv(out, xb_raw.columns(), vs.counter, vs.selected);
    ctx.close(out, "counter.csv");
    vsj = detail::selection_json(xb_raw.columns(), vs);
    vsj["mode"] = "selected";
    vsj["counter_file"] = "counter.csv";
    vars = vs.selected;
    if (!vs.relevant()) {
      J["variable_selection"] = vsj;
      ctx.report.status = RunStatus::no_relevance_signal;
      J["message"] = "no variable shows a relevance signal; nothing to detect";
      detail::finish_report(ctx, cfg);
      return std::move(ctx.report);
    }
  }
  std::vector<std::string> var_names;
  for (auto v : vars)
    var_names.push_back(xb_raw.columns()[v]);
  vsj["variables"] = var_names;
  J["variable_selection"] = vsj;

  const auto sb = project(xb_std, vars);
  const auto sbs = project(xbs_std, vars);
  const auto stest = project(test_std, vars);
  const auto stdz_sel = stdz.select(vars);

  // Bandwidth sweep.
  double hb = 0.0;
  if (cfg.bandwidth.background == "plugin_gradient")
    hb = plugin_gradient_bandwidth(sb);
  else if (cfg.bandwidth.background == "plugin")
    hb = plugin_bandwidth(sb);
  else if (cfg.bandwidth.background == "normal_scale")
    hb = normal_scale_bandwidth(sb);
  else if (cfg.bandwidth.background == "normal_scale_gradient")
    hb = normal_scale_gradient_bandwidth(sb.rows(), sb.cols());
  else
    hb = *detail::parse_double(cfg.bandwidth.background);
  const auto grid = cfg.bandwidth.grid.empty()
                      ? BandwidthGrid::around_normal_scale(sbs, cfg.bandwidth.grid_lo_factor,
                                                           cfg.bandwidth.grid_hi_factor, cfg.bandwidth.grid_points)
                      : BandwidthGrid(cfg.bandwidth.grid);
  MeanShiftOptions ms = cfg.meanshift;
  ms.threads = cfg.run.threads;
  const auto ref = background_reference(sb, hb, ms);
  SweepOptions so{ cfg.meanshift, cfg.bandwidth.index, cfg.run.threads };
  so.mean_shift.threads = 1;
  auto previous_sink = agreement_warning_sink();
  agreement_warning_sink() = [&ctx](const std::string& m) { ctx.warn(m); };
  auto result = sweep(ref, sbs, grid, so);
  agreement_warning_sink() = previous_sink;

  {
    auto out = ctx.open("sweep.csv");
    out << "bandwidth,modes,index,in_constraint_set,background_unassigned\n";
    for (const auto& r : result.records)
      out << detail::format_double(r.bandwidth) << ',' << r.modes << ',' << detail::format_double(r.index) << ','
          << (r.in_constraint_set ? 1 : 0) << ',' << r.background_unassigned << '\n';
    ctx.close(out, "sweep.csv");
  }
  ojson bw;
  bw["background_bandwidth"] = hb;
  bw["background_selector"] = cfg.bandwidth.background;
  bw["background_modes"] = result.background_modes;
  bw["index"] = to_string(cfg.bandwidth.index);
  bw["grid"] = grid.values;
  bw["sweep_file"] = "sweep.csv";
  std::size_t constraint_points = 0;
  for (const auto& r : result.records)
    constraint_points += r.in_constraint_set ? 1 : 0;
  bw["constraint_set_size"] = constraint_points;

  if (!result.selected) {
    bw["selected"] = nullptr;
    bw["absence_reason"] = "no grid bandwidth gives more modes than the background estimate";
    J["bandwidth"] = bw;
    ctx.report.status = RunStatus::no_candidate_bandwidth;
    J["message"] = "no candidate signal bandwidth";
    detail::finish_report(ctx, cfg);
    return std::move(ctx.report);
  }
  const auto& rec = result.selected_record();
  bw["selected"] = rec.bandwidth;
  bw["selected_modes"] = rec.modes;
  bw["selected_index"] = rec.index;
  const auto plateau = longest_plateau(result, rec.modes, cfg.bandwidth.plateau_tolerance);
  bw["plateau"] = { { "modes", rec.modes },
                    { "length", plateau.length },
                    { "first_bandwidth", plateau.length ? ojson(result.records[plateau.first].bandwidth) : ojson(nullptr) },
                    { "last_bandwidth",
                      plateau.length ? ojson(result.records[plateau.first + plateau.length - 1].bandwidth)
                                     : ojson(nullptr) },
                    { "max_index", plateau.max_index },
                    { "tolerance", cfg.bandwidth.plateau_tolerance } };
  J["bandwidth"] = bw;

  // Mode test on held-out data.
  const double h_test = cfg.modetest.bandwidth.value_or(rec.bandwidth);
  ModeTestOptions mto{ cfg.modetest.alpha, cfg.modetest.replicates, cfg.run.threads };
  const auto& modes = rec.experimental.modes;
  const auto mt = test_modes(modes, stest, h_test, mto, derive_seed(cfg.run.seed, Stage::bootstrap));
  const auto g = gate(mt, result.background_partition.modes);
  std::vector<bool> is_candidate(modes.size(), false);
  for (auto k : g.candidates)
    is_candidate[k] = true;

  ojson mj = ojson::array();
  for (std::size_t k = 0; k < mt.modes.size(); ++k) {
    const auto& v = mt.modes[k];
    mj.push_back({ { "mode", k },
                   { "label", k + 1 },
                   { "role", is_candidate[k] ? "candidate" : "background" },
                   { "location", detail::vector_json(v.location) },
                   { "location_original", detail::vector_json(stdz_sel.invert_point(v.location)) },
                   { "density", modes.densities(static_cast<Index>(k)) },
                   { "eigenvalues", detail::vector_json(v.eigenvalues) },
                   { "ci_lower", detail::vector_json(v.lower) },
                   { "ci_upper", detail::vector_json(v.upper) },
                   { "p", v.p },
                   { "significant", v.significant } });
  }
  {
    ojson modes_file = { { "variables", var_names },
                         { "bandwidth", rec.bandwidth },
                         { "test_bandwidth", h_test },
                         { "alpha", cfg.modetest.alpha },
                         { "replicates", cfg.modetest.replicates },
                         { "modes", mj } };
    auto out = ctx.open("modes.json");
    out << modes_file.dump(2) << '\n';
    ctx.close(out, "modes.json");
  }
  if (sbs.cols() <= 2) {
    detail::write_density_grid(ctx, DensityModel(sbs, rec.bandwidth), stdz_sel, var_names);
    J["bandwidth"]["density_file"] = "density.csv";
  }
  J["mode_test"] = { { "alpha", cfg.modetest.alpha },
                     { "replicates", cfg.modetest.replicates },
                     { "bandwidth", h_test },
                     { "modes_file", "modes.json" },
                     { "background_matched", g.background_matched },
                     { "candidates", g.candidates },
                     { "significant_candidates", g.significant_candidates },
                     { "signal_claim", g.signal_claim },
                     { "modes", mj } };

  if (!g.signal_claim) {
    ctx.report.status = RunStatus::no_signal_evidence;
    J["message"] = "no signal evidence: not every candidate mode is significant";
    detail::finish_report(ctx, cfg);
    return std::move(ctx.report);
  }

  // Final partition of the experimental sample.
  const auto part = final_partition(result, sbs, so.mean_shift);
  {
    auto out = ctx.open("labels.csv");
    out << "row,label,mode,candidate\n";
    for (std::size_t i = 0; i < part.labels.size(); ++i) {
      const int l = part.labels[i];
      const bool cand = l != kUnassigned && is_candidate[static_cast<std::size_t>(l - 1)];
      out << est_rows[i] << ',' << l << ',' << (l == kUnassigned ? -1 : l - 1) << ',' << (cand ? 1 : 0) << '\n';
    }
    ctx.close(out, "labels.csv");
  }
  J["partition"] = { { "labels_file", "labels.csv" },
                     { "cluster_sizes", part.cluster_sizes() },
                     { "unassigned", part.unassigned() } };

  if (xbs_raw.has_truth()) {
    const auto& truth = *xbs_raw.truth();
    std::vector<int> truth_labels(truth.size());
    std::vector<int> flagged(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) {
      truth_labels[i] = truth[i] == Truth::signal ? 1 : 0;
      const int l = part.labels[i];
      flagged[i] = l != kUnassigned && is_candidate[static_cast<std::size_t>(l - 1)] ? 1 : 0;
    }
    const auto full = contingency(truth_labels, part.labels);
    // Rows: truth background/signal; columns: background/candidate cluster.
    std::vector<std::vector<std::int64_t>> counts(2, std::vector<std::int64_t>(2, 0));
    for (std::size_t i = 0; i < truth.size(); ++i)
      ++counts[static_cast<std::size_t>(truth_labels[i])][static_cast<std::size_t>(flagged[i])];
    const auto bin = ContingencyTable::from_counts(std::move(counts));
    ojson ev;
    ev["truth_column"] = cfg.data.label_column;
    ev["contingency_rows"] = { "background", "signal" };
    ev["contingency_columns"] = full.col_labels;
    ev["contingency"] = full.counts;
    ev["fowlkes_mallows"] = fowlkes_mallows(full);
    ev["signal_contingency"] = bin.counts;
    const std::int64_t truth_signal = bin.counts[1][0] + bin.counts[1][1];
    ev["true_positive_rate"] = truth_signal > 0 ? ojson(true_positive_rate(bin, 1, 1)) : ojson(nullptr);
    J["evaluation"] = ev;
  }

  ctx.report.status = RunStatus::signal_claim;
  J["message"] = "signal claim: every candidate mode is significant";
  detail::finish_report(ctx, cfg);
  return std::move(ctx.report);
}

//! Draws background, experimental and optional test samples from the
//! configured mixture. Background rows come from background components only.
inline RunReport cmd_synth(const PipelineConfig& cfg, const WarningSink& sink = {})
{
  detail::RunContext ctx(cfg, sink);
  const auto& sy = cfg.synth;
  const auto bg_spec = sy.mixture(0.0);
  const auto exp_spec = sy.mixture(sy.signal_fraction);
  const auto d = static_cast<std::size_t>(bg_spec.dimension());
  if (!sy.columns.empty() && sy.columns.size() != d)
    throw Error(ErrorKind::config, "[synth] columns: expected " + std::to_string(d) + " names");
  auto named = [&](Dataset data) {
    if (sy.columns.empty())
      return data;
    return Dataset(data.values(), sy.columns, data.truth());
  };
  const LabelMap labels{ cfg.data.label_background, cfg.data.label_signal };
  const auto& col = cfg.data.label_column.empty() ? std::string("class") : cfg.data.label_column;

  auto emit = [&](const std::string& file, const Dataset& data) {
    auto out = ctx.open(file);
    write_csv(out, data, col, labels);
    ctx.close(out, file);
  };
  const auto xb = named(sample_mixture(bg_spec, sy.background_rows, derive_seed(cfg.run.seed, Stage::synth_background)));
  const auto xbs =
    named(sample_mixture(exp_spec, sy.experimental_rows, derive_seed(cfg.run.seed, Stage::synth_experimental)));
  emit(sy.background_file, xb);
  emit(sy.experimental_file, xbs);
  std::size_t signal_rows = 0;
  for (auto t : *xbs.truth())
    signal_rows += t == Truth::signal ? 1 : 0;
  ctx.report.json["tool"] = "semimodal";
  ctx.report.json["version"] = kVersion;
  ctx.report.json["command"] = "synth";
  ctx.report.json["seed"] = cfg.run.seed;
  ctx.report.json["synth"] = { { "background_rows", sy.background_rows },
                               { "experimental_rows", sy.experimental_rows },
                               { "experimental_signal_rows", signal_rows },
                               { "test_rows", sy.test_rows },
                               { "signal_fraction", sy.signal_fraction },
                               { "components", sy.components.size() } };
  if (sy.test_rows > 0) {
    const auto xt = named(sample_mixture(exp_spec, sy.test_rows, derive_seed(cfg.run.seed, Stage::synth_test)));
    emit(sy.test_file, xt);
  }
  ctx.report.status = RunStatus::written;
  detail::finish_report(ctx, cfg);
  return std::move(ctx.report);
}

} // namespace semimodal
