// semimodal: command-line driver for signal detection over a labeled background.
#include <semimodal/pipeline.hpp>

#include <CLI11.hpp>

#include <iostream>

namespace {

struct Overrides
{
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool canonical = false;
};

void add_common(CLI::App* cmd, Overrides& o)
{
  cmd->add_option("--config", o.config, "Key-value config file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Master seed (overrides [run] seed)");
  cmd->add_option("--out", o.out, "Output directory (overrides [run] output_dir)");
  cmd->add_flag("--canonical-output", o.canonical, "Omit timestamps and run paths from report.json");
}

semimodal::PipelineConfig resolve(const Overrides& o)
{
  auto cfg = semimodal::load_config(o.config);
  if (o.seed)
    cfg.run.seed = *o.seed;
  if (o.out)
    cfg.run.output_dir = *o.out;
  if (o.canonical)
    cfg.run.canonical_output = true;
  return cfg;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{ "Semisupervised modal signal detection" };
  app.set_version_flag("--version", std::string(semimodal::kVersion));
  app.require_subcommand(1);
  Overrides o;
  auto* sel = app.add_subcommand("select-vars", "Rank variables by relevance to a background/experimental difference");
  auto* det = app.add_subcommand("detect", "Run variable selection, bandwidth sweep, mode test and final partition");
  auto* syn = app.add_subcommand("synth", "Write synthetic samples from the configured mixture");
  for (auto* c : { sel, det, syn })
    add_common(c, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : semimodal::exit_status::config_error;
  }

  auto warn = [](const std::string& m) { std::cerr << "warning: " << m << '\n'; };
  try {
    const auto cfg = resolve(o);
    semimodal::RunReport report;
    if (*sel)
      report = semimodal::cmd_select_vars(cfg, warn);
    else if (*det)
      report = semimodal::cmd_detect(cfg, warn);
    else
      report = semimodal::cmd_synth(cfg, warn);
    std::cout << semimodal::to_string(report.status) << '\n';
    for (const auto& f : report.outputs)
      std::cout << "  " << (std::filesystem::path(cfg.run.output_dir) / f).string() << '\n';
    return report.exit_code();
  } catch (const semimodal::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return semimodal::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return semimodal::exit_status::failure;
  }
}
