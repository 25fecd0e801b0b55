#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "hypolang/cli.hpp"

namespace cli = hypolang::cli;

int main(int argc, char** argv) {
  CLI::App app{"hypolang: truncated degenerate Langevin dynamics, rate certificates and checks"};
  app.require_subcommand(1);

  std::string config_path, out_dir, variant;
  std::size_t workers = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option("--out", out_dir, "output directory for CSV/JSON files");
    sub->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--variant", variant, "rate variant")->check(CLI::IsMember({"thm5_2", "thm6_10"}));
  };

  using Command = int (*)(const cli::Context&, std::ostream&);
  const std::map<std::string, std::pair<Command, std::string>> commands = {
      {"check", {cli::cmd_check, "evaluate the parameter conditions"}},
      {"rate", {cli::cmd_rate, "certified constants and theta2 table"}},
      {"simulate", {cli::cmd_simulate, "one trajectory of the observables"}},
      {"decay", {cli::cmd_decay, "Monte Carlo decay curves against the envelope"}},
      {"ergodic", {cli::cmd_ergodic, "time-average errors against the ergodic bound"}},
      {"verify", {cli::cmd_verify, "operator, sampler and propagator oracle suites"}},
  };
  std::map<CLI::App*, Command> dispatch;
  for (const auto& [name, entry] : commands) {
    CLI::App* sub = app.add_subcommand(name, entry.second);
    add_common(sub);
    dispatch[sub] = entry.first;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : cli::kUsage;
  }

  try {
    cli::Overrides o;
    if (!out_dir.empty()) o.out_dir = out_dir;
    if (workers > 0) o.workers = workers;
    if (!variant.empty()) o.variant = hypolang::parse_variant(variant);
    const cli::Context ctx(hypolang::load_config(config_path), o);
    for (const auto& [sub, fn] : dispatch)
      if (sub->parsed()) return fn(ctx, std::cout);
  } catch (const hypolang::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return cli::kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kFail;
  }
  return cli::kUsage;
}
