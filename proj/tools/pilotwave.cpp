#include "pilotwave/cli.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <iostream>

using namespace pilotwave;
using namespace pilotwave::cli;

namespace {

void report_error(const Error& e) {
  std::cerr << "error category=" << to_string(e.category()) << " field=" << e.field()
            << " reason=" << json(e.reason()).dump() << "\n";
}

// "--key value", "--key=value" or a bare "--flag" (true).
FlagMap parse_extras(const std::vector<std::string>& extra) {
  FlagMap out;
  for (std::size_t i = 0; i < extra.size(); ++i) {
    const std::string& a = extra[i];
    if (a.rfind("--", 0) != 0 || a.size() < 3)
      throw Error(ErrorCategory::config, a, "unexpected argument");
    const auto eq = a.find('=');
    if (eq != std::string::npos) {
      out.emplace_back(a.substr(2, eq - 2), a.substr(eq + 1));
    } else if (i + 1 < extra.size() && extra[i + 1].rfind("--", 0) != 0) {
      out.emplace_back(a.substr(2), extra[i + 1]);
      ++i;
    } else {
      out.emplace_back(a.substr(2), "true");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << usage();
    return exit_invalid_input;
  }
  CLI::App app{"pilot-wave trajectory experiments"};
  app.require_subcommand(1);
  app.set_help_flag("-h,--help");

  std::string experiment, config_file, out_dir;
  std::uint64_t seed = 0;
  CLI::App* run_cmd = app.add_subcommand("run", "run an experiment");
  CLI::App* val_cmd = app.add_subcommand("validate", "check a configuration without running");
  CLI::App* list_cmd = app.add_subcommand("list", "list the experiment registry");
  for (CLI::App* c : {run_cmd, val_cmd}) {
    c->add_option("experiment", experiment, "experiment name");
    c->add_option("--config", config_file, "JSON configuration file");
    c->add_option("--seed", seed, "RNG seed");
    c->add_option("--out", out_dir, "output directory");
    c->allow_extras();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << usage();
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error category=config field=arguments reason=" << json(e.what()).dump() << "\n"
              << usage();
    return exit_invalid_input;
  }

  if (list_cmd->parsed()) {
    for (const auto& e : registry()) {
      std::cout << e.name << "  " << e.summary << "\n";
      for (const auto& p : e.params)
        std::cout << "    --" << p.name << " (" << p.kind << ", default " << p.fallback.dump()
                  << ")  " << p.help << "\n";
    }
    return exit_ok;
  }

  CLI::App* cmd = run_cmd->parsed() ? run_cmd : val_cmd;
  try {
    if (experiment.empty() && config_file.empty()) {
      std::cerr << usage();
      return exit_invalid_input;
    }
    const ExperimentConfig cfg = load_config(
        config_file.empty() ? std::nullopt : std::optional<std::string>(config_file),
        experiment.empty() ? std::nullopt : std::optional<std::string>(experiment),
        parse_extras(cmd->remaining()),
        cmd->count("--seed") ? std::optional<std::uint64_t>(seed) : std::nullopt,
        out_dir.empty() ? std::nullopt : std::optional<std::string>(out_dir));

    if (cmd == val_cmd) {
      const ValidationReport r = validate(cfg);
      json issues = json::array();
      for (const auto& i : r.issues)
        issues.push_back({{"category", to_string(i.category)}, {"field", i.field}, {"reason", i.message}});
      std::cout << json{{"experiment", cfg.experiment}, {"ok", r.ok()}, {"issues", issues},
                        {"derived", r.derived}}
                       .dump(2)
                << "\n";
      return r.exit_code();
    }

    const RunResult r = run(cfg);
    std::cout << json{{"experiment", cfg.experiment},
                      {"output_dir", cfg.output_dir},
                      {"files", r.files},
                      {"wall_time_s", r.wall_time},
                      {"summary", r.summary}}
                     .dump(2)
              << "\n";
    return exit_ok;
  } catch (const Error& e) {
    report_error(e);
    return exit_code_for(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error category=internal field=- reason=" << json(e.what()).dump() << "\n";
    return exit_internal;
  }
}
