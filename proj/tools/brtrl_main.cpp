#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "brtrl/config.hpp"
#include "brtrl/errors.hpp"
#include "brtrl/runner.hpp"

namespace {

// Exit codes: 0 ok, 2 config error, 3 I/O error, 4 contract violation.
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitContract = 4;

std::string registry_help() {
  std::ostringstream out;
  out << "Config keys (file `key = value` lines or --set key=value; flags win):\n";
  for (const brtrl::KeySpec& spec : brtrl::config_registry()) {
    out << "  " << spec.name;
    if (spec.default_value != nullptr) {
      out << " (default " << spec.default_value << ")";
    } else {
      out << " (no default)";
    }
    out << ": " << spec.help << "\n";
  }
  out << "\nRequired keys without defaults must be set explicitly:\n"
         "  teach/pg/pg-recycled: environment\n"
         "  collect: environment, model\n"
         "  distill: environment, model, data\n"
         "  evaluate: environment, model\n"
         "  export-tree: model (environment optional, for feature names)\n"
         "  plot: input\n"
         "  repro: none (environment narrows the run to one environment)\n";
  return out.str();
}

struct Cli {
  std::string mode;
  std::optional<std::string> config_path;
  std::vector<std::pair<std::string, std::string>> flags;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Boosted-tree RL: policy distillation and policy-gradient boosting"};
  app.require_subcommand(1);
  app.footer(registry_help());

  Cli cli;
  const std::vector<std::pair<std::string, std::string>> subcommands = {
      {"teach", "Train the SARSA tile-coding teacher"},
      {"collect", "Record greedy teacher rollouts into dataset.csv"},
      {"distill", "Fit the GBM student from a dataset and report fidelity"},
      {"evaluate", "Evaluate a saved model (.sarsa/.gbm/.pge) greedily"},
      {"pg", "REINFORCE-with-trees policy-gradient boosting"},
      {"pg-recycled", "Policy-gradient boosting with a fixed ensemble capacity"},
      {"export-tree", "Print one tree from a model as if/else rules"},
      {"plot", "Render a curve CSV as an SVG line chart"},
      {"repro", "Full pipeline per environment (teach, collect, distill, evaluate, pg)"},
  };
  for (const auto& [name, description] : subcommands) {
    CLI::App* sub = app.add_subcommand(name, description);
    sub->add_option_function<std::string>(
        "--config", [&cli](const std::string& path) { cli.config_path = path; },
        "Config file of `key = value` lines");
    sub->add_option_function<std::string>(
        "--seed", [&cli](const std::string& seed) { cli.flags.emplace_back("seed", seed); },
        "Master seed (64-bit unsigned)");
    sub->add_option_function<std::string>(
        "--out", [&cli](const std::string& dir) { cli.flags.emplace_back("out", dir); },
        "Output directory (default $BRTRL_OUT or ./out)");
    sub->add_option_function<std::vector<std::string>>(
        "--set",
        [&cli](const std::vector<std::string>& pairs) {
          for (const std::string& pair : pairs) {
            const std::size_t eq = pair.find('=');
            if (eq == std::string::npos) {
              throw CLI::ValidationError("--set", "expected key=value, got '" + pair + "'");
            }
            cli.flags.emplace_back(pair.substr(0, eq), pair.substr(eq + 1));
          }
        },
        "Override one config key (repeatable)");
    sub->callback([&cli, name = name]() { cli.mode = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    const brtrl::ExperimentConfig config =
        brtrl::ExperimentConfig::resolve(cli.mode, cli.config_path, cli.flags);
    brtrl::run_experiment(config, std::cout);
    return 0;
  } catch (const brtrl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const brtrl::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "contract violation: " << e.what() << "\n";
    return kExitContract;
  } catch (const std::logic_error& e) {
    std::cerr << "contract violation: " << e.what() << "\n";
    return kExitContract;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
