// sadl: command-line front end.
//
// Exit codes: 0 success, 2 invalid input or configuration, 3 numerical
// failure. Errors are reported on stderr as
//   error: kind=<Kind> message=<text>

#include <exception>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "run_config.hpp"

namespace {

using Command = std::function<void(const sadl::cli::RunConfig&, std::ostream&)>;

// Every configuration key is also a flag, with '_' spelled '-'.
const std::vector<std::pair<std::string, std::string>> kFlagKeys = {
    {"x", "feature matrix (SADL1 binary, or CSV for .csv/.txt)"},
    {"labels", "labels file, one 1-based label per line"},
    {"test_x", "test feature matrix"},
    {"test_labels", "test labels"},
    {"model_in", "model directory to read"},
    {"model_out", "model directory to write (default: --out-dir)"},
    {"out_dir", "output directory"},
    {"format", "matrix format written by synth: bin or csv"},
    {"lambda1", "sparsity weight on U"},
    {"lambda2", "ridge weight on Omega"},
    {"rho1", "weight on the structure error"},
    {"rho2", "weight on the label error"},
    {"delta1", "weight on ||Q||^2"},
    {"delta2", "weight on ||W||^2"},
    {"mu", "penalty parameter, or auto"},
    {"eta", "step sizes: auto, or eta_u,eta_q,eta_w"},
    {"step_margin", "automatic step = (1 + margin) * alpha / mu"},
    {"iters", "maximum iterations"},
    {"tol", "stop when the largest relative change falls below this"},
    {"atoms", "number of dictionary atoms r (0: feature dimension)"},
    {"update_form", "error/dual update form: appendix or main-text"},
    {"clusters", "number of distributed workers N"},
    {"xi", "set xi1, xi2 and xi3 together"},
    {"xi1", "consensus weight on Omega"},
    {"xi2", "consensus weight on Q"},
    {"xi3", "consensus weight on W"},
    {"growth_rho", "annealing factor for mu and xi"},
    {"mu_max", "cap on annealed mu"},
    {"xi1_max", "cap on annealed xi1"},
    {"xi2_max", "cap on annealed xi2"},
    {"xi3_max", "cap on annealed xi3"},
    {"threads", "worker threads (0: one per worker)"},
    {"seed", "random seed"},
    {"normalize", "scale feature columns to unit norm (true/false)"},
    {"projection_dim", "random projection dimension (0: none)"},
    {"s", "rows of the structure target (default: sample count)"},
    {"rows_per_class", "rows of H per class, comma separated"},
    {"save_state", "also write U and the error/dual variables (true/false)"},
    {"classes", "synth: number of classes"},
    {"subspace_dim", "synth: subspace dimension"},
    {"ambient_dim", "synth: ambient dimension"},
    {"per_class", "synth: samples per class"},
    {"noise", "synth: noise standard deviation"},
    {"orthogonal", "synth: mutually orthogonal subspaces (true/false)"},
    {"grid", "cross-validation grid, e.g. \"lambda1=0.001,0.01;lambda2=0.005,0.05\""},
    {"folds", "cross-validation folds"},
};

std::string flag_name(std::string key) {
  for (auto& ch : key) {
    if (ch == '_') ch = '-';
  }
  return "--" + key;
}

struct Subcommand {
  CLI::App* app = nullptr;
  Command run;
  std::string preset;
  std::string config;
  bool print_config = false;
  std::map<std::string, std::string> values;
};

int report(const sadl::Error& e) {
  std::cerr << "error: kind=" << sadl::to_string(e.kind()) << " message=" << e.message() << "\n";
  return sadl::is_numerical(e.kind()) ? 3 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structured analysis dictionary learning: train, evaluate and inspect models."};
  app.require_subcommand(1);

  const std::vector<std::tuple<std::string, std::string, Command>> commands = {
      {"train", "train a model on one machine", sadl::cli::cmd_train},
      {"train-dist", "train across N workers with consensus", sadl::cli::cmd_train_dist},
      {"predict", "label samples with a trained model", sadl::cli::cmd_predict},
      {"eval", "accuracy, confusion matrix and timing on labeled samples", sadl::cli::cmd_eval},
      {"ablate", "compare H-only, W-only and full models", sadl::cli::cmd_ablate},
      {"synth", "generate the union-of-subspaces benchmark", sadl::cli::cmd_synth},
      {"trace", "write the full per-iteration trace of a training run", sadl::cli::cmd_trace},
  };

  std::vector<Subcommand> subs(commands.size());
  for (std::size_t i = 0; i < commands.size(); ++i) {
    auto& [name, help, run] = commands[i];
    Subcommand& sub = subs[i];
    sub.app = app.add_subcommand(name, help);
    sub.run = run;
    sub.app->add_option("--preset", sub.preset, "named hyperparameter preset");
    sub.app->add_option("--config", sub.config, "config file (key = value lines, or .json)");
    sub.app->add_flag("--print-config", sub.print_config, "print the resolved configuration and exit");
    for (const auto& [key, desc] : kFlagKeys) {
      sub.values[key];
      sub.app->add_option(flag_name(key), sub.values[key], desc);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  for (auto& sub : subs) {
    if (!sub.app->parsed()) continue;
    try {
      std::vector<std::pair<std::string, std::string>> flags;
      for (const auto& [key, desc] : kFlagKeys) {
        if (sub.app->count(flag_name(key)) > 0) flags.emplace_back(key, sub.values[key]);
      }
      const auto cfg = sadl::cli::resolve(sub.app->get_name(), sub.preset, sub.config, flags);
      if (sub.print_config) {
        std::cout << sadl::cli::dump_text(cfg);
        return 0;
      }
      sub.run(cfg, std::cerr);
      return 0;
    } catch (const sadl::Error& e) {
      return report(e);
    } catch (const std::exception& e) {
      std::cerr << "error: kind=IoError message=" << e.what() << "\n";
      return 2;
    }
  }
  return 2;
}
