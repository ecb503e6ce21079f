// mixforge: deterministic mix-augmentation pipelines, desk-scale training,
// and corruption evaluation. See README.md for the config schema.

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mixforge/mixforge.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

mixforge::RunConfig load_config(const CommonArgs& args) {
  mixforge::RunConfig cfg = mixforge::load_run_config(args.config_path);
  if (args.seed_set) cfg.seed = args.seed;
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "run configuration JSON")
      ->required();
  cmd->add_option("--seed", args.seed, "override the config seed")
      ->each([&args](const std::string&) { args.seed_set = true; });
  cmd->add_option("--out", args.out_dir, "override the config output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mixforge: mix-family augmentation pipelines and evaluation"};
  app.require_subcommand(1);

  CommonArgs args;
  int count = 1;
  std::string checkpoint;
  std::vector<int> k_list;

  CLI::App* augment = app.add_subcommand("augment", "export composed batches");
  add_common(augment, args);
  augment->add_option("--count", count, "number of batches to export");

  CLI::App* train = app.add_subcommand("train", "train the desk-scale classifier");
  add_common(train, args);

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint (clean + corruptions)");
  add_common(eval, args);
  eval->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();

  CLI::App* ablate = app.add_subcommand("ablate-k", "sweep the stacking factor k");
  add_common(ablate, args);
  ablate->add_option("--k", k_list, "comma-separated k values")
      ->delimiter(',')
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    const mixforge::RunConfig cfg = load_config(args);
    if (augment->parsed()) {
      mixforge::cmd_augment(cfg, count);
    } else if (train->parsed()) {
      mixforge::cmd_train(cfg);
    } else if (eval->parsed()) {
      mixforge::cmd_eval(cfg, checkpoint);
    } else {
      mixforge::cmd_ablate_k(cfg, k_list);
    }
    return kExitOk;
  } catch (const mixforge::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const mixforge::NumericsError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const mixforge::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}
