// SPDX-License-Identifier: Apache-2.0
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "run_config.hpp"

namespace {

using namespace prefopt::cli;

struct GlobalArgs {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::string out;
  int jobs = 1;
  bool dry_run = false;
  std::map<std::string, std::string> overrides;
};

// Resolution order: defaults, config file, per-key override flags,
// then the --seed/--out convenience flags.
RunConfig resolve_config(const GlobalArgs& args) {
  RunConfig config;
  if (!args.config_file.empty()) config.load_file(args.config_file);
  for (const auto& [key, value] : args.overrides) config.set(key, value);
  if (args.seed) config.seed = *args.seed;
  if (!args.out.empty()) config.out = args.out;
  return config;
}

void add_common_options(CLI::App* app, GlobalArgs& args) {
  app->add_option("--config", args.config_file, "key = value configuration file");
  app->add_option("--seed", args.seed, "root seed (overrides config)");
  app->add_option("--out", args.out, "output directory (overrides config)");
  app->add_option("--jobs", args.jobs, "parallel runs for sweeps")->check(CLI::PositiveNumber);
  app->add_flag("--dry-run", args.dry_run, "validate configuration, touch nothing");
  for (const auto& [key, help] : prefopt::cli::known_config_keys()) {
    if (key == "seed" || key == "out") continue;
    app->add_option_function<std::string>(
        "--" + key, [&args, k = key](const std::string& v) { args.overrides[k] = v; }, help);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Preference-optimization laboratory for small softmax policies"};
  app.require_subcommand(1);

  GlobalArgs args;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic preference dataset");
  add_common_options(gen, args);

  auto* train = app.add_subcommand("train", "run preference optimization");
  std::string ref_params;
  train->add_option("--ref-params", ref_params, "serialized reference policy (dpo family)");
  add_common_options(train, args);

  auto* sweep = app.add_subcommand("sweep-gamma", "train once per gamma and summarize");
  std::vector<double> gammas;
  sweep->add_option("--gamma", gammas, "gamma values to sweep")->required();
  add_common_options(sweep, args);

  auto* verify = app.add_subcommand("verify", "numeric certification battery");
  VerifyOptions verify_options;
  double tolerance_flag = -1.0;
  auto* tol_opt = verify->add_option("--tolerance", tolerance_flag,
                                     "override every check tolerance");
  verify->add_option("--check", verify_options.check_filter,
                     "run only checks whose name contains this substring");
  verify->add_option("--gradcheck-cases", verify_options.gradcheck_cases,
                     "random cases per loss kind")
      ->check(CLI::PositiveNumber);

  auto* fit = app.add_subcommand("fit-scaling", "fit R(d) = d (alpha - beta log d) to sweep runs");
  std::string sweep_dir;
  fit->add_option("dir", sweep_dir, "sweep output directory")->required();

  auto* eval = app.add_subcommand("eval-winrate", "gold-reward win rate between two policies");
  std::string params_a;
  std::string params_b;
  eval->add_option("--params-a", params_a, "first policy file")->required();
  eval->add_option("--params-b", params_b, "second policy file")->required();
  add_common_options(eval, args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return exit_code::kUsage;
  }

  try {
    const CommandContext ctx{args.dry_run, args.jobs};
    if (gen->parsed()) return cmd_gen_data(resolve_config(args), ctx, std::cout);
    if (train->parsed()) return cmd_train(resolve_config(args), ref_params, ctx, std::cout);
    if (sweep->parsed()) return cmd_sweep_gamma(resolve_config(args), gammas, ctx, std::cout);
    if (verify->parsed()) {
      if (!tol_opt->empty()) verify_options.tolerance = tolerance_flag;
      return cmd_verify(verify_options, std::cout);
    }
    if (fit->parsed()) return cmd_fit_scaling(sweep_dir, std::cout);
    if (eval->parsed())
      return cmd_eval_winrate(resolve_config(args), params_a, params_b, std::cout);
  } catch (...) {
    return exit_code_for_current_exception(std::cerr);
  }
  return exit_code::kUsage;
}
