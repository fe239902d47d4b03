// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "run_config.hpp"

namespace prefopt::cli {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kUsage = 2;
inline constexpr int kValidation = 3;
inline constexpr int kNumeric = 4;
inline constexpr int kIo = 5;
}  // namespace exit_code

struct CommandContext {
  bool dry_run = false;
  int jobs = 1;
};

/// Generates and saves the synthetic preference dataset.
int cmd_gen_data(const RunConfig& config, const CommandContext& ctx, std::ostream& out);

/// Optional SFT fit, then preference training; writes metrics.jsonl and
/// params.bin (plus sft_params.bin when SFT ran) under the output directory.
int cmd_train(const RunConfig& config, const std::string& ref_params_path,
              const CommandContext& ctx, std::ostream& out);

/// Independent seeded runs per gamma, then a summary table + series files.
int cmd_sweep_gamma(const RunConfig& config, std::vector<double> gammas,
                    const CommandContext& ctx, std::ostream& out);

struct VerifyOptions {
  std::optional<double> tolerance;  // overrides every check's tolerance
  std::string check_filter;         // substring filter on check names
  std::uint64_t seed = 20240901;
  int gradcheck_cases = 100;
};

/// Runs the numeric certification battery; exit 0 iff every check passes.
int cmd_verify(const VerifyOptions& options, std::ostream& out);

/// Fits R(d) = d (alpha - beta log d) to a sweep directory's runs.
int cmd_fit_scaling(const std::string& sweep_dir, std::ostream& out);

/// Gold-reward win rate between two serialized policies.
int cmd_eval_winrate(const RunConfig& config, const std::string& params_a_path,
                     const std::string& params_b_path, std::ostream& out);

/// Maps an escaped exception to the exit-code taxonomy, printing the message.
int exit_code_for_current_exception(std::ostream& err);

}  // namespace prefopt::cli
