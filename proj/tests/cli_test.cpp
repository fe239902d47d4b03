// SPDX-License-Identifier: Apache-2.0
#include "commands.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "prefopt/analysis.hpp"
#include "prefopt/errors.hpp"
#include "prefopt/serialize.hpp"
#include "run_config.hpp"
#include "testutil.hpp"

namespace prefopt::cli {
namespace {

using testutil::TempDir;

std::string file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig small_config(const std::filesystem::path& out, std::uint64_t seed) {
  RunConfig config;
  config.seed = seed;
  config.out = out.string();
  config.vocab_size = 8;
  config.class_count = 2;
  config.max_len = 6;
  config.count = 256;
  config.batch_size = 32;
  config.epochs = 1;
  config.lr = 0.05;
  config.sft_epochs = 10;
  config.samples_per_prompt = 50;
  return config;
}

TEST(RunConfigFile, ParseOverridesAndErrors) {
  TempDir dir("cfg");
  const auto path = dir.path() / "run.cfg";
  {
    std::ofstream out(path);
    out << "# comment\n"
        << "seed = 7\n"
        << "out = somewhere\n"
        << "data.vocab_size = 9   # trailing comment\n"
        << "train.loss = simpo\n"
        << "train.gamma = 0.25\n";
  }
  RunConfig config;
  config.load_file(path);
  EXPECT_EQ(config.seed, 7u);
  EXPECT_EQ(config.out, "somewhere");
  EXPECT_EQ(config.vocab_size, 9);
  EXPECT_EQ(config.loss_name, "simpo");
  EXPECT_DOUBLE_EQ(config.gamma, 0.25);

  config.set("train.gamma", "0.6");  // flag-style override wins
  EXPECT_DOUBLE_EQ(config.gamma, 0.6);

  EXPECT_THROW(config.set("train.nonsense", "1"), InvalidInputError);
  EXPECT_THROW(config.set("train.gamma", "abc"), InvalidInputError);
  EXPECT_THROW(config.set("train.loss", "kto"), InvalidInputError);

  {
    std::ofstream out(path);
    out << "not a key value line\n";
  }
  EXPECT_THROW(config.load_file(path), ParseError);
}

TEST(RunConfigFile, TrainConfigAssembly) {
  RunConfig config = small_config("unused", 5);
  config.schedule_name = "linear";
  config.gamma_start = 1.0;
  config.gamma_end = 0.2;
  const TrainConfig tc = config.train_config();
  EXPECT_EQ(tc.schedule.mode, ScheduleMode::Linear);
  EXPECT_DOUBLE_EQ(tc.schedule.gamma_start, 1.0);
  EXPECT_DOUBLE_EQ(tc.schedule.gamma_end, 0.2);
  EXPECT_EQ(tc.seed, 5u);

  RunConfig no_seed;
  no_seed.seed.reset();
  EXPECT_THROW(no_seed.train_config(), InvalidInputError);
}

TEST(CmdGenData, DeterministicChecksumAndDryRun) {
  TempDir dir("gen");
  RunConfig config = small_config(dir.path() / "a", 11);
  std::ostringstream log;
  ASSERT_EQ(cmd_gen_data(config, {}, log), exit_code::kOk);
  const auto path_a = config.dataset_path();
  ASSERT_TRUE(std::filesystem::exists(path_a));
  EXPECT_NE(log.str().find("256"), std::string::npos);  // record count printed

  RunConfig config_b = small_config(dir.path() / "b", 11);
  ASSERT_EQ(cmd_gen_data(config_b, {}, log), exit_code::kOk);
  EXPECT_EQ(file_bytes(path_a), file_bytes(config_b.dataset_path()));

  RunConfig dry = small_config(dir.path() / "c", 11);
  ASSERT_EQ(cmd_gen_data(dry, CommandContext{true, 1}, log), exit_code::kOk);
  EXPECT_FALSE(std::filesystem::exists(dry.dataset_path()));

  RunConfig no_seed = small_config(dir.path() / "d", 11);
  no_seed.seed.reset();
  try {
    cmd_gen_data(no_seed, {}, log);
    FAIL() << "expected missing-seed error";
  } catch (const InvalidInputError&) {
    EXPECT_EQ(exit_code_for_current_exception(log), exit_code::kUsage);
  }
}

TEST(CmdTrain, SmokeRunWritesMetricsAndParams) {
  TempDir dir("train");
  RunConfig config = small_config(dir.path() / "run", 12);
  std::ostringstream log;
  ASSERT_EQ(cmd_train(config, "", {}, log), exit_code::kOk);

  const auto metrics_path = std::filesystem::path(config.out) / "metrics.jsonl";
  ASSERT_TRUE(std::filesystem::exists(metrics_path));
  std::ifstream metrics(metrics_path);
  const auto stats = read_metrics(metrics);
  EXPECT_EQ(stats.size(), 8u);  // 256 triples / batch 32
  const PolicyParams params =
      load_params(std::filesystem::path(config.out) / "params.bin");
  EXPECT_EQ(params.vocab_size, config.vocab_size);
}

TEST(CmdTrain, MlpModelTrains) {
  TempDir dir("train_mlp");
  RunConfig config = small_config(dir.path() / "run", 19);
  config.model_name = "mlp";
  config.hidden = 6;
  config.sft_epochs = 5;
  std::ostringstream log;
  ASSERT_EQ(cmd_train(config, "", {}, log), exit_code::kOk);
  const PolicyParams params =
      load_params(std::filesystem::path(config.out) / "params.bin");
  EXPECT_EQ(params.kind, ModelKind::Mlp);
  EXPECT_EQ(params.hidden, 6);
}

TEST(CmdTrain, DryRunTouchesNothing) {
  TempDir dir("train_dry");
  RunConfig config = small_config(dir.path() / "run", 13);
  std::ostringstream log;
  ASSERT_EQ(cmd_train(config, "", CommandContext{true, 1}, log), exit_code::kOk);
  EXPECT_FALSE(std::filesystem::exists(std::filesystem::path(config.out) / "metrics.jsonl"));
  EXPECT_FALSE(std::filesystem::exists(std::filesystem::path(config.out) / "params.bin"));
}

TEST(CmdTrain, DpoWithoutRefIsConfigurationError) {
  TempDir dir("train_dpo");
  RunConfig config = small_config(dir.path() / "run", 14);
  config.loss_name = "dpo";
  config.beta = 0.1;
  std::ostringstream log;
  try {
    cmd_train(config, "", {}, log);
    FAIL() << "expected configuration error";
  } catch (const InvalidInputError&) {
    EXPECT_EQ(exit_code_for_current_exception(log), exit_code::kValidation);
  }
  EXPECT_FALSE(std::filesystem::exists(std::filesystem::path(config.out) / "metrics.jsonl"));
}

TEST(CmdTrain, DpoTrainsWithRefParams) {
  TempDir dir("train_dpo_ref");
  RunConfig config = small_config(dir.path() / "run", 15);
  std::ostringstream log;
  ASSERT_EQ(cmd_train(config, "", {}, log), exit_code::kOk);  // produces sft_params.bin

  RunConfig dpo = small_config(dir.path() / "run2", 15);
  dpo.dataset_file = config.dataset_path().string();
  dpo.loss_name = "dpo";
  dpo.beta = 0.1;
  const auto ref_path = (std::filesystem::path(config.out) / "sft_params.bin").string();
  ASSERT_EQ(cmd_train(dpo, ref_path, {}, log), exit_code::kOk);
  EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(dpo.out) / "params.bin"));
}

TEST(CmdSweepGamma, SixRowsOrderedAndDeduplicated) {
  TempDir dir("sweep");
  RunConfig config = small_config(dir.path() / "sweep", 16);
  config.count = 128;
  config.samples_per_prompt = 25;
  std::ostringstream log;
  const std::vector<double> gammas{0.4, 0.0, 0.4, 0.2};  // one duplicate
  ASSERT_EQ(cmd_sweep_gamma(config, gammas, CommandContext{false, 2}, log), exit_code::kOk);
  EXPECT_NE(log.str().find("duplicate"), std::string::npos);

  const auto csv = file_bytes(std::filesystem::path(config.out) / "summary.csv");
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "run_id,gamma_start,gamma_end,final_m_dataset,final_filter_frac,win_rate");
  int rows = 0;
  double prev_gamma = -1.0;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    ++rows;
    const auto first_comma = line.find(',');
    const auto second_comma = line.find(',', first_comma + 1);
    const double g = std::stod(line.substr(first_comma + 1, second_comma - first_comma - 1));
    EXPECT_GT(g, prev_gamma);  // ordered by gamma
    prev_gamma = g;
  }
  EXPECT_EQ(rows, 3);  // deduplicated
}

TEST(CmdSweepGamma, PerRunFailureIsReportedAndSurvivorsSummarized) {
  TempDir dir("sweep_fail");
  RunConfig config = small_config(dir.path() / "sweep", 20);
  config.count = 64;
  config.samples_per_prompt = 10;
  std::ostringstream log;
  // gamma 1.5 is outside [0, 1] and fails inside its run; the others survive.
  EXPECT_EQ(cmd_sweep_gamma(config, {0.2, 1.5}, {}, log), exit_code::kNumeric);
  EXPECT_NE(log.str().find("failed"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(config.out) / "summary.csv"));
}

TEST(CmdSweepGamma, SingleGammaGivesOneRow) {
  TempDir dir("sweep_one");
  RunConfig config = small_config(dir.path() / "sweep", 18);
  config.count = 64;
  config.samples_per_prompt = 10;
  std::ostringstream log;
  ASSERT_EQ(cmd_sweep_gamma(config, {0.4}, {}, log), exit_code::kOk);
  std::istringstream lines(file_bytes(std::filesystem::path(config.out) / "summary.csv"));
  std::string line;
  int rows = -1;  // skip header
  while (std::getline(lines, line))
    if (!line.empty()) ++rows;
  EXPECT_EQ(rows, 1);
}

TEST(CmdVerify, PassesByDefaultAndFailsAtZeroTolerance) {
  std::ostringstream log;
  VerifyOptions options;
  options.gradcheck_cases = 10;
  EXPECT_EQ(cmd_verify(options, log), exit_code::kOk);

  VerifyOptions impossible;
  impossible.gradcheck_cases = 5;
  impossible.tolerance = 0.0;
  std::ostringstream log2;
  EXPECT_EQ(cmd_verify(impossible, log2), exit_code::kNumeric);
  EXPECT_NE(log2.str().find("[FAIL] envelope"), std::string::npos);
}

TEST(CmdVerify, CheckFilterSelectsFamily) {
  std::ostringstream log;
  VerifyOptions options;
  options.check_filter = "envelope";
  EXPECT_EQ(cmd_verify(options, log), exit_code::kOk);
  EXPECT_NE(log.str().find("envelope"), std::string::npos);
  EXPECT_EQ(log.str().find("gradcheck"), std::string::npos);
}

TEST(CmdFitScaling, RecoversPlantedLaw) {
  // Craft a sweep directory whose proxies d and win rates R follow the law
  // R = d (2 - 0.5 log d) exactly.
  TempDir dir("fitscale");
  std::vector<RunRecord> runs;
  for (int i = 0; i < 8; ++i) {
    const double d = 0.1 + 0.1 * i;
    std::vector<BatchStats> stats;
    for (int s = 0; s < 10; ++s) {
      BatchStats b;
      b.step = s;
      b.m_batch = d;  // constant margin: proxy == d
      b.filter_frac = 0.0;
      b.gamma = 0.4;
      b.lr = 0.01;
      if (s == 9) b.m_dataset = d;
      stats.push_back(b);
    }
    const double r = d * (2.0 - 0.5 * std::log(d));
    runs.push_back(RunRecord{"run" + std::to_string(i),
                             GammaSchedule{ScheduleMode::Constant, 0.1 * i, 0.1 * i}, r, stats});
  }
  emit_summary(runs, dir.path());

  std::ostringstream log;
  ASSERT_EQ(cmd_fit_scaling(dir.path().string(), log), exit_code::kOk);
  const std::string text = log.str();
  double alpha = 0.0;
  double beta = 0.0;
  ASSERT_EQ(std::sscanf(text.c_str(), "alpha=%lf beta=%lf", &alpha, &beta), 2) << text;
  EXPECT_NEAR(alpha, 2.0, 1e-9);
  EXPECT_NEAR(beta, 0.5, 1e-9);
}

TEST(CmdFitScaling, FewerThanTwoUsableRunsFails) {
  TempDir dir("fitscale_bad");
  std::vector<RunRecord> runs;
  std::vector<BatchStats> stats(3);
  for (int s = 0; s < 3; ++s) {
    stats[static_cast<std::size_t>(s)].step = s;
    stats[static_cast<std::size_t>(s)].m_batch = 0.5;
    stats[static_cast<std::size_t>(s)].m_dataset = 0.5;
  }
  runs.push_back(RunRecord{"only", GammaSchedule{ScheduleMode::Constant, 0.4, 0.4}, 0.6, stats});
  emit_summary(runs, dir.path());
  std::ostringstream log;
  EXPECT_THROW(cmd_fit_scaling(dir.path().string(), log), InvalidInputError);
}

TEST(CmdFitScaling, IdenticalProxiesAreDegenerate) {
  TempDir dir("fitscale_deg");
  std::vector<RunRecord> runs;
  for (int i = 0; i < 3; ++i) {
    std::vector<BatchStats> stats(2);
    stats[0].m_batch = 0.5;
    stats[1].m_batch = 0.5;
    stats[1].m_dataset = 0.5;
    runs.push_back(RunRecord{"run" + std::to_string(i),
                             GammaSchedule{ScheduleMode::Constant, 0.2 * i, 0.2 * i}, 0.6, stats});
  }
  emit_summary(runs, dir.path());
  std::ostringstream log;
  EXPECT_THROW(cmd_fit_scaling(dir.path().string(), log), DegenerateFitError);
}

TEST(CmdEvalWinrate, ComparesSavedPolicies) {
  TempDir dir("evalwr");
  RunConfig config = small_config(dir.path() / "run", 17);
  std::ostringstream log;
  ASSERT_EQ(cmd_gen_data(config, {}, log), exit_code::kOk);

  PolicyParams uniform = PolicyParams::bigram(config.vocab_size, config.class_count);
  save_params(dir.path() / "a.bin", uniform);
  save_params(dir.path() / "b.bin", uniform);
  std::ostringstream result;
  ASSERT_EQ(cmd_eval_winrate(config, (dir.path() / "a.bin").string(),
                             (dir.path() / "b.bin").string(), result),
            exit_code::kOk);
  EXPECT_NE(result.str().find("win_rate="), std::string::npos);
}

TEST(ParamsFile, RoundTripAndCorruption) {
  TempDir dir("params");
  RngStream rng = make_stream(81);
  PolicyParams p = testutil::random_mlp(6, 3, 4, rng);
  const auto path = dir.path() / "p.bin";
  save_params(path, p);
  const PolicyParams loaded = load_params(path);
  EXPECT_EQ(loaded, p);

  auto bytes = file_bytes(path);
  bytes[bytes.size() - 9] ^= 0x01;  // flip a payload bit under the checksum
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  EXPECT_THROW(load_params(path), ParseError);
}

TEST(ExitCodes, DistinctPerFailureClass) {
  std::ostringstream log;
  auto code_for = [&](auto&& thrower) {
    try {
      thrower();
      return -1;
    } catch (...) {
      return exit_code_for_current_exception(log);
    }
  };
  EXPECT_EQ(code_for([] { throw InvalidInputError("usage: missing seed"); }), exit_code::kUsage);
  EXPECT_EQ(code_for([] { throw InvalidInputError("bad token"); }), exit_code::kValidation);
  EXPECT_EQ(code_for([] { throw NumericError("nan"); }), exit_code::kNumeric);
  EXPECT_EQ(code_for([] { throw DegenerateFitError("flat"); }), exit_code::kNumeric);
  EXPECT_EQ(code_for([] { throw IoError("disk"); }), exit_code::kIo);
  EXPECT_EQ(code_for([] { throw ParseError("bad line", 3); }), exit_code::kIo);
}

}  // namespace
}  // namespace prefopt::cli
