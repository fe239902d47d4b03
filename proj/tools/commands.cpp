// SPDX-License-Identifier: Apache-2.0
#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

#include "prefopt/analysis.hpp"
#include "prefopt/errors.hpp"
#include "prefopt/serialize.hpp"
#include "prefopt/theory.hpp"

namespace prefopt::cli {

namespace {

constexpr std::uint64_t kDataSalt = 0x44415441ULL;    // "DATA"
constexpr std::uint64_t kEvalSalt = 0x4556414cULL;    // "EVAL"

void require_seed(const RunConfig& config) {
  if (!config.seed) throw InvalidInputError("usage: seed is required (set seed = ... or --seed)");
}

bool is_usage_message(const std::string& what) { return what.rfind("usage:", 0) == 0; }

std::vector<PreferenceTriple> build_dataset(const RunConfig& config, DatasetMeta& meta) {
  meta = config.dataset_meta();
  const PolicyParams sampler = PolicyParams::bigram(config.vocab_size, config.class_count);
  RngStream rng = make_stream(*config.seed, kDataSalt);
  return make_dataset(meta, config.count, sampler, rng);
}

std::pair<DatasetMeta, std::vector<PreferenceTriple>> obtain_dataset(const RunConfig& config) {
  const auto path = config.dataset_path();
  if (std::filesystem::exists(path)) return load_dataset(path);
  DatasetMeta meta;
  auto triples = build_dataset(config, meta);
  return {std::move(meta), std::move(triples)};
}

PolicyParams initial_policy(const RunConfig& config, const DatasetMeta& meta,
                            const std::vector<PreferenceTriple>& triples) {
  PolicyParams init =
      config.model_name == "mlp"
          ? PolicyParams::mlp(meta.vocab_size, meta.class_count, config.hidden)
          : PolicyParams::bigram(meta.vocab_size, meta.class_count);
  if (config.sft) init = fit_sft(init, triples, config.sft_epochs, config.sft_lr);
  return init;
}

std::vector<Prompt> all_prompts(const DatasetMeta& meta) {
  std::vector<Prompt> prompts;
  prompts.reserve(static_cast<std::size_t>(meta.class_count));
  for (int c = 0; c < meta.class_count; ++c) prompts.push_back(Prompt{c, std::nullopt});
  return prompts;
}

void print_report_line(std::ostream& out, const TheoryReport& report) {
  out << (report.pass ? "[PASS] " : "[FAIL] ") << report.name
      << "  deviation=" << format_double(report.max_deviation)
      << "  tolerance=" << format_double(report.tolerance) << "  (" << report.grid << ")\n";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  return fields;
}

}  // namespace

int cmd_gen_data(const RunConfig& config, const CommandContext& ctx, std::ostream& out) {
  require_seed(config);
  DatasetMeta meta;
  const auto triples = build_dataset(config, meta);
  if (ctx.dry_run) {
    out << "dry-run: would write " << triples.size() << " triples to "
        << config.dataset_path().string() << "\n";
    return exit_code::kOk;
  }
  const auto path = config.dataset_path();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  save_dataset(path, meta, triples);
  out << "wrote " << triples.size() << " triples to " << path.string() << "\n";
  return exit_code::kOk;
}

int cmd_train(const RunConfig& config, const std::string& ref_params_path,
              const CommandContext& ctx, std::ostream& out) {
  require_seed(config);
  const auto [meta, triples] = obtain_dataset(config);

  TrainConfig train_config = config.train_config();
  train_config.validate();

  std::optional<PolicyParams> ref;
  if (!ref_params_path.empty()) {
    ref = load_params(ref_params_path);
    if (ref->vocab_size != meta.vocab_size || ref->class_count != meta.class_count)
      throw InvalidInputError("reference policy shape does not match the dataset");
  } else if (requires_reference(train_config.loss.kind)) {
    throw InvalidInputError(std::string(loss_kind_name(train_config.loss.kind)) +
                            " requires --ref-params");
  }

  if (ctx.dry_run) {
    out << "dry-run: configuration valid (" << triples.size() << " triples, "
        << loss_kind_name(train_config.loss.kind) << ")\n";
    return exit_code::kOk;
  }

  const PolicyParams init = initial_policy(config, meta, triples);
  const TrainResult result = train(train_config, triples, init, ref ? &*ref : nullptr);

  const std::filesystem::path out_dir(config.out);
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream metrics(out_dir / "metrics.jsonl", std::ios::binary);
    if (!metrics) throw IoError("cannot open metrics.jsonl for write");
    write_metrics(metrics, result.stats);
  }
  save_params(out_dir / "params.bin", result.params);
  if (config.sft) save_params(out_dir / "sft_params.bin", init);

  const double final_margin = dataset_margin(result.params, triples);
  out << "trained " << loss_kind_name(train_config.loss.kind) << " for " << result.stats.size()
      << " steps; final dataset margin " << format_double(final_margin) << "\n";
  return exit_code::kOk;
}

int cmd_sweep_gamma(const RunConfig& config, std::vector<double> gammas,
                    const CommandContext& ctx, std::ostream& out) {
  require_seed(config);
  if (gammas.empty()) throw InvalidInputError("usage: sweep-gamma needs at least one --gamma");

  std::sort(gammas.begin(), gammas.end());
  const auto last = std::unique(gammas.begin(), gammas.end());
  if (last != gammas.end()) {
    out << "warning: duplicate gamma values removed\n";
    gammas.erase(last, gammas.end());
  }

  const auto [meta, triples] = obtain_dataset(config);
  TrainConfig base = config.train_config();
  base.validate();
  if (requires_reference(base.loss.kind))
    throw InvalidInputError("sweep-gamma supports reference-free losses only");

  if (ctx.dry_run) {
    out << "dry-run: would sweep " << gammas.size() << " gamma values\n";
    return exit_code::kOk;
  }

  const PolicyParams init = initial_policy(config, meta, triples);
  const auto prompts = all_prompts(meta);

  struct SweepSlot {
    std::optional<RunRecord> record;
    std::string error;
  };
  std::vector<SweepSlot> slots(gammas.size());

  auto run_one = [&](std::size_t idx) {
    const double g = gammas[idx];
    try {
      TrainConfig run_config = base;
      run_config.loss.gamma = g;
      run_config.schedule = GammaSchedule{ScheduleMode::Constant, g, g};
      const TrainResult result = train(run_config, triples, init, nullptr);
      RngStream eval_rng = make_stream(*config.seed, kEvalSalt, idx);
      const WinRateReport wr = win_rate(result.params, init, prompts, meta.gold,
                                        config.samples_per_prompt, eval_rng, meta.max_len);
      std::ostringstream id;
      id << "run" << idx;
      slots[idx].record = RunRecord{id.str(), run_config.schedule, wr.win_rate, result.stats};
    } catch (const std::exception& e) {
      slots[idx].error = e.what();
    }
  };

  const int jobs = std::max(1, ctx.jobs);
  if (jobs == 1) {
    for (std::size_t i = 0; i < gammas.size(); ++i) run_one(i);
  } else {
    std::vector<std::future<void>> pending;
    for (std::size_t i = 0; i < gammas.size(); ++i) {
      pending.push_back(std::async(std::launch::async, run_one, i));
      if (pending.size() == static_cast<std::size_t>(jobs)) {
        for (auto& f : pending) f.get();
        pending.clear();
      }
    }
    for (auto& f : pending) f.get();
  }

  std::vector<RunRecord> records;
  bool any_failed = false;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].record) {
      records.push_back(std::move(*slots[i].record));
    } else {
      any_failed = true;
      out << "run for gamma=" << format_double(gammas[i]) << " failed: " << slots[i].error << "\n";
    }
  }
  if (records.empty()) throw NumericError("every sweep run failed");

  emit_summary(records, config.out);
  out << "gamma,final_m_dataset,final_filter_frac,win_rate\n";
  for (const auto& r : records) {
    double final_m = 0.0;
    for (auto it = r.stats.rbegin(); it != r.stats.rend(); ++it)
      if (it->m_dataset) {
        final_m = *it->m_dataset;
        break;
      }
    out << format_double(r.schedule.gamma_start) << ',' << format_double(final_m) << ','
        << format_double(r.stats.back().filter_frac) << ',' << format_double(r.win_rate) << "\n";
  }
  out << "summary written to " << (std::filesystem::path(config.out) / "summary.csv").string()
      << "\n";
  return any_failed ? exit_code::kNumeric : exit_code::kOk;
}

int cmd_verify(const VerifyOptions& options, std::ostream& out) {
  std::vector<TheoryReport> reports;

  {  // sigmoid limit: margins gamma +- 0.5 in steps of 0.005
    const double gamma = 0.4;
    std::vector<double> margins;
    for (int k = -100; k <= 100; ++k) margins.push_back(gamma + 0.005 * k);
    reports.push_back(sigmoid_limit_check(gamma, {10.0, 100.0, 1000.0, 1e4}, margins, 0.01,
                                          options.tolerance.value_or(1e-6)));
  }
  for (double a : {0.5, 1.0, 2.0})
    for (double b : {0.5, 1.0, 2.0})
      reports.push_back(envelope_check(a, b, 1e-3, options.tolerance.value_or(1e-9)));
  for (double a : {0.5, 1.0, 2.0})
    for (double b : {0.5, 1.0, 2.0}) {
      auto report = argmin_check(a, b, 1e-3);
      if (options.tolerance) {
        report.tolerance = *options.tolerance;
        report.pass = report.max_deviation <= report.tolerance;
      }
      reports.push_back(std::move(report));
    }
  {
    std::vector<double> xs;
    for (int k = 1; k <= 1000; ++k) xs.push_back(10.0 * k / 1000.0);
    auto report = underestimation_check(xs);
    if (options.tolerance) {
      report.tolerance = *options.tolerance;
      report.pass = report.max_deviation <= report.tolerance;
    }
    reports.push_back(std::move(report));
  }
  for (LossKind kind : {LossKind::RePO, LossKind::RePOpp, LossKind::SimPO, LossKind::DPO,
                        LossKind::SLiC, LossKind::IPO, LossKind::CPO, LossKind::RDPO,
                        LossKind::RePOppOnDPO})
    reports.push_back(gradcheck_battery(kind, options.gradcheck_cases, options.seed, 1e-6,
                                        options.tolerance.value_or(1e-6)));

  bool all_pass = true;
  std::size_t shown = 0;
  for (const auto& report : reports) {
    if (!options.check_filter.empty() &&
        report.name.find(options.check_filter) == std::string::npos)
      continue;
    ++shown;
    print_report_line(out, report);
    all_pass = all_pass && report.pass;
  }
  if (shown == 0) throw InvalidInputError("usage: no check matches filter '" +
                                          options.check_filter + "'");
  out << (all_pass ? "all checks passed" : "CHECKS FAILED") << " (" << shown << " shown)\n";
  return all_pass ? exit_code::kOk : exit_code::kNumeric;
}

int cmd_fit_scaling(const std::string& sweep_dir, std::ostream& out) {
  const std::filesystem::path dir(sweep_dir);
  std::ifstream csv(dir / "summary.csv");
  if (!csv) throw IoError("cannot open " + (dir / "summary.csv").string());

  std::string line;
  if (!std::getline(csv, line)) throw ParseError("empty summary.csv", 1);
  std::vector<std::pair<double, double>> points;
  long line_no = 1;
  while (std::getline(csv, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 6) throw ParseError("expected 6 summary columns", line_no);
    const std::string run_id = fields[0];
    const double wr = std::stod(fields[5]);

    // Series filename embeds run id and gamma tag.
    std::filesystem::path series;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      const auto name = entry.path().filename().string();
      if (name.rfind("series_" + run_id + "_", 0) == 0) {
        series = entry.path();
        break;
      }
    }
    if (series.empty()) throw IoError("missing series file for " + run_id);
    std::ifstream series_in(series);
    if (!series_in) throw IoError("cannot open " + series.string());
    const auto stats = read_metrics(series_in);
    const double d = margin_proxy(stats);
    if (d > 0.0) points.emplace_back(d, wr);
  }

  if (points.size() < 2)
    throw InvalidInputError("fewer than 2 usable runs (need positive margin proxies)");
  const ScalingFit fit = fit_scaling_law(points);
  out << "alpha=" << format_double(fit.alpha) << " beta=" << format_double(fit.beta)
      << " rss=" << format_double(fit.rss) << " n=" << fit.n_points << "\n";
  return exit_code::kOk;
}

int cmd_eval_winrate(const RunConfig& config, const std::string& params_a_path,
                     const std::string& params_b_path, std::ostream& out) {
  require_seed(config);
  const auto [meta, triples] = load_dataset(config.dataset_path());
  (void)triples;
  const PolicyParams a = load_params(params_a_path);
  const PolicyParams b = load_params(params_b_path);
  RngStream rng = make_stream(*config.seed, kEvalSalt);
  const WinRateReport report = win_rate(a, b, all_prompts(meta), meta.gold,
                                        config.samples_per_prompt, rng, meta.max_len);
  out << "wins=" << report.wins << " ties=" << report.ties << " total=" << report.total
      << " win_rate=" << format_double(report.win_rate) << "\n";
  return exit_code::kOk;
}

int exit_code_for_current_exception(std::ostream& err) {
  try {
    throw;
  } catch (const InvalidInputError& e) {
    err << "error: " << e.what() << "\n";
    return is_usage_message(e.what()) ? exit_code::kUsage : exit_code::kValidation;
  } catch (const DegenerateFitError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::kNumeric;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::kNumeric;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::kIo;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::kIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::kValidation;
  }
}

}  // namespace prefopt::cli
