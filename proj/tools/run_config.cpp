// SPDX-License-Identifier: Apache-2.0
#include "run_config.hpp"

#include <charconv>
#include <fstream>

#include "prefopt/errors.hpp"
#include "prefopt/losses.hpp"

namespace prefopt::cli {

namespace {

constexpr std::uint64_t kGoldSalt = 0x474f4c44ULL;  // "GOLD"

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw InvalidInputError("bad numeric value for " + key + ": '" + value + "'");
  }
}

int to_int(const std::string& key, const std::string& value) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || ptr != value.data() + value.size())
    throw InvalidInputError("bad integer value for " + key + ": '" + value + "'");
  return v;
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || ptr != value.data() + value.size())
    throw InvalidInputError("bad unsigned value for " + key + ": '" + value + "'");
  return v;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw InvalidInputError("bad boolean value for " + key + ": '" + value + "'");
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "seed") { seed = to_u64(key, value); return; }
  if (key == "out") { out = value; return; }

  if (key == "data.vocab_size") { vocab_size = to_int(key, value); return; }
  if (key == "data.class_count") { class_count = to_int(key, value); return; }
  if (key == "data.max_len") { max_len = to_int(key, value); return; }
  if (key == "data.count") { count = to_int(key, value); return; }
  if (key == "data.labeling") {
    if (!parse_labeling(value)) throw InvalidInputError("unknown labeling '" + value + "'");
    labeling = *parse_labeling(value);
    return;
  }
  if (key == "data.gold_scale") { gold_scale = to_double(key, value); return; }
  if (key == "data.length_penalty") { length_penalty = to_double(key, value); return; }
  if (key == "data.file") { dataset_file = value; return; }

  if (key == "train.model") {
    if (value != "bigram" && value != "mlp")
      throw InvalidInputError("unknown model '" + value + "'");
    model_name = value;
    return;
  }
  if (key == "train.hidden") { hidden = to_int(key, value); return; }
  if (key == "train.loss") {
    if (!parse_loss_kind(value)) throw InvalidInputError("unknown loss '" + value + "'");
    loss_name = value;
    return;
  }
  if (key == "train.gamma") { gamma = to_double(key, value); return; }
  if (key == "train.beta") { beta = to_double(key, value); return; }
  if (key == "train.lambda") { lambda = to_double(key, value); return; }
  if (key == "train.tau") { tau = to_double(key, value); return; }
  if (key == "train.alpha") { alpha = to_double(key, value); return; }
  if (key == "train.lr") { lr = to_double(key, value); return; }
  if (key == "train.epochs") { epochs = to_int(key, value); return; }
  if (key == "train.batch_size") { batch_size = to_int(key, value); return; }
  if (key == "train.warmup_frac") { warmup_frac = to_double(key, value); return; }
  if (key == "train.adam_beta1") { adam_beta1 = to_double(key, value); return; }
  if (key == "train.adam_beta2") { adam_beta2 = to_double(key, value); return; }
  if (key == "train.adam_eps") { adam_eps = to_double(key, value); return; }
  if (key == "train.eval_every") { eval_every = to_int(key, value); return; }
  if (key == "train.schedule") {
    if (value != "constant" && value != "linear")
      throw InvalidInputError("unknown schedule '" + value + "'");
    schedule_name = value;
    return;
  }
  if (key == "train.gamma_start") { gamma_start = to_double(key, value); return; }
  if (key == "train.gamma_end") { gamma_end = to_double(key, value); return; }
  if (key == "train.sft") { sft = to_bool(key, value); return; }
  if (key == "train.sft_epochs") { sft_epochs = to_int(key, value); return; }
  if (key == "train.sft_lr") { sft_lr = to_double(key, value); return; }

  if (key == "eval.samples_per_prompt") { samples_per_prompt = to_int(key, value); return; }

  throw InvalidInputError("unknown config key '" + key + "'");
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path.string());
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string text = trim(line);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos)
      throw ParseError("expected 'key = value' in config", line_no);
    set(trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
  }
}

std::filesystem::path RunConfig::dataset_path() const {
  if (!dataset_file.empty()) return dataset_file;
  return std::filesystem::path(out) / "dataset.jsonl";
}

DatasetMeta RunConfig::dataset_meta() const {
  if (!seed) throw InvalidInputError("seed is required");
  DatasetMeta meta;
  meta.vocab_size = vocab_size;
  meta.class_count = class_count;
  meta.max_len = max_len;
  meta.seed = *seed;
  meta.labeling = labeling;
  RngStream gold_rng = make_stream(*seed, kGoldSalt);
  meta.gold = GoldRewardSpec::random(vocab_size, class_count, gold_scale, length_penalty, gold_rng);
  return meta;
}

LossConfig RunConfig::loss_config() const {
  const auto kind = parse_loss_kind(loss_name);
  if (!kind) throw InvalidInputError("unknown loss '" + loss_name + "'");
  LossConfig config;
  config.kind = *kind;
  config.gamma = gamma;
  config.beta = beta;
  config.lambda = lambda;
  config.tau = tau;
  config.alpha = alpha;
  return config;
}

TrainConfig RunConfig::train_config() const {
  if (!seed) throw InvalidInputError("seed is required");
  TrainConfig config;
  config.loss = loss_config();
  config.lr = lr;
  config.epochs = epochs;
  config.batch_size = batch_size;
  config.seed = *seed;
  config.schedule.mode =
      schedule_name == "linear" ? ScheduleMode::Linear : ScheduleMode::Constant;
  config.schedule.gamma_start = gamma_start.value_or(gamma);
  config.schedule.gamma_end =
      gamma_end.value_or(config.schedule.mode == ScheduleMode::Constant
                             ? config.schedule.gamma_start
                             : gamma);
  config.warmup_frac = warmup_frac;
  config.adam_beta1 = adam_beta1;
  config.adam_beta2 = adam_beta2;
  config.adam_eps = adam_eps;
  config.eval_every = eval_every;
  return config;
}

std::vector<std::pair<std::string, std::string>> known_config_keys() {
  return {
      {"seed", "root seed (mandatory)"},
      {"out", "output directory"},
      {"data.vocab_size", "vocabulary size V"},
      {"data.class_count", "prompt class count C"},
      {"data.max_len", "max sampled response length"},
      {"data.count", "number of preference triples"},
      {"data.labeling", "bt_sample | argmax"},
      {"data.gold_scale", "stddev of gold transition weights"},
      {"data.length_penalty", "gold per-token length penalty"},
      {"data.file", "dataset file path (default <out>/dataset.jsonl)"},
      {"train.model", "policy architecture: bigram | mlp"},
      {"train.hidden", "mlp hidden width"},
      {"train.loss", "repo|repopp|simpo|dpo|slic|ipo|cpo|rdpo|repopp_dpo"},
      {"train.gamma", "target reward margin"},
      {"train.beta", "margin scale"},
      {"train.lambda", "SFT regularizer weight (slic/cpo)"},
      {"train.tau", "IPO temperature"},
      {"train.alpha", "length-penalty weight (rdpo)"},
      {"train.lr", "peak Adam learning rate"},
      {"train.epochs", "training epochs"},
      {"train.batch_size", "batch size"},
      {"train.warmup_frac", "linear warmup fraction of total steps"},
      {"train.adam_beta1", "Adam beta1"},
      {"train.adam_beta2", "Adam beta2"},
      {"train.adam_eps", "Adam epsilon"},
      {"train.eval_every", "extra dataset-margin eval period (0 = epoch ends)"},
      {"train.schedule", "gamma schedule: constant | linear"},
      {"train.gamma_start", "schedule start (default train.gamma)"},
      {"train.gamma_end", "schedule end (default train.gamma)"},
      {"train.sft", "fit the SFT init policy before training"},
      {"train.sft_epochs", "SFT full-batch epochs"},
      {"train.sft_lr", "SFT learning rate"},
      {"eval.samples_per_prompt", "win-rate samples per prompt"},
  };
}

}  // namespace prefopt::cli
