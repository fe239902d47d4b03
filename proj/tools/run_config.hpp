// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "prefopt/datagen.hpp"
#include "prefopt/trainer.hpp"

namespace prefopt::cli {

/// Flat key-value run configuration with section prefixes (data.*, train.*,
/// eval.*). Every key can be set in a config file (`key = value`, `#`
/// comments) and overridden by a command-line flag of the same name.
struct RunConfig {
  std::optional<std::uint64_t> seed;  // mandatory for every command that runs
  std::string out = "out";

  // data.*
  int vocab_size = 12;
  int class_count = 4;
  int max_len = 8;
  int count = 2000;
  Labeling labeling = Labeling::BtSample;
  double gold_scale = 1.0;
  double length_penalty = 0.05;
  std::string dataset_file;  // empty -> <out>/dataset.jsonl

  // train.*
  std::string model_name = "bigram";  // bigram | mlp
  int hidden = 8;                     // mlp hidden width
  std::string loss_name = "repo";
  double gamma = 0.4;
  double beta = 10.0;
  double lambda = 0.1;
  double tau = 0.5;
  double alpha = 0.05;
  double lr = 0.1;
  int epochs = 1;
  int batch_size = 64;
  double warmup_frac = 0.1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int eval_every = 0;
  std::string schedule_name = "constant";
  std::optional<double> gamma_start;  // default: train.gamma
  std::optional<double> gamma_end;
  bool sft = true;
  int sft_epochs = 30;
  double sft_lr = 0.5;

  // eval.*
  int samples_per_prompt = 500;

  /// Applies one key. Throws InvalidInputError on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);

  /// Parses a config file and applies every key in order.
  void load_file(const std::filesystem::path& path);

  std::filesystem::path dataset_path() const;
  DatasetMeta dataset_meta() const;  // gold weights derived from seed
  LossConfig loss_config() const;
  TrainConfig train_config() const;
};

/// Known keys with one-line help, for flag registration.
std::vector<std::pair<std::string, std::string>> known_config_keys();

}  // namespace prefopt::cli
