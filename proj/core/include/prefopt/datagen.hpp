// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "prefopt/policy.hpp"
#include "prefopt/rng.hpp"

namespace prefopt {

/// Token 0 acts as end-of-sequence in generated datasets; emitted sequences
/// include it and it counts toward |y|.
inline constexpr int kDatasetEndToken = 0;

enum class Labeling { BtSample, Argmax };

const char* labeling_name(Labeling labeling);
std::optional<Labeling> parse_labeling(std::string_view name);

/// Latent gold reward: a transition-weight table of shape C x (V+1) x V
/// (same sufficient statistics a bigram policy can represent) minus a
/// per-token length penalty.
struct GoldRewardSpec {
  int vocab_size = 0;
  int class_count = 0;
  std::vector<double> weights;
  double length_penalty = 0.0;

  std::size_t offset(int cls, int prev, int tok) const;
  static GoldRewardSpec random(int vocab_size, int class_count, double scale,
                               double length_penalty, RngStream& rng);

  bool operator==(const GoldRewardSpec&) const = default;
};

struct DatasetMeta {
  int vocab_size = 0;
  int class_count = 0;
  int max_len = 0;
  std::uint64_t seed = 0;
  Labeling labeling = Labeling::BtSample;
  GoldRewardSpec gold;

  bool operator==(const DatasetMeta&) const = default;
};

/// Sum of transition weights along y (starting from the begin marker) minus
/// length_penalty * |y|.
double gold_reward(const GoldRewardSpec& spec, const Prompt& prompt, const TokenSeq& y);

/// True (a wins) with probability sigmoid(r_a - r_b).
bool bt_prefer(double r_a, double r_b, RngStream& rng);

/// Draws n triples: uniform prompt class, two responses sampled from the
/// sampler policy, ordered by Bradley-Terry draw on their gold rewards (or
/// by argmax when labeling = Argmax, ties toward the first sample).
std::vector<PreferenceTriple> make_dataset(const DatasetMeta& meta, int n,
                                           const PolicyParams& sampler, RngStream& rng);

/// Line-delimited file: a meta header line, then one triple per line with
/// fields prompt_class, y_w, y_l. Lossless round-trip.
void save_dataset(const std::filesystem::path& path, const DatasetMeta& meta,
                  const std::vector<PreferenceTriple>& triples);

/// Throws ParseError (with line number) on malformed records and
/// InvalidInputError on invariant violations (bad ids, empty responses).
std::pair<DatasetMeta, std::vector<PreferenceTriple>> load_dataset(
    const std::filesystem::path& path);

}  // namespace prefopt
