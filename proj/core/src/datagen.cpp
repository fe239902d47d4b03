// SPDX-License-Identifier: Apache-2.0
#include "prefopt/datagen.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "prefopt/errors.hpp"
#include "prefopt/numeric.hpp"

namespace prefopt {

namespace {

using nlohmann::json;

void check_gold_ids(const GoldRewardSpec& spec, const Prompt& prompt, const TokenSeq& y) {
  if (prompt.class_id < 0 || prompt.class_id >= spec.class_count)
    throw InvalidInputError("gold_reward: prompt class out of range");
  if (y.tokens.empty()) throw InvalidInputError("gold_reward: empty sequence");
  for (int t : y.tokens)
    if (t < 0 || t >= spec.vocab_size) throw InvalidInputError("gold_reward: token id out of range");
}

json meta_to_json(const DatasetMeta& meta) {
  return json{{"vocab_size", meta.vocab_size},
              {"class_count", meta.class_count},
              {"max_len", meta.max_len},
              {"seed", meta.seed},
              {"labeling", labeling_name(meta.labeling)},
              {"gold", json{{"length_penalty", meta.gold.length_penalty},
                            {"weights", meta.gold.weights}}}};
}

DatasetMeta meta_from_json(const json& j) {
  DatasetMeta meta;
  meta.vocab_size = j.at("vocab_size").get<int>();
  meta.class_count = j.at("class_count").get<int>();
  meta.max_len = j.at("max_len").get<int>();
  if (meta.vocab_size < 1 || meta.class_count < 1 || meta.max_len < 1)
    throw InvalidInputError("dataset header has non-positive shape fields");
  meta.seed = j.at("seed").get<std::uint64_t>();
  const auto labeling = parse_labeling(j.at("labeling").get<std::string>());
  if (!labeling) throw InvalidInputError("unknown labeling mode in dataset header");
  meta.labeling = *labeling;
  meta.gold.vocab_size = meta.vocab_size;
  meta.gold.class_count = meta.class_count;
  meta.gold.length_penalty = j.at("gold").at("length_penalty").get<double>();
  meta.gold.weights = j.at("gold").at("weights").get<std::vector<double>>();
  const std::size_t expect = static_cast<std::size_t>(meta.class_count) *
                             (meta.vocab_size + 1) * meta.vocab_size;
  if (meta.gold.weights.size() != expect)
    throw InvalidInputError("gold weight table has wrong shape");
  return meta;
}

void validate_seq(const DatasetMeta& meta, const std::vector<int>& tokens, long line,
                  const char* field) {
  if (tokens.empty())
    throw InvalidInputError("line " + std::to_string(line) + ": " + field + " is empty");
  for (int t : tokens)
    if (t < 0 || t >= meta.vocab_size)
      throw InvalidInputError("line " + std::to_string(line) + ": " + field + " token id " +
                              std::to_string(t) + " out of range [0, " +
                              std::to_string(meta.vocab_size) + ")");
}

}  // namespace

const char* labeling_name(Labeling labeling) {
  return labeling == Labeling::BtSample ? "bt_sample" : "argmax";
}

std::optional<Labeling> parse_labeling(std::string_view name) {
  if (name == "bt_sample") return Labeling::BtSample;
  if (name == "argmax") return Labeling::Argmax;
  return std::nullopt;
}

std::size_t GoldRewardSpec::offset(int cls, int prev, int tok) const {
  return (static_cast<std::size_t>(cls) * (vocab_size + 1) + static_cast<std::size_t>(prev)) *
             vocab_size +
         static_cast<std::size_t>(tok);
}

GoldRewardSpec GoldRewardSpec::random(int vocab_size, int class_count, double scale,
                                      double length_penalty, RngStream& rng) {
  if (vocab_size < 1 || class_count < 1) throw InvalidInputError("bad gold reward shape");
  GoldRewardSpec spec;
  spec.vocab_size = vocab_size;
  spec.class_count = class_count;
  spec.length_penalty = length_penalty;
  spec.weights.resize(static_cast<std::size_t>(class_count) * (vocab_size + 1) * vocab_size);
  for (double& w : spec.weights) w = scale * next_gaussian(rng);
  return spec;
}

double gold_reward(const GoldRewardSpec& spec, const Prompt& prompt, const TokenSeq& y) {
  check_gold_ids(spec, prompt, y);
  double total = 0.0;
  int prev = spec.vocab_size;  // begin marker
  for (int tok : y.tokens) {
    total += spec.weights[spec.offset(prompt.class_id, prev, tok)];
    prev = tok;
  }
  return total - spec.length_penalty * static_cast<double>(y.tokens.size());
}

bool bt_prefer(double r_a, double r_b, RngStream& rng) {
  if (!std::isfinite(r_a) || !std::isfinite(r_b))
    throw InvalidInputError("bt_prefer: non-finite reward");
  return next_unit(rng) < sigmoid(r_a - r_b);
}

std::vector<PreferenceTriple> make_dataset(const DatasetMeta& meta, int n,
                                           const PolicyParams& sampler, RngStream& rng) {
  if (n < 1) throw InvalidInputError("make_dataset: n must be >= 1");
  std::vector<PreferenceTriple> triples;
  triples.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Prompt prompt{next_index(rng, meta.class_count), std::nullopt};
    TokenSeq a = sample(sampler, prompt, meta.max_len, rng, kDatasetEndToken);
    TokenSeq b = sample(sampler, prompt, meta.max_len, rng, kDatasetEndToken);
    const double r_a = gold_reward(meta.gold, prompt, a);
    const double r_b = gold_reward(meta.gold, prompt, b);
    bool a_wins;
    if (meta.labeling == Labeling::Argmax) {
      a_wins = r_a >= r_b;  // ties toward the first sample
    } else {
      a_wins = bt_prefer(r_a, r_b, rng);
    }
    if (a_wins)
      triples.push_back(PreferenceTriple{prompt, std::move(a), std::move(b)});
    else
      triples.push_back(PreferenceTriple{prompt, std::move(b), std::move(a)});
  }
  return triples;
}

void save_dataset(const std::filesystem::path& path, const DatasetMeta& meta,
                  const std::vector<PreferenceTriple>& triples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + path.string());
  out << meta_to_json(meta).dump() << '\n';
  for (const auto& t : triples) {
    const json rec{{"prompt_class", t.prompt.class_id},
                   {"y_w", t.y_w.tokens},
                   {"y_l", t.y_l.tokens}};
    out << rec.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::pair<DatasetMeta, std::vector<PreferenceTriple>> load_dataset(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for read: " + path.string());
  std::string line;
  long line_no = 0;

  if (!std::getline(in, line)) throw ParseError("missing dataset header", 1);
  ++line_no;
  DatasetMeta meta;
  try {
    meta = meta_from_json(json::parse(line));
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad header: ") + e.what(), line_no);
  }

  std::vector<PreferenceTriple> triples;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad record: ") + e.what(), line_no);
    }
    PreferenceTriple t;
    try {
      t.prompt.class_id = rec.at("prompt_class").get<int>();
      t.y_w.tokens = rec.at("y_w").get<std::vector<int>>();
      t.y_l.tokens = rec.at("y_l").get<std::vector<int>>();
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad record: ") + e.what(), line_no);
    }
    if (t.prompt.class_id < 0 || t.prompt.class_id >= meta.class_count)
      throw InvalidInputError("line " + std::to_string(line_no) + ": prompt_class out of range");
    validate_seq(meta, t.y_w.tokens, line_no, "y_w");
    validate_seq(meta, t.y_l.tokens, line_no, "y_l");
    triples.push_back(std::move(t));
  }
  return {std::move(meta), std::move(triples)};
}

}  // namespace prefopt
