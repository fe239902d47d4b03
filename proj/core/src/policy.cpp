// SPDX-License-Identifier: Apache-2.0
#include "prefopt/policy.hpp"

#include <cmath>
#include <string>

#include "prefopt/errors.hpp"

namespace prefopt {

namespace {

void check_shape_args(int vocab_size, int class_count, int hidden) {
  if (vocab_size < 1) throw InvalidInputError("vocab_size must be >= 1");
  if (class_count < 1) throw InvalidInputError("class_count must be >= 1");
  if (hidden < 0) throw InvalidInputError("hidden must be >= 0");
}

void check_prompt(const PolicyParams& params, const Prompt& prompt) {
  if (prompt.class_id < 0 || prompt.class_id >= params.class_count)
    throw InvalidInputError("prompt class_id " + std::to_string(prompt.class_id) +
                            " out of range [0, " + std::to_string(params.class_count) + ")");
}

void check_tokens(const PolicyParams& params, const TokenSeq& y) {
  if (y.tokens.empty()) throw InvalidInputError("token sequence must be non-empty");
  for (int t : y.tokens)
    if (t < 0 || t >= params.vocab_size)
      throw InvalidInputError("token id " + std::to_string(t) + " out of range [0, " +
                              std::to_string(params.vocab_size) + ")");
}

// Raw logits for one (class, prev) slot; prev in [0, V].
std::vector<double> slot_logits(const PolicyParams& params, int cls, int prev) {
  const int v = params.vocab_size;
  std::vector<double> logits(static_cast<std::size_t>(v));
  if (params.kind == ModelKind::Bigram) {
    const std::size_t base = params.bigram_offset(cls, prev, 0);
    for (int i = 0; i < v; ++i) logits[static_cast<std::size_t>(i)] = params.values[base + i];
    return logits;
  }
  // Mlp forward: the one-hot (class, prev) input selects two W1 columns.
  const int h = params.hidden;
  const int in_dim = params.class_count + params.vocab_size + 1;
  const std::size_t w1 = 0;
  const std::size_t b1 = static_cast<std::size_t>(h) * in_dim;
  const std::size_t w2 = b1 + static_cast<std::size_t>(h);
  const std::size_t b2 = w2 + static_cast<std::size_t>(v) * h;
  std::vector<double> hid(static_cast<std::size_t>(h));
  for (int j = 0; j < h; ++j) {
    const std::size_t row = w1 + static_cast<std::size_t>(j) * in_dim;
    hid[static_cast<std::size_t>(j)] =
        std::tanh(params.values[row + cls] + params.values[row + params.class_count + prev] +
                  params.values[b1 + j]);
  }
  for (int i = 0; i < v; ++i) {
    double acc = params.values[b2 + i];
    const std::size_t row = w2 + static_cast<std::size_t>(i) * h;
    for (int j = 0; j < h; ++j) acc += params.values[row + j] * hid[static_cast<std::size_t>(j)];
    logits[static_cast<std::size_t>(i)] = acc;
  }
  return logits;
}

// log-softmax with max-subtraction.
std::vector<double> log_softmax(std::vector<double> logits) {
  double mx = logits[0];
  for (double l : logits) mx = std::max(mx, l);
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - mx);
  const double lse = mx + std::log(sum);
  for (double& l : logits) l -= lse;
  return logits;
}

struct MlpCache {
  std::vector<double> hidden;  // tanh activations
  std::vector<double> probs;
};

}  // namespace

PolicyParams PolicyParams::bigram(int vocab_size, int class_count) {
  check_shape_args(vocab_size, class_count, 0);
  PolicyParams p;
  p.kind = ModelKind::Bigram;
  p.vocab_size = vocab_size;
  p.class_count = class_count;
  p.hidden = 0;
  p.values.assign(p.expected_size(), 0.0);
  return p;
}

PolicyParams PolicyParams::mlp(int vocab_size, int class_count, int hidden) {
  check_shape_args(vocab_size, class_count, hidden);
  if (hidden < 1) throw InvalidInputError("mlp requires hidden >= 1");
  PolicyParams p;
  p.kind = ModelKind::Mlp;
  p.vocab_size = vocab_size;
  p.class_count = class_count;
  p.hidden = hidden;
  p.values.assign(p.expected_size(), 0.0);
  return p;
}

std::size_t PolicyParams::expected_size() const {
  const auto v = static_cast<std::size_t>(vocab_size);
  const auto c = static_cast<std::size_t>(class_count);
  if (kind == ModelKind::Bigram) return c * (v + 1) * v;
  const auto h = static_cast<std::size_t>(hidden);
  const std::size_t in_dim = c + v + 1;
  return h * in_dim + h + v * h + v;
}

std::size_t PolicyParams::bigram_offset(int cls, int prev, int tok) const {
  return (static_cast<std::size_t>(cls) * (vocab_size + 1) + static_cast<std::size_t>(prev)) *
             vocab_size +
         static_cast<std::size_t>(tok);
}

std::vector<double> token_log_probs(const PolicyParams& params, const Prompt& prompt, int prev) {
  check_prompt(params, prompt);
  if (prev < 0 || prev > params.vocab_size)
    throw InvalidInputError("prev token out of range [0, V]");
  auto lp = log_softmax(slot_logits(params, prompt.class_id, prev));
  for (double x : lp)
    if (!std::isfinite(x)) throw NumericError("non-finite log-probability row");
  return lp;
}

double seq_logprob(const PolicyParams& params, const Prompt& prompt, const TokenSeq& y,
                   bool normalize) {
  check_tokens(params, y);
  double total = 0.0;
  int prev = params.begin_index();
  for (int tok : y.tokens) {
    total += token_log_probs(params, prompt, prev)[static_cast<std::size_t>(tok)];
    prev = tok;
  }
  if (normalize) total /= static_cast<double>(y.tokens.size());
  if (!std::isfinite(total)) throw NumericError("non-finite sequence log-probability");
  return total;
}

Gradient grad_seq_logprob(const PolicyParams& params, const Prompt& prompt, const TokenSeq& y,
                          bool normalize) {
  check_tokens(params, y);
  check_prompt(params, prompt);
  Gradient grad = Gradient::zeros_like(params);
  const double scale = normalize ? 1.0 / static_cast<double>(y.tokens.size()) : 1.0;
  const int v = params.vocab_size;
  int prev = params.begin_index();

  if (params.kind == ModelKind::Bigram) {
    for (int tok : y.tokens) {
      const auto lp = token_log_probs(params, prompt, prev);
      const std::size_t base = params.bigram_offset(prompt.class_id, prev, 0);
      for (int i = 0; i < v; ++i) {
        const double p = std::exp(lp[static_cast<std::size_t>(i)]);
        grad.values[base + i] += scale * ((i == tok ? 1.0 : 0.0) - p);
      }
      prev = tok;
    }
    return grad;
  }

  const int h = params.hidden;
  const int cls = prompt.class_id;
  const int in_dim = params.class_count + v + 1;
  const std::size_t w1 = 0;
  const std::size_t b1 = static_cast<std::size_t>(h) * in_dim;
  const std::size_t w2 = b1 + static_cast<std::size_t>(h);
  const std::size_t b2 = w2 + static_cast<std::size_t>(v) * h;

  for (int tok : y.tokens) {
    const auto lp = token_log_probs(params, prompt, prev);
    MlpCache cache;
    cache.hidden.resize(static_cast<std::size_t>(h));
    for (int j = 0; j < h; ++j) {
      const std::size_t row = w1 + static_cast<std::size_t>(j) * in_dim;
      cache.hidden[static_cast<std::size_t>(j)] =
          std::tanh(params.values[row + cls] + params.values[row + params.class_count + prev] +
                    params.values[b1 + j]);
    }
    cache.probs.resize(static_cast<std::size_t>(v));
    for (int i = 0; i < v; ++i) cache.probs[static_cast<std::size_t>(i)] = std::exp(lp[i]);

    // d logp / d logits_i = one-hot - probs; backprop through W2, tanh, W1.
    std::vector<double> dz(static_cast<std::size_t>(h), 0.0);
    for (int i = 0; i < v; ++i) {
      const double du = scale * ((i == tok ? 1.0 : 0.0) - cache.probs[static_cast<std::size_t>(i)]);
      grad.values[b2 + i] += du;
      const std::size_t row = w2 + static_cast<std::size_t>(i) * h;
      for (int j = 0; j < h; ++j) {
        grad.values[row + j] += du * cache.hidden[static_cast<std::size_t>(j)];
        dz[static_cast<std::size_t>(j)] += du * params.values[row + j];
      }
    }
    for (int j = 0; j < h; ++j) {
      const double hj = cache.hidden[static_cast<std::size_t>(j)];
      const double d = dz[static_cast<std::size_t>(j)] * (1.0 - hj * hj);
      const std::size_t row = w1 + static_cast<std::size_t>(j) * in_dim;
      grad.values[row + cls] += d;
      grad.values[row + params.class_count + prev] += d;
      grad.values[b1 + j] += d;
    }
    prev = tok;
  }
  return grad;
}

TokenSeq sample(const PolicyParams& params, const Prompt& prompt, int max_len, RngStream& rng,
                int end_token) {
  if (max_len < 1) throw InvalidInputError("max_len must be >= 1");
  TokenSeq out;
  out.tokens.reserve(static_cast<std::size_t>(max_len));
  int prev = params.begin_index();
  for (int t = 0; t < max_len; ++t) {
    const auto lp = token_log_probs(params, prompt, prev);
    const double u = next_unit(rng);
    double cum = 0.0;
    int picked = params.vocab_size - 1;  // rounding guard
    for (int i = 0; i < params.vocab_size; ++i) {
      cum += std::exp(lp[static_cast<std::size_t>(i)]);
      if (u < cum) {
        picked = i;
        break;
      }
    }
    out.tokens.push_back(picked);
    if (picked == end_token) break;
    prev = picked;
  }
  return out;
}

PolicyParams fit_sft(const PolicyParams& params, const std::vector<PreferenceTriple>& dataset,
                     int epochs, double lr) {
  if (dataset.empty()) throw InvalidInputError("fit_sft: empty dataset");
  if (epochs < 0) throw InvalidInputError("fit_sft: epochs must be >= 0");
  PolicyParams current = params;
  const double inv_n = 1.0 / static_cast<double>(dataset.size());
  for (int e = 0; e < epochs; ++e) {
    if (lr == 0.0) break;
    Gradient mean = Gradient::zeros_like(current);
    for (const auto& triple : dataset) {
      const Gradient g = grad_seq_logprob(current, triple.prompt, triple.y_w, false);
      for (std::size_t i = 0; i < mean.values.size(); ++i) mean.values[i] += g.values[i] * inv_n;
    }
    for (std::size_t i = 0; i < current.values.size(); ++i)
      current.values[i] += lr * mean.values[i];
  }
  return current;
}

}  // namespace prefopt
