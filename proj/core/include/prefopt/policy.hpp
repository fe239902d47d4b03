// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "prefopt/rng.hpp"

namespace prefopt {

/// A response: ordered token ids, each in [0, V). Never empty.
struct TokenSeq {
  std::vector<int> tokens;

  bool operator==(const TokenSeq&) const = default;
};

/// A conditioning context, modeled as a discrete class id in [0, C).
/// The optional token rendering exists only for file round-trips and is
/// ignored by every computation.
struct Prompt {
  int class_id = 0;
  std::optional<TokenSeq> tokens;
};

/// One training example: a prompt with a preferred and a dispreferred response.
struct PreferenceTriple {
  Prompt prompt;
  TokenSeq y_w;
  TokenSeq y_l;
};

enum class ModelKind { Bigram, Mlp };

/**
 * Parameters of a small conditional softmax sequence model.
 *
 * Two architectures share one flat 64-bit parameter block:
 *
 * - Bigram: a logits table of shape C x (V+1) x V indexed by
 *   (prompt class, previous token, next token). The previous-token axis has
 *   one extra slot, begin_index() == V, a distinguished begin-of-sequence
 *   marker so the first step needs no special case.
 *
 * - Mlp: a one-hot (class, previous token) encoding mapped through a tanh
 *   hidden layer of width H to V logits. Layout: W1 (H x (C+V+1), row-major),
 *   b1 (H), W2 (V x H, row-major), b2 (V).
 *
 * Next-token distributions are softmax(logits) with max-subtraction, so a
 * +50 logit spike still yields an exact log-probability near 0.
 */
struct PolicyParams {
  ModelKind kind = ModelKind::Bigram;
  int vocab_size = 0;   // V
  int class_count = 0;  // C
  int hidden = 0;       // H; Mlp only, 0 for Bigram
  std::vector<double> values;

  /// Zero-initialized (uniform next-token distribution) bigram table.
  static PolicyParams bigram(int vocab_size, int class_count);
  /// Zero-initialized MLP.
  static PolicyParams mlp(int vocab_size, int class_count, int hidden);

  int begin_index() const { return vocab_size; }
  std::size_t expected_size() const;

  // Bigram cell addressing; prev ranges over [0, V] with V = begin marker.
  std::size_t bigram_offset(int cls, int prev, int tok) const;
  double logit(int cls, int prev, int tok) const { return values[bigram_offset(cls, prev, tok)]; }
  double& logit(int cls, int prev, int tok) { return values[bigram_offset(cls, prev, tok)]; }

  bool operator==(const PolicyParams&) const = default;
};

/// Flat gradient block, same layout and length as its policy's values.
struct Gradient {
  std::vector<double> values;

  static Gradient zeros_like(const PolicyParams& params) {
    return Gradient{std::vector<double>(params.values.size(), 0.0)};
  }
};

/// Log-softmax row over the vocabulary for one (class, previous-token) slot.
/// prev may be begin_index(). Throws NumericError if the row is non-finite.
std::vector<double> token_log_probs(const PolicyParams& params, const Prompt& prompt, int prev);

/// log pi(y | prompt), summed over steps; divided by |y| when normalize.
/// Always <= 0 and finite. Invalid token ids raise InvalidInputError.
double seq_logprob(const PolicyParams& params, const Prompt& prompt, const TokenSeq& y,
                   bool normalize);

/// Exact analytic gradient of seq_logprob with respect to every parameter.
/// Per step the softmax derivative contributes (one-hot - probs); the whole
/// gradient is scaled by 1/|y| when normalize.
Gradient grad_seq_logprob(const PolicyParams& params, const Prompt& prompt, const TokenSeq& y,
                          bool normalize);

/// Sentinel: sampling stops only at max_len.
inline constexpr int kNoEndToken = -1;

/// Autoregressive categorical sampling. Emits up to max_len tokens; if
/// end_token is sampled it is kept as the final token (lengths count it).
/// Deterministic given the stream state.
TokenSeq sample(const PolicyParams& params, const Prompt& prompt, int max_len, RngStream& rng,
                int end_token = kNoEndToken);

/// Full-batch gradient ascent on the mean unnormalized log-likelihood of the
/// winning responses. Returns the updated copy; epochs = 0 or lr = 0 returns
/// the input bit-for-bit.
PolicyParams fit_sft(const PolicyParams& params, const std::vector<PreferenceTriple>& dataset,
                     int epochs, double lr);

}  // namespace prefopt
