// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include "prefopt/policy.hpp"
#include "prefopt/rng.hpp"

namespace prefopt::testutil {

inline PolicyParams random_bigram(int vocab, int classes, RngStream& rng, double scale = 0.6) {
  PolicyParams p = PolicyParams::bigram(vocab, classes);
  for (double& v : p.values) v = scale * next_gaussian(rng);
  return p;
}

inline PolicyParams random_mlp(int vocab, int classes, int hidden, RngStream& rng,
                               double scale = 0.25) {
  PolicyParams p = PolicyParams::mlp(vocab, classes, hidden);
  for (double& v : p.values) v = scale * next_gaussian(rng);
  return p;
}

inline TokenSeq random_seq(int vocab, int max_len, RngStream& rng) {
  TokenSeq y;
  const int len = 1 + next_index(rng, max_len);
  for (int i = 0; i < len; ++i) y.tokens.push_back(next_index(rng, vocab));
  return y;
}

/// Unique scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("prefopt_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace prefopt::testutil
