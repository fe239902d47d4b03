// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "prefopt/policy.hpp"

namespace prefopt {

/// Shortest round-trip decimal form of a double (to_chars).
std::string format_double(double value);

std::uint64_t fnv1a64(const void* data, std::size_t size);

/// Versioned binary parameter container: magic, version, model shape,
/// little-endian 64-bit payload, FNV-1a checksum. Exact round-trip.
void save_params(const std::filesystem::path& path, const PolicyParams& params);
PolicyParams load_params(const std::filesystem::path& path);

}  // namespace prefopt
