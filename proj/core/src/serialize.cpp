// SPDX-License-Identifier: Apache-2.0
#include "prefopt/serialize.hpp"

#include <array>
#include <charconv>
#include <cstring>
#include <fstream>

#include "prefopt/errors.hpp"

namespace prefopt {

namespace {

constexpr std::array<char, 4> kMagic = {'P', 'F', 'P', 'R'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_raw(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in, const char* what) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw ParseError(std::string("truncated while reading ") + what, 0);
  return value;
}

}  // namespace

std::string format_double(double value) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) throw NumericError("cannot format double");
  return std::string(buf.data(), ptr);
}

std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

void save_params(const std::filesystem::path& path, const PolicyParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + path.string());
  out.write(kMagic.data(), kMagic.size());
  write_raw(out, kVersion);
  write_raw(out, static_cast<std::uint8_t>(params.kind));
  write_raw(out, static_cast<std::uint32_t>(params.vocab_size));
  write_raw(out, static_cast<std::uint32_t>(params.class_count));
  write_raw(out, static_cast<std::uint32_t>(params.hidden));
  write_raw(out, static_cast<std::uint64_t>(params.values.size()));
  out.write(reinterpret_cast<const char*>(params.values.data()),
            static_cast<std::streamsize>(params.values.size() * sizeof(double)));
  const std::uint64_t checksum =
      fnv1a64(params.values.data(), params.values.size() * sizeof(double));
  write_raw(out, checksum);
  if (!out) throw IoError("write failed: " + path.string());
}

PolicyParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for read: " + path.string());
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw ParseError("bad parameter file magic", 0);
  if (read_raw<std::uint32_t>(in, "version") != kVersion)
    throw ParseError("unsupported parameter file version", 0);

  PolicyParams params;
  const auto kind = read_raw<std::uint8_t>(in, "model kind");
  if (kind > 1) throw ParseError("unknown model kind", 0);
  params.kind = static_cast<ModelKind>(kind);
  params.vocab_size = static_cast<int>(read_raw<std::uint32_t>(in, "vocab_size"));
  params.class_count = static_cast<int>(read_raw<std::uint32_t>(in, "class_count"));
  params.hidden = static_cast<int>(read_raw<std::uint32_t>(in, "hidden"));
  if (params.vocab_size < 1 || params.class_count < 1 ||
      (params.kind == ModelKind::Mlp && params.hidden < 1))
    throw ParseError("parameter file has non-positive shape fields", 0);
  const auto count = read_raw<std::uint64_t>(in, "parameter count");
  if (count != params.expected_size()) throw ParseError("parameter count mismatch with shape", 0);

  params.values.resize(count);
  in.read(reinterpret_cast<char*>(params.values.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw ParseError("truncated parameter payload", 0);
  const auto checksum = read_raw<std::uint64_t>(in, "checksum");
  if (checksum != fnv1a64(params.values.data(), params.values.size() * sizeof(double)))
    throw ParseError("parameter checksum mismatch", 0);
  return params;
}

}  // namespace prefopt
