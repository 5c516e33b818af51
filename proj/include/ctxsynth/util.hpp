// Copyright 2026 The ctxsynth Authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared primitives: error types, the portable PRNG, digests and small
// file helpers used by every pipeline stage.

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ctxsynth {

/// Bad input, bad config, or a broken stage dependency. Maps to CLI exit 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An upstream digest does not match the artifact on disk.
class ProvenanceError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Backend unreachable, timed out, or answered with a failure. Maps to CLI exit 2.
class TransportError : public std::runtime_error {
 public:
  TransportError(const std::string& what, int attempts = 1)
      : std::runtime_error(what), attempts_(attempts) {}
  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// FNV-1a over the bytes of `s`.
constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Derives an independent stream seed from a parent seed and a label.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) noexcept {
  return mix64(seed ^ mix64(fnv1a64(label)));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view label,
                                    std::uint64_t index) noexcept {
  return mix64(derive_seed(seed, label) + mix64(index));
}

/// SplitMix64 stream. Output is identical on every platform and standard
/// library, unlike std::mt19937_64 combined with std distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform integer in [0, n). Lemire's nearly-divisionless rejection.
  std::uint64_t below(std::uint64_t n);

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Index drawn from a discrete distribution by inverse CDF.
  std::size_t categorical(const std::vector<double>& probs);

 private:
  std::uint64_t state_;
};

// Digests (OpenSSL-backed).
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);

std::string read_file(const std::filesystem::path& path);
/// Writes through a temporary and renames, so a crashed stage never leaves a
/// half-written artifact behind.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

/// Trimmed copy of `s` (ASCII whitespace).
std::string trim(std::string_view s);

/// Replaces '/' with '-' so class labels such as "F/A-18" become file names.
std::string sanitize_label(std::string_view label);

}  // namespace ctxsynth
