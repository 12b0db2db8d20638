#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace poseuq {

/// Seeded random stream. Draw conversions are written out here instead of
/// using <random> distributions so streams are identical across standard
/// library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n);
  // Standard normal via Box-Muller; caches the second variate.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// 64-bit hash of a tuple of fields; each field is length-delimited so
/// ("ab","c") and ("a","bc") differ.
class SeedHasher {
 public:
  explicit SeedHasher(std::uint64_t master_seed);
  SeedHasher& add(std::uint64_t value);
  SeedHasher& add(std::string_view value);
  std::uint64_t digest() const;

 private:
  void mix_bytes(const unsigned char* data, std::size_t n);
  std::uint64_t state_;
};

/// Independent stream for one (sequence, frame, object, estimator, purpose)
/// tuple. Identical tuples give identical streams regardless of the order in
/// which they are requested.
Rng derive_rng(std::uint64_t master_seed, std::uint64_t sequence_id,
               std::uint64_t frame_index, std::string_view object_id,
               std::string_view estimator_id, std::string_view purpose);

}  // namespace poseuq
