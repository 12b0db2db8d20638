#include "poseuq/random.hpp"

#include <cmath>

namespace poseuq {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n <= 1) return 0;
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

SeedHasher::SeedHasher(std::uint64_t master_seed) : state_(kFnvOffset) {
  add(master_seed);
}

void SeedHasher::mix_bytes(const unsigned char* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    state_ ^= data[i];
    state_ *= kFnvPrime;
  }
}

SeedHasher& SeedHasher::add(std::uint64_t value) {
  unsigned char bytes[9];
  bytes[0] = 'u';
  for (int i = 0; i < 8; ++i) bytes[i + 1] = static_cast<unsigned char>(value >> (8 * i));
  mix_bytes(bytes, sizeof bytes);
  return *this;
}

SeedHasher& SeedHasher::add(std::string_view value) {
  add(static_cast<std::uint64_t>(value.size()));
  mix_bytes(reinterpret_cast<const unsigned char*>(value.data()), value.size());
  return *this;
}

std::uint64_t SeedHasher::digest() const { return splitmix64(state_); }

Rng derive_rng(std::uint64_t master_seed, std::uint64_t sequence_id,
               std::uint64_t frame_index, std::string_view object_id,
               std::string_view estimator_id, std::string_view purpose) {
  SeedHasher h(master_seed);
  h.add(sequence_id).add(frame_index).add(object_id).add(estimator_id).add(purpose);
  return Rng(h.digest());
}

}  // namespace poseuq
