#include "gicisad/numerics/rng.hpp"

#include "gicisad/errors.hpp"

namespace gicisad {

namespace {

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

}  // namespace

RngStream::RngStream(std::uint64_t seed) : seed_(seed), key_(mix64(seed ^ 0x6a09e667f3bcc908ULL)) {}

RngStream::result_type RngStream::operator()() {
  return mix64(key_ + kGolden * ++counter_);
}

RngStream RngStream::split(std::uint64_t label) const {
  return RngStream(seed_, mix64(key_ ^ mix64(label + 0x3c6ef372fe94f82bULL)));
}

double RngStream::uniform() {
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

std::size_t RngStream::uniform_index(std::size_t n) {
  if (n == 0) throw ContractViolation("uniform_index over an empty range");
  // Rejection keeps the draw exactly uniform.
  const std::uint64_t limit = max() - max() % n;
  std::uint64_t r;
  do {
    r = (*this)();
  } while (r >= limit);
  return static_cast<std::size_t>(r % n);
}

double RngStream::normal() { return normal_(*this); }

std::vector<double> RngStream::normal_vector(std::size_t n) {
  std::vector<double> out(n);
  for (double& v : out) v = normal();
  return out;
}

}  // namespace gicisad
