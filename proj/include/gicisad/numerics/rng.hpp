#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace gicisad {

/// Counter-based, splittable random stream.
///
/// Output i is a keyed hash of the counter i, so a stream is fully described
/// by (key, position). split(label) derives a child key from the parent key
/// and the label only; children never depend on how far the parent has
/// advanced, which keeps parallel consumers reproducible.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t seed = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  /// Independent child stream for `label`.
  RngStream split(std::uint64_t label) const;

  double uniform();  // [0, 1)
  /// Uniform integer in [0, n).
  std::size_t uniform_index(std::size_t n);
  double normal();
  std::vector<double> normal_vector(std::size_t n);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t lineage() const noexcept { return key_; }
  std::uint64_t position() const noexcept { return counter_; }

 private:
  RngStream(std::uint64_t seed, std::uint64_t key) : seed_(seed), key_(key) {}

  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace gicisad
