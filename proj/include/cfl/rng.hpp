#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <utility>

namespace cfl {

// What a stream is used for. Part of the stream key so that, e.g., the
// augmentation draws of silo 2 never depend on how many shuffles silo 1 did.
enum class StreamPurpose : std::uint32_t {
  split = 1,
  subsample,
  init,
  shuffle,
  augment,
  data_drop,
  class_drop,
  label_subset,
  synth,
  covdev,
  bench,
  gradcheck,
  misc,
};

struct StreamKey {
  std::uint32_t silo = 0;
  std::uint32_t round = 0;
  StreamPurpose purpose = StreamPurpose::misc;
};

/// Counter-based generator: draw i of a stream is a pure function of
/// (seed, key, i). Streams with different keys are independent SplitMix64
/// sequences started from well-mixed offsets.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, StreamKey key);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  // Standard normal (Box-Muller, polar-free form).
  double normal();
  // Uniform integer in [0, n), unbiased.
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t seed() const { return seed_; }
  StreamKey key() const { return key_; }
  std::uint64_t draws() const { return counter_; }

  // A fresh stream with the same seed and a different key.
  RngStream derive(StreamKey key) const { return RngStream(seed_, key); }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  StreamKey key_;
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace cfl
