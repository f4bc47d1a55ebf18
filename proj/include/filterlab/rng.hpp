#pragma once

#include <cstddef>
#include <cstdint>

namespace filterlab {

// 64-bit finalizer with full avalanche (SplitMix64 step).
std::uint64_t mix64(std::uint64_t x);

// Derives an independent child key from a parent key and a path word.
std::uint64_t derive_key(std::uint64_t parent, std::uint64_t word);

// Counter-based random stream. The n-th output depends only on (key, n),
// so streams can be split per sample / trial / purpose and the result never
// depends on which thread produced it.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : key_(key) {}

  RngStream child(std::uint64_t word) const {
    return RngStream(derive_key(key_, word));
  }

  std::uint64_t next_u64() {
    return mix64(key_ + counter_++ * 0x9E3779B97F4A7C15ULL);
  }

  // Uniform on [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double next_gaussian();
  void fill_gaussian(double* dst, std::size_t n);

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace filterlab
