#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "hashing.hpp"

namespace mvg::detail {

// Portable draws on top of mt19937_64; std distributions are avoided because
// their output differs between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return unit_interval(engine_()); }
  double symmetric() { return unit_interval_signed(engine_()); }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }
  bool chance(double p) { return uniform() < p; }
  template <typename T>
  const T& pick(const std::vector<T>& v) { return v[below(v.size())]; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace mvg::detail
