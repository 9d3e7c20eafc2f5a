#pragma once

#include <cstdint>
#include <random>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <boost/random/uniform_01.hpp>

namespace attnclust {

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// A splittable seed. Children derived with split(i) are independent of each
// other and of the parent, so workers can be handed disjoint streams without
// coordination.
class SeedStream {
 public:
  SeedStream() = default;
  explicit SeedStream(std::uint64_t seed) : key_(splitmix64(seed)) {}

  SeedStream split(std::uint64_t index) const {
    SeedStream child;
    child.key_ = splitmix64(key_ ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
    return child;
  }

  std::uint64_t key() const { return key_; }

  Engine engine() const { return Engine(key_); }

 private:
  std::uint64_t key_ = splitmix64(0);
};

// Boost's distributions are used instead of <random>'s because their output
// is fixed across standard library implementations (and the normal sampler is
// a ziggurat, which matters for the sampling-heavy oracles).
inline double standard_normal(Engine& eng) {
  boost::random::normal_distribution<double> dist(0.0, 1.0);
  return dist(eng);
}

inline int uniform_index(Engine& eng, int n) {
  boost::random::uniform_int_distribution<int> dist(0, n - 1);
  return dist(eng);
}

inline double uniform01(Engine& eng) {
  boost::random::uniform_01<double> dist;
  return dist(eng);
}

}  // namespace attnclust
