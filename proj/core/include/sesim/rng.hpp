#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

namespace sesim {

/// Deterministic random stream around mt19937_64. Every stochastic component
/// (data generation, label split, each network's init, batching, each dropout
/// site, ...) owns a separate stream derived from the run seed, so consuming
/// randomness in one place never shifts the draws seen by another. That is
/// what makes e.g. a supervised-only run and a full run see the exact same
/// sequence of batches.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(seed) {}

  double uniform() { return unit_(gen_); }      // [0, 1)
  double gaussian() { return normal_(gen_); }   // standard normal

  /// Uniform integer in [0, n). n must be positive.
  int uniform_int(int n) {
    return int(std::uniform_int_distribution<std::uint64_t>(0, std::uint64_t(n) - 1)(gen_));
  }

  /// k distinct values from [0, n), in draw order (partial Fisher-Yates).
  std::vector<int> sample_without_replacement(int n, int k) {
    std::vector<int> pool(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) pool[std::size_t(i)] = i;
    std::vector<int> out;
    out.reserve(std::size_t(k));
    for (int i = 0; i < k; ++i) {
      const int j = i + uniform_int(n - i);
      std::swap(pool[std::size_t(i)], pool[std::size_t(j)]);
      out.push_back(pool[std::size_t(i)]);
    }
    return out;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    std::shuffle(v.begin(), v.end(), gen_);
  }

 private:
  std::mt19937_64 gen_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// splitmix64 mix of (base, stream): cheap, well-scrambled substream seeds.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Named substream ids. Keep these stable: they are part of what makes a run
// reproducible from its config.
namespace streams {
inline constexpr std::uint64_t kDataset = 0x01;
inline constexpr std::uint64_t kSplit = 0x02;
inline constexpr std::uint64_t kTestData = 0x03;
inline constexpr std::uint64_t kInitFeature = 0x04;
inline constexpr std::uint64_t kInitSimilarity = 0x05;
inline constexpr std::uint64_t kBatch = 0x06;
inline constexpr std::uint64_t kFeatureDropout = 0x07;
inline constexpr std::uint64_t kSimilarityDropout = 0x08;
inline constexpr std::uint64_t kShadowDropout = 0x09;
inline constexpr std::uint64_t kTrain = 0x0a;
inline constexpr std::uint64_t kEval = 0x0b;
}  // namespace streams

}  // namespace sesim
