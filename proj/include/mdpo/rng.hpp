#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace mdpo {

// All randomness in the project flows from one root seed through named
// substreams, so that changing e.g. the eval instance count cannot perturb
// the rollout stream.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_name(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

// Derive a substream seed from (root, stream name, indices).
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view name) {
  return splitmix64(root ^ splitmix64(hash_name(name)));
}
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view name,
                                 std::uint64_t i) {
  return splitmix64(derive_seed(root, name) ^ splitmix64(i + 1));
}
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view name,
                                 std::uint64_t i, std::uint64_t j) {
  return splitmix64(derive_seed(root, name, i) ^ splitmix64(j + 0x9e37));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform() { return uni_(gen_); }
  double normal() { return norm_(gen_); }
  // Uniform integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(gen_);
  }

  // Sample an index from an (unnormalized is fine) non-negative weight row.
  int categorical(const std::vector<double>& probs) {
    double total = 0.0;
    for (double p : probs) total += p;
    double r = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (r < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
  std::uniform_real_distribution<double> uni_{0.0, 1.0};
  std::normal_distribution<double> norm_{0.0, 1.0};
};

}  // namespace mdpo
