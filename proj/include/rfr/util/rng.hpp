#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace rfr {

// splitmix64 finalizer. Used to derive independent seed streams from a master
// seed plus structural tags (tree index, worker index, system index, ...) so
// results never depend on scheduling or evaluation order.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return mix64(seed ^ mix64(tag));
}

template <class... Tags>
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, Tags... rest) {
  return derive_seed(derive_seed(seed, tag), rest...);
}

// Seed-tag namespaces, so streams for different purposes never collide even
// when their remaining tags coincide.
namespace seed_tag {
inline constexpr std::uint64_t tree = 0x01;
inline constexpr std::uint64_t bootstrap = 0x02;
inline constexpr std::uint64_t system = 0x03;
inline constexpr std::uint64_t shard = 0x04;
inline constexpr std::uint64_t permutation = 0x05;
inline constexpr std::uint64_t fold = 0x06;
inline constexpr std::uint64_t cv_iteration = 0x07;
}  // namespace seed_tag

// mt19937_64 output is specified by the standard, and the transforms below
// avoid std::*_distribution (whose algorithms differ across standard
// libraries), so two conforming platforms produce bit-identical streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // uniform on [0,1) with 53 random bits
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n); Lemire multiply-shift with rejection
  std::uint64_t below(std::uint64_t n) {
    using u128 = unsigned __int128;
    u128 m = static_cast<u128>(gen_()) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      const std::uint64_t t = (-n) % n;
      while (lo < t) {
        m = static_cast<u128>(gen_()) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  // standard normal via Box-Muller; the second value of each pair is cached
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    while (u1 == 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.28318530717958647692 * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

  // m distinct values from {0,...,n-1}, returned sorted ascending
  std::vector<int> draw_subset(int n, int m) {
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    for (int i = 0; i < m; ++i) {
      std::swap(idx[i], idx[i + static_cast<int>(below(static_cast<std::uint64_t>(n - i)))]);
    }
    idx.resize(m);
    std::sort(idx.begin(), idx.end());
    return idx;
  }

 private:
  std::mt19937_64 gen_;
  double cached_ = 0;
  bool has_cached_ = false;
};

}  // namespace rfr
