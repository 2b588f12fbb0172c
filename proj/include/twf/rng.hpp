#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace twf {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// FNV-1a; labels are short compile-time strings.
constexpr std::uint64_t hash_label(std::string_view label) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace detail

/// Deterministic random stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The distributions below are written out by hand because the
/// std:: distribution objects are implementation-defined, and results must
/// be reproducible from the seed alone.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(detail::splitmix64(seed)) {}

  /// Independent sub-stream keyed by a fixed label.
  static Rng stream(std::uint64_t master_seed, std::string_view label) {
    return Rng(detail::splitmix64(master_seed ^ detail::hash_label(label)));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform double in (0, 1].
  double uniform_pos() { return 1.0 - uniform(); }

  /// Uniform integer in [0, bound). Lemire's nearly-divisionless method.
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("Rng::below: bound must be positive");
    unsigned __int128 m = static_cast<unsigned __int128>(engine_()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(engine_()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  std::size_t index(std::size_t size) { return static_cast<std::size_t>(below(size)); }

  /// Poisson(lambda): sequential inversion below 30, PTRS (Hormann 1993) above.
  std::int64_t poisson(double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
      throw std::invalid_argument("Rng::poisson: lambda must be finite and non-negative");
    }
    if (lambda == 0.0) return 0;
    if (lambda < 30.0) return poisson_inversion(lambda);
    return poisson_ptrs(lambda);
  }

  /// Failures before the first success, P(k) = (1 - mu) mu^k for k >= 0.
  std::int64_t geometric(double mu) {
    if (!(mu > 0.0 && mu < 1.0)) {
      throw std::invalid_argument("Rng::geometric: mu must lie in (0,1)");
    }
    const double u = uniform_pos();
    return static_cast<std::int64_t>(std::floor(std::log(u) / std::log(mu)));
  }

  /// Fisher-Yates shuffle.
  template <class T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[index(i)]);
    }
  }

  /// k distinct indices from [0, n), in sampling order (partial Fisher-Yates).
  /// `scratch` is reused between calls to avoid reallocation.
  void sample_without_replacement(std::size_t n, std::size_t k, std::vector<std::size_t>& scratch,
                                  std::vector<std::size_t>& out) {
    if (k > n) throw std::invalid_argument("Rng::sample_without_replacement: k > n");
    out.clear();
    if (k == n) {
      // Every index is chosen; consume no randomness.
      for (std::size_t i = 0; i < n; ++i) out.push_back(i);
      return;
    }
    if (scratch.size() != n) {
      scratch.resize(n);
      for (std::size_t i = 0; i < n; ++i) scratch[i] = i;
    }
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + index(n - i);
      std::swap(scratch[i], scratch[j]);
      out.push_back(scratch[i]);
    }
  }

 private:
  std::int64_t poisson_inversion(double lambda) {
    const double limit = std::exp(-lambda);
    double prob = limit;
    double cumulative = limit;
    const double u = uniform();
    std::int64_t k = 0;
    while (u >= cumulative) {
      ++k;
      prob *= lambda / static_cast<double>(k);
      cumulative += prob;
      if (prob < 1e-300 && cumulative >= 1.0 - 1e-15) break;
    }
    return k;
  }

  std::int64_t poisson_ptrs(double lambda) {
    const double slam = std::sqrt(lambda);
    const double loglam = std::log(lambda);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
      const double u = uniform() - 0.5;
      const double v = uniform();
      const double us = 0.5 - std::fabs(u);
      const double k = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
      if (us >= 0.07 && v <= vr) return static_cast<std::int64_t>(k);
      if (k < 0.0 || (us < 0.013 && v > us)) continue;
      if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
          -lambda + k * loglam - std::lgamma(k + 1.0)) {
        return static_cast<std::int64_t>(k);
      }
    }
  }

  std::mt19937_64 engine_;
};

}  // namespace twf
