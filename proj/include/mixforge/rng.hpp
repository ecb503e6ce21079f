#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace mixforge {

/// SplitMix64 finalizer (Steele/Lea/Flood construction, constants by Vigna).
/// Pure integer mixing, so results are identical on every platform.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

/// Folds up to four words into one well-mixed 64-bit stream id.
constexpr std::uint64_t stream_key(std::uint64_t a, std::uint64_t b = 0,
                                   std::uint64_t c = 0, std::uint64_t d = 0) noexcept {
  std::uint64_t h = mix64(a + kGolden);
  h = mix64(h ^ (b + 0x8E9D5AAD80C1F9CFULL));
  h = mix64(h ^ (c + 0xC2B2AE3D27D4EB4FULL));
  h = mix64(h ^ (d + 0x165667B19E3779F9ULL));
  return h;
}

// Stream-id namespaces, so that index i of one purpose never aliases
// index i of another.
constexpr std::uint64_t kStreamBatch = 0x6261746368ULL;      // batch slots
constexpr std::uint64_t kStreamSynthetic = 0x73796e7468ULL;  // synthetic data
constexpr std::uint64_t kStreamInit = 0x696e6974ULL;         // model init
constexpr std::uint64_t kStreamSsl = 0x73736cULL;            // unlabeled views
constexpr std::uint64_t kStreamCorrupt = 0x636f7272ULL;      // corruption eval

/// Counter-free splittable random stream. The state is derived from
/// (seed, stream_id) alone, so any (seed, id) pair replays the exact same
/// draw sequence regardless of thread count or call order elsewhere.
///
/// All integer draws are exact; `draws()` counts raw 64-bit words consumed,
/// which per-transform draw ledgers are written against.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : state_(mix64(mix64(seed + kGolden) ^
                     (stream_id * kGolden + 0x632BE59BD9B4E019ULL))),
        seed_(seed),
        stream_id_(stream_id) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }
  std::uint64_t draws() const noexcept { return draws_; }

  std::uint64_t next_u64() noexcept {
    ++draws_;
    state_ += kGolden;
    return mix64(state_);
  }

  /// Uniform double in [0, 1) with 53 bits of precision.
  double next_double() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in (0, 1]; never returns zero (safe to take logs of).
  double next_double_open() noexcept {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept {
    return lo + (hi - lo) * next_double();
  }

  /// Uniform integer in [0, n). One draw; the scaling bias of ~n/2^64 is
  /// immaterial for the dataset sizes used here.
  std::int64_t uniform_int(std::int64_t n) noexcept {
    const auto x = static_cast<unsigned __int128>(next_u64());
    return static_cast<std::int64_t>((x * static_cast<unsigned __int128>(n)) >> 64);
  }

  /// Standard normal via the trigonometric Box-Muller form.
  /// Always consumes exactly two draws; no cached spare.
  double normal() noexcept {
    const double u1 = next_double_open();
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Gamma(shape, 1) via Marsaglia-Tsang squeeze; shape < 1 handled with the
  /// usual power boost. Variable draw count (rejection sampling).
  double gamma(double shape) noexcept {
    if (shape < 1.0) {
      const double u = next_double_open();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      const double x = normal();
      const double t = 1.0 + c * x;
      if (t <= 0.0) continue;
      const double v = t * t * t;
      const double u = next_double_open();
      const double x2 = x * x;
      if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
      if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  double beta(double a, double b) noexcept {
    const double ga = gamma(a);
    const double gb = gamma(b);
    const double s = ga + gb;
    if (s <= 0.0) return 0.5;  // both underflowed; split evenly
    return ga / s;
  }

  /// Symmetric Dirichlet(alpha) over `k` components.
  std::vector<double> dirichlet(double alpha, int k) {
    std::vector<double> w(static_cast<std::size_t>(k));
    double sum = 0.0;
    for (auto& x : w) {
      x = gamma(alpha);
      sum += x;
    }
    if (sum <= 0.0) {
      for (auto& x : w) x = 1.0 / static_cast<double>(k);
      return w;
    }
    for (auto& x : w) x /= sum;
    return w;
  }

 private:
  std::uint64_t state_;
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t draws_ = 0;
};

/// Derives the independent per-sample stream for (seed, sample_index).
inline RngStream derive_stream(std::uint64_t seed, std::uint64_t sample_index) {
  return RngStream(seed, sample_index);
}

}  // namespace mixforge
