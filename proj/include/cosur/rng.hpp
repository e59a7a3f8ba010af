#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace cosur {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// The key is the 64-bit seed; the 128-bit counter is split into a 64-bit
/// stream id (high half) and a 64-bit block index (low half), so independent
/// streams for e.g. per-class generation are obtained by changing the stream id
/// only. Output is a pure function of (seed, stream, position) and does not
/// depend on the platform's standard library.
class Philox {
 public:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  static constexpr int kRounds = 10;

  using Block = std::array<std::uint32_t, 4>;

  explicit Philox(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

  /// Raw block function: encrypt `counter` under `key`.
  static Block block(Block counter, std::array<std::uint32_t, 2> key) noexcept;

  std::uint32_t next_u32() noexcept;
  std::uint64_t next_u64() noexcept;

  /// Uniform double in the open interval (0, 1), 53-bit resolution.
  double uniform() noexcept;

  /// Standard normal via the inverse CDF of uniform().
  double normal() noexcept;

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept;

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t index_ = 0;
  Block buffer_{};
  int used_ = 4;
};

/// Inverse of the standard normal CDF for p in (0, 1).
double normal_quantile(double p) noexcept;

/// Seeded Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> permutation(std::size_t n, Philox& rng);

}  // namespace cosur
