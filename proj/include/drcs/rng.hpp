#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace drcs {

/// Philox4x32-10 counter-based block cipher (Salmon et al., SC'11 parameters).
/// Stateless: the same (counter, key) always produces the same 128-bit block.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key) noexcept;
};

/// Standard-normal draws addressed by (seed, stream, path, step).
///
/// Counter layout: {block, step, path, stream}; key = 64-bit master seed.
/// Each block yields two normals through Box-Muller on two 53-bit uniforms,
/// so ensembles are reproducible regardless of which thread produces a path.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint32_t stream, std::uint32_t path) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream),
        path_(path) {}

  /// Fills `out` with independent N(0,1) draws belonging to `step`.
  void normals(std::uint32_t step, std::span<double> out) const noexcept;

  /// Uniform in [0, 1) for (step, index); used by subsampling.
  double uniform(std::uint32_t step, std::uint32_t index) const noexcept;

 private:
  Philox4x32::Key key_;
  std::uint32_t stream_;
  std::uint32_t path_;
};

/// Stream identifiers used by the simulators.
enum class StreamId : std::uint32_t {
  kNominal = 1,
  kTrue = 2,
  kSubsample = 3,
  kFixture = 4,
};

}  // namespace drcs
