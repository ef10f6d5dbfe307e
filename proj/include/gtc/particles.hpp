#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "gtc/geometry.hpp"

namespace gtc {

/// Per-particle attributes in canonical (wire and snapshot) order: the six
/// live phase-space attributes followed by their RK2 stage-0 copies.
enum class Attr : int { R, Theta, Zeta, Vpar, Mu, Weight, R0, Theta0, Zeta0, Vpar0, Mu0, Weight0 };

inline constexpr int kNumAttrs = 12;
inline constexpr int kLiveAttrs = 6;

std::string_view attr_name(Attr a);

/// Structure-of-arrays particle storage; every attribute array has the
/// same capacity, the first `size()` entries are live.
class ParticleStore {
 public:
  ParticleStore() = default;
  explicit ParticleStore(std::size_t capacity);

  std::size_t size() const { return count_; }
  std::size_t capacity() const { return capacity_; }
  void reserve(std::size_t capacity);
  void resize(std::size_t count);
  void clear() { count_ = 0; }

  std::span<double> attr(Attr a) { return {data_[static_cast<int>(a)].data(), count_}; }
  std::span<const double> attr(Attr a) const { return {data_[static_cast<int>(a)].data(), count_}; }
  double* raw(Attr a) { return data_[static_cast<int>(a)].data(); }
  const double* raw(Attr a) const { return data_[static_cast<int>(a)].data(); }

  std::span<double> r() { return attr(Attr::R); }
  std::span<double> theta() { return attr(Attr::Theta); }
  std::span<double> zeta() { return attr(Attr::Zeta); }
  std::span<double> vpar() { return attr(Attr::Vpar); }
  std::span<double> mu() { return attr(Attr::Mu); }
  std::span<double> weight() { return attr(Attr::Weight); }
  std::span<const double> r() const { return attr(Attr::R); }
  std::span<const double> theta() const { return attr(Attr::Theta); }
  std::span<const double> zeta() const { return attr(Attr::Zeta); }
  std::span<const double> vpar() const { return attr(Attr::Vpar); }
  std::span<const double> mu() const { return attr(Attr::Mu); }
  std::span<const double> weight() const { return attr(Attr::Weight); }

  /// Append one particle; saved attributes copy the live ones.
  void push_back(double r, double theta, double zeta, double vpar, double mu, double w);
  /// Append all twelve attributes of particle `i` of `other`.
  void append_from(const ParticleStore& other, std::size_t i);
  /// Overwrite slot `dst` with slot `src` (hole backfill).
  void move_slot(std::size_t src, std::size_t dst);
  void save_stage();

  std::array<double, kNumAttrs> row(std::size_t i) const;

  /// Bytes of particle storage for `n` particles.
  static constexpr std::size_t bytes_per_particle() { return kNumAttrs * sizeof(double); }

  bool operator==(const ParticleStore& o) const;

 private:
  std::array<std::vector<double>, kNumAttrs> data_;
  std::size_t count_ = 0;
  std::size_t capacity_ = 0;
};

/// Where one rank sits in the global decomposition.
struct RankDomain {
  int rank = 0;
  int toroidal_index = 0;
  int radial_index = 0;
  int replica = 0;
  int planes = 1;         // owned poloidal planes
  int first_plane = 0;    // global plane number of local plane 0
  double zeta_lo = 0.0;   // owned wedge [zeta_lo, zeta_hi)
  double zeta_hi = 0.0;
  RadialWindow window;
};

/// Deterministic per-rank seed derived from the run seed.
std::uint64_t rank_seed(std::uint64_t seed, int rank);

/// Particles this rank loads: owned grid points × planes × micell split
/// across particle replicas (remainder to the lowest replicas).
std::size_t load_count(const TorusGrid& grid, const RunParams& p, const RankDomain& dom);

/// Importance-sampled Maxwellian load with physical-space density ∝ r·J.
ParticleStore load(const TorusGrid& grid, const RunParams& p, const RankDomain& dom);

/// Stable counting sort by owned-ring bin; returns bin ids of the result.
std::vector<int> bin_radial(ParticleStore& store, const TorusGrid& grid, const RadialWindow& window);

int radial_bin(const TorusGrid& grid, const RadialWindow& window, double r);

struct GyroPoint {
  double r;
  double theta;
};

/// Thermal-units gyroradius ρ = √(2μB)/B scaled to a-units.
inline double gyroradius(const TorusGrid& grid, double mu, double b) {
  return std::sqrt(2.0 * mu * b) / b * grid.rho_thermal();
}

/// Four-point ring at gyro-phases 0, π/2, π, 3π/2: (r+ρ,θ), (r,θ+ρ/r),
/// (r−ρ,θ), (r,θ−ρ/r).
std::array<GyroPoint, 4> gyro_points(double r, double theta, double rho);
std::array<GyroPoint, 4> gyro_points(const ParticleStore& store, std::size_t i, const TorusGrid& grid);

/// Memory accounting for one toroidal domain, Table-2 style (binary units).
struct MemoryFootprint {
  double chargei_mib;
  double evector_mib;
  double particles_gib;
};
MemoryFootprint domain_footprint(const TorusGrid& grid, int micell);

/// Flat snapshot: u64 count, u32 attribute count, then per attribute a u32
/// name length and name bytes, then the attribute arrays in canonical
/// order as little-endian 8-byte reals.
std::vector<std::byte> snapshot(const ParticleStore& store);
ParticleStore read_snapshot(std::span<const std::byte> bytes);

}  // namespace gtc
