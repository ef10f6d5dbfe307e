#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gtc/fields.hpp"
#include "gtc/particles.hpp"
#include "gtc/push.hpp"

namespace gtc {

enum class Kernel : int { Charge, Poisson, Field, Smooth, Push, Shift, Sort };
inline constexpr int kNumKernels = 7;

std::string_view kernel_name(Kernel k);
/// Throws std::invalid_argument for names outside the kernel set.
Kernel parse_kernel(std::string_view name);

struct TimingRow {
  int step;
  Kernel kernel;
  int rank;
  double seconds;

  bool operator==(const TimingRow&) const = default;
};

class KernelTimings {
 public:
  /// Rejects negative or non-finite durations.
  void record(Kernel kernel, int rank, int step, double seconds);

  const std::vector<TimingRow>& rows() const { return rows_; }
  std::array<double, kNumKernels> totals() const;

  std::string to_csv() const;
  static KernelTimings from_csv(std::string_view text);

 private:
  std::vector<TimingRow> rows_;
};

struct HistoryRow {
  int step = 0;
  double time = 0.0;
  double field_energy = 0.0;
  double chi_gb = 0.0;
  double total_weight = 0.0;
  std::uint64_t particle_count = 0;
};

inline constexpr std::string_view kHistoryHeader = "step,time,field_energy,chi_gb,total_weight,particle_count";
inline constexpr std::string_view kTimingHeader = "step,kernel,rank,seconds";

std::string format_history_row(const HistoryRow& row);
std::string history_csv(std::span<const HistoryRow> rows);
std::vector<HistoryRow> parse_history_csv(std::string_view text);

/// Radial window of the heat-flux estimator, units of a.
inline constexpr double kChiAnnulusLo = 0.4;
inline constexpr double kChiAnnulusHi = 0.6;

/// Per-rank partial sums of the heat-flux estimator.
struct ChiSums {
  double flux = 0.0;  // Σ w·E_kin·vE_r over the annulus
  double norm = 0.0;  // Σ |w| over the annulus
};

/// `efield` holds the gathered field, 3 values per particle.
ChiSums chi_partial(const ParticleStore& store, const TorusGrid& grid, std::span<const double> efield);

/// Same sums, gathering E only for particles inside the annulus.
ChiSums chi_partial(const ParticleStore& store, const TorusGrid& grid, const RankDomain& dom, const GridVector& e);

/// χ in gyro-Bohm units from globally reduced sums; 0 when the norm is 0.
double chi_from_sums(const TorusGrid& grid, const Physics& phys, const ChiSums& sums);

/// Σ over owned rings and planes of V·½(E_r² + E_θ²) with V the node
/// volume fraction; the global sum divided by ntoroidal is the field energy.
double field_energy_partial(const TorusGrid& grid, std::span<const double> volume, const GridVector& e);

/// Linear-phase fit of ln(field_energy) against step. The linear phase is
/// the steepest window of at least `min_window` steps with R² ≥ `min_r2`.
/// Saturation is the first window of `min_window` steps starting at or
/// after the phase end whose slope is below 0.1·rate. The trailing rate is
/// the slope over the final `min_window` steps, reported only.
struct GrowthAnalysis {
  bool found = false;
  int first_step = 0;
  int last_step = 0;
  double rate = 0.0;  // per step
  double r2 = 0.0;
  bool saturated = false;
  int saturation_step = -1;  // start of the first slow window
  double saturation_rate = 0.0;
  double trailing_rate = 0.0;
};

GrowthAnalysis analyze_growth(std::span<const HistoryRow> rows, int min_window = 200, double min_r2 = 0.98);

void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

}  // namespace gtc
