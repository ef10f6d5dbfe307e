#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "gtc/config.hpp"
#include "gtc/deposit.hpp"
#include "gtc/diagnostics.hpp"
#include "gtc/fieldsolve.hpp"
#include "gtc/push.hpp"
#include "gtc/transport.hpp"

namespace gtc {

/// Charge bookkeeping of one kernel cycle, global over ranks.
struct ChargeCheck {
  double grid_sum = 0.0;        // merged charge over owned nodes and planes
  double weight_sum = 0.0;      // Σ w over particles
  double dropped_weight = 0.0;  // Σ w/4 of dropped gyro-points
  std::uint64_t dropped_points = 0;
  std::uint64_t clamped_points = 0;
};

struct RunCounters {
  std::uint64_t dropped_points = 0;
  std::uint64_t deposit_clamped = 0;
  std::uint64_t gather_clamped = 0;
  std::uint64_t reflected = 0;
  std::uint64_t double_crossings = 0;
  std::uint64_t weight_over_cap = 0;
  std::uint64_t poisson_unconverged = 0;
  int poisson_max_iterations = 0;
  std::uint64_t toroidal_shift_bytes = 0;
  std::uint64_t radial_shift_bytes = 0;
  std::uint64_t toroidal_moved = 0;
  std::uint64_t radial_moved = 0;
};

/// All logical ranks of one run, stepped in bulk-synchronous phases. A
/// step is two kernel cycles (one per RK2 stage) of charge, smooth,
/// poisson, smooth, field, push and shift; binning runs at the start of
/// steps divisible by bin_every.
class Simulation {
 public:
  explicit Simulation(const RunParams& params);

  void step();
  void run(int nsteps);

  int current_step() const { return step_; }
  const RunParams& params() const { return params_; }
  const TorusGrid& grid() const { return grid_; }
  const std::vector<RankTopology>& topology() const { return topo_; }
  const std::vector<RankDomain>& domains() const { return doms_; }
  std::vector<ParticleStore>& stores() { return stores_; }
  const std::vector<ParticleStore>& stores() const { return stores_; }
  const std::vector<GridScalar>& charge() const { return charge_; }
  const std::vector<GridScalar>& potential() const { return phi_; }
  const std::vector<GridVector>& efield() const { return efield_; }
  Fabric& fabric() { return fabric_; }

  const std::vector<HistoryRow>& history() const { return history_; }
  const KernelTimings& timings() const { return timings_; }
  const std::vector<ChargeCheck>& charge_checks() const { return checks_; }
  const RunCounters& counters() const { return counters_; }

  /// Deposit, merge and normalize only (no solve); returns the check.
  ChargeCheck charge_phase();

  std::uint64_t global_particles() const;
  double global_weight() const;

 private:
  using Acc = std::vector<std::array<double, kNumKernels>>;

  void cycle(int stage, bool diagnose, Acc& acc);
  ChargeCheck charge_kernel(Acc& acc);
  void diagnose(Acc& acc);

  RunParams params_;
  TorusGrid grid_;
  std::vector<RadialWindow> windows_;
  std::vector<RankTopology> topo_;
  std::vector<RankDomain> doms_;
  Fabric fabric_;
  Physics phys_;
  GyroOperator op_;
  ZonalSolver zonal_;
  std::vector<double> volume_;
  std::vector<double> markers_;
  ShiftContext shift_ctx_;

  std::vector<ParticleStore> stores_;
  std::vector<GridScalar> charge_;
  std::vector<GridScalar> density_;
  std::vector<GridScalar> phi_;
  std::vector<GridVector> efield_;
  std::vector<DepositScratch> scratch_;
  std::vector<double> zonal_profile_;

  std::vector<HistoryRow> history_;
  KernelTimings timings_;
  std::vector<ChargeCheck> checks_;
  RunCounters counters_;
  int step_ = 0;
};

/// Runs `params.nsteps` steps and writes timing.csv and history.csv into
/// `out_dir`. Returns the process exit status; errors go to `err`.
int run_main(RunParams params, const std::vector<std::string>& overrides, const std::filesystem::path& out_dir,
             std::ostream& err);

/// One rung of the weak-scaling ladder.
struct RungReport {
  int rung = 0;
  RunParams params;
  bool ok = false;
  std::string error;
  std::array<double, kNumKernels> mean_seconds{};  // per step, averaged over ranks
  double particles_per_rank = 0.0;
  std::vector<int> points_per_radial_rank;
};

/// Ladder of rungs: mpsi, mthetamax and a/ρ doubled and radial ranks ×4
/// per rung, toroidal ranks fixed. Failed rungs are recorded and skipped.
std::vector<RungReport> weak_scaling(const RunParams& base, int rungs);

/// Rung parameters only, without running.
RunParams rung_params(const RunParams& base, int rung);

/// rung,kernel,mean_s,rel_to_first
std::string weak_scaling_csv(const std::vector<RungReport>& reports);

}  // namespace gtc
