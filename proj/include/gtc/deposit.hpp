#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gtc/fields.hpp"
#include "gtc/particles.hpp"
#include "gtc/transport.hpp"

namespace gtc {

struct DepositStats {
  double deposited = 0.0;       // Σ w/4 over kept gyro-points
  double dropped_weight = 0.0;  // Σ w/4 over gyro-points beyond the ghost window
  std::uint64_t dropped_points = 0;
  std::uint64_t clamped_points = 0;

  DepositStats& operator+=(const DepositStats& o);
};

/// Per-worker private charge grids, reused across steps.
struct DepositScratch {
  std::vector<std::vector<double>> replicas;
};

/// Four-point gyro-averaged scatter of δf weights onto the rank-local
/// grid. Worker w deposits particles [w·n/W, (w+1)·n/W) into its own
/// replica; replicas are summed in worker order, so the result depends
/// only on the worker count, never on thread scheduling.
DepositStats deposit_charge(const ParticleStore& store, const TorusGrid& grid, const RankDomain& dom,
                            GridScalar& charge, int workers, DepositScratch& scratch);

/// Unique grid locations touched by particle `i` (between 8 and 32).
int stencil_footprint(const ParticleStore& store, std::size_t i, const TorusGrid& grid);

/// Ghost reduction after deposition across all ranks: radial ghost rings
/// to owners, duplicated plane to the right toroidal neighbour, then the
/// sum over particle replicas. Each rank ends with complete charge on its
/// owned rings and owned planes.
void merge_charge(Fabric& fabric, const TorusGrid& grid, const std::vector<RankTopology>& topo,
                  std::span<GridScalar* const> charge);

/// Σ over owned rings and owned planes.
double owned_sum(const TorusGrid& grid, const GridScalar& f);

/// Expected markers per node under uniform physical density: N_plane ·
/// V(i,j) / ΣV with V = J·r·Δr·Δθ (half Δr on the boundary rings).
/// Indexed by global flat point.
std::vector<double> marker_density(const TorusGrid& grid, double markers_per_plane);

/// Node volume fractions V(i,j)/ΣV over one plane.
std::vector<double> node_volume_fraction(const TorusGrid& grid);

/// Converts merged charge to δn/n0 on owned rings and owned planes.
void charge_to_density(const TorusGrid& grid, std::span<const double> markers, const GridScalar& charge,
                       GridScalar& density);

/// Per-ring mean over nodes and all planes, reduced over the radial and
/// toroidal communicators; replicated per rank.
std::vector<std::vector<double>> flux_surface_average(Fabric& fabric, const TorusGrid& grid,
                                                      const std::vector<RankTopology>& topo,
                                                      std::span<const GridScalar* const> fields);

/// Subtracts the ring profile from owned rings and planes.
void remove_zonal(const TorusGrid& grid, std::span<const double> profile, GridScalar& f);

}  // namespace gtc
