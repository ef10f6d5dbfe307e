#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "gtc/fields.hpp"
#include "gtc/particles.hpp"

namespace gtc {

/// Background profile and drive of the δf weight equation.
struct Physics {
  double rln = 2.2;  // R0/Ln
  double rlt = 6.9;  // R0/LT
  double tau = 1.0;
  bool drifts = true;     // magnetic drifts and the mirror-force coupling
  double weight_cap = 1.0; // |w| above this is counted, not altered
};

Physics physics_from(const RunParams& p);

/// Radial envelope of the gradient drive, 1 at r = 0.5a.
inline double gradient_profile(double r) {
  const double x = (r - 0.5) / 0.35;
  const double x2 = x * x;
  return std::exp(-(x2 * x2 * x2));
}

/// −∂ln f0/∂r for a Maxwellian with density and temperature scale lengths.
double kappa(const TorusGrid& grid, const Physics& phys, double r, double energy);

/// Velocities at the gyrocenter. Components are (r, θ, ζ) physical.
struct DriftTerms {
  std::array<double, 3> vE{};
  std::array<double, 3> vd{};  // curvature + ∇B
  double bstar_par = 0.0;      // (v∥/Ω)(b̂×∇B)/B · E
  std::array<double, 3> grad_b{};
};

DriftTerms drift_terms(const TorusGrid& grid, const Physics& phys, double r, double theta, double vpar, double mu,
                       const std::array<double, 3>& e);

struct PhaseRate {
  double r;
  double theta;
  double zeta;
  double vpar;
  double weight;
};

/// Time derivatives of the gyrocenter state in field E (E_ζ per radian,
/// along the field line).
PhaseRate phase_rate(const TorusGrid& grid, const Physics& phys, double r, double theta, double vpar, double mu,
                     double w, const std::array<double, 3>& e);
PhaseRate phase_rate(const TorusGrid& grid, const Physics& phys, const Equilibrium& eq, double r, double vpar,
                     double mu, double w, const std::array<double, 3>& e);

inline double kinetic_energy(const TorusGrid& grid, double r, double theta, double vpar, double mu) {
  return 0.5 * vpar * vpar + mu * equilibrium_at(grid.major_radius, r, theta).b;
}

/// Gyro-averaged E at particle i; `clamped` is set when a gyro-point fell
/// beyond the ghost window and was pulled onto its edge.
std::array<double, 3> gather_one(const ParticleStore& store, std::size_t i, const TorusGrid& grid,
                                 const RankDomain& dom, const GridVector& e, bool* clamped = nullptr);

/// Gathered field for every particle, 3 values per particle.
std::vector<double> gather(const ParticleStore& store, const TorusGrid& grid, const RankDomain& dom,
                           const GridVector& e, std::uint64_t* clamped = nullptr);

struct PushStats {
  std::uint64_t reflected = 0;
  std::uint64_t double_crossings = 0;
  std::uint64_t clamped_points = 0;
  std::uint64_t weight_over_cap = 0;

  PushStats& operator+=(const PushStats& o);
};

/// One RK2 stage. Stage 1 saves the state and moves to the midpoint with
/// derivatives at the start; stage 2 advances the saved state a full step
/// with the current (midpoint) derivatives. Radial boundaries reflect.
PushStats advance(ParticleStore& store, const TorusGrid& grid, const RankDomain& dom, const GridVector& e,
                  const Physics& phys, double dt, int stage, bool split_loops = false);

/// r → 2r_b − r at either boundary. Returns reflections applied; 2 means
/// the mirrored point crossed the opposite boundary and was clamped.
int reflect(double& r, double r_inner, double r_outer);

PushStats boundary(ParticleStore& store, const TorusGrid& grid);

/// Gyrocenter state for standalone orbit integration.
struct OrbitState {
  double r;
  double theta;
  double zeta;
  double vpar;
  double mu;
  double w;
};

/// RK2 in a prescribed uniform field (zero by default), same stages as advance.
OrbitState integrate_orbit(const TorusGrid& grid, const Physics& phys, OrbitState s, double dt, int steps,
                           const std::array<double, 3>& e = {0.0, 0.0, 0.0});

}  // namespace gtc
