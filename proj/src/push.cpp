#include "gtc/push.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace gtc {

Physics physics_from(const RunParams& p) {
  Physics ph;
  ph.rln = p.rln;
  ph.rlt = p.rlt;
  ph.tau = p.tau;
  return ph;
}

double kappa(const TorusGrid& grid, const Physics& phys, double r, double energy) {
  return gradient_profile(r) * (phys.rln + (energy - 1.5) * phys.rlt) / grid.major_radius;
}

DriftTerms drift_terms(const TorusGrid& grid, const Physics& phys, double r, double theta, double vpar, double mu,
                       const std::array<double, 3>& e) {
  const Equilibrium eq = equilibrium_at(grid.major_radius, r, theta);
  const double ar = grid.a_over_rho;
  DriftTerms d;
  d.grad_b = {eq.db_dr, eq.db_dtheta / r, 0.0};
  d.vE = {e[1] / (ar * eq.b), -e[0] / (ar * eq.b), 0.0};
  if (phys.drifts) {
    const double k = (vpar * vpar + mu * eq.b) / (ar * eq.b * eq.b);
    d.vd = {-k * eq.db_dtheta / r, k * eq.db_dr, 0.0};
    d.bstar_par = vpar / (ar * eq.b * eq.b) * (eq.db_dr * e[1] - eq.db_dtheta * e[0] / r);
  }
  return d;
}

PhaseRate phase_rate(const TorusGrid& grid, const Physics& phys, double r, double theta, double vpar, double mu,
                     double w, const std::array<double, 3>& e) {
  return phase_rate(grid, phys, equilibrium_at(grid.major_radius, r, theta), r, vpar, mu, w, e);
}

PhaseRate phase_rate(const TorusGrid& grid, const Physics& phys, const Equilibrium& eq, double r, double vpar,
                     double mu, double w, const std::array<double, 3>& e) {
  const double ar = grid.a_over_rho;
  const double q = grid.q(r);
  const double inv_ab = 1.0 / (ar * eq.b);
  const double ver = e[1] * inv_ab;
  const double vet = -e[0] * inv_ab;
  double vdr = 0.0;
  double vdt = 0.0;
  double mirror = 0.0;
  double bstar = 0.0;
  if (phys.drifts) {
    const double k = (vpar * vpar + mu * eq.b) * inv_ab / eq.b;
    vdr = -k * eq.db_dtheta / r;
    vdt = k * eq.db_dr;
    mirror = -mu * eq.db_dtheta / (q * eq.major);
    bstar = vpar * inv_ab / eq.b * (eq.db_dr * e[1] - eq.db_dtheta * e[0] / r);
  }
  const double epar = e[2] / eq.major;
  PhaseRate out;
  out.r = ver + vdr;
  out.theta = vpar / (q * eq.major) + (vet + vdt) / r;
  out.zeta = vpar / eq.major;
  out.vpar = mirror + epar + bstar;
  const double energy = 0.5 * vpar * vpar + mu * eq.b;
  const double drive = ver * kappa(grid, phys, r, energy) + vpar * epar + vdr * e[0] + vdt * e[1];
  out.weight = (1.0 - w) * drive;
  return out;
}

namespace {

std::array<double, 3> gather_at(const ParticleStore& store, std::size_t n, const TorusGrid& grid,
                                const RankDomain& dom, const GridVector& e, double b, bool& clamped) {
  const auto& win = e.window();
  const int planes = e.planes();
  const double r = store.r()[n];
  const double th = store.theta()[n];
  const double zeta = store.zeta()[n];
  const double rho = gyroradius(grid, store.mu()[n], b);
  std::array<CellStencil, 4> stencils;
  locate_gyro(grid, r, th, rho, zeta, stencils);
  std::array<double, 3> acc{0.0, 0.0, 0.0};
  for (int q = 0; q < 4; ++q) {
    CellStencil& s = stencils[q];
    if (!win.holds_ring(s.ring) || !win.holds_ring(s.ring + 1)) {
      clamped = true;
      const GyroPoint gp = gyro_points(r, th, rho)[q];
      s = locate(grid, std::clamp(gp.r, grid.radius[win.first_ghost], grid.radius[win.last_ghost]), gp.theta, zeta);
    }
    const int l0 = s.plane - dom.first_plane;
    if (l0 >= 0 && l0 + 1 < planes) {
      const double* lower = e.at(l0, 0);
      const double* upper = e.at(l0 + 1, 0);
      for (int k = 0; k < 8; ++k) {
        const double* v = (k < 4 ? lower : upper) + 3 * s.index[k];
        const double wk = 0.25 * s.weight[k];
        acc[0] += wk * v[0];
        acc[1] += wk * v[1];
        acc[2] += wk * v[2];
      }
      continue;
    }
    for (int p = 0; p < 2; ++p) {
      const int lp = l0 + p;
      for (int k = p * 4; k < p * 4 + 4; ++k) {
        if (s.weight[k] == 0.0) continue;
        if (lp < 0 || lp >= planes) {
          throw std::logic_error("gather: particle " + std::to_string(n) + " outside the local wedge");
        }
        const double* v = e.at(lp, s.index[k]);
        const double wk = 0.25 * s.weight[k];
        acc[0] += wk * v[0];
        acc[1] += wk * v[1];
        acc[2] += wk * v[2];
      }
    }
  }
  return acc;
}

double b_at(const ParticleStore& store, std::size_t n, const TorusGrid& grid) {
  return equilibrium_at(grid.major_radius, store.r()[n], store.theta()[n]).b;
}

struct StageArrays {
  double* r;
  double* theta;
  double* zeta;
  double* vpar;
  double* w;
  const double* mu;
  const double* r0;
  const double* theta0;
  const double* zeta0;
  const double* vpar0;
  const double* w0;
};

StageArrays stage_arrays(ParticleStore& s) {
  return {s.raw(Attr::R),      s.raw(Attr::Theta),  s.raw(Attr::Zeta),   s.raw(Attr::Vpar),
          s.raw(Attr::Weight), s.raw(Attr::Mu),     s.raw(Attr::R0),     s.raw(Attr::Theta0),
          s.raw(Attr::Zeta0),  s.raw(Attr::Vpar0),  s.raw(Attr::Weight0)};
}

// Applies one stage update for particle n from its rate; returns reflections.
int update_one(const StageArrays& a, std::size_t n, const TorusGrid& grid, const Physics& phys, double h,
               const Equilibrium& eq, const std::array<double, 3>& e) {
  const PhaseRate f = phase_rate(grid, phys, eq, a.r[n], a.vpar[n], a.mu[n], a.w[n], e);
  double r = a.r0[n] + h * f.r;
  const int refl = reflect(r, grid.r_inner, grid.r_outer);
  a.r[n] = r;
  a.theta[n] = wrap_angle(a.theta0[n] + h * f.theta);
  a.zeta[n] = wrap_angle(a.zeta0[n] + h * f.zeta);
  a.vpar[n] = a.vpar0[n] + h * f.vpar;
  a.w[n] = a.w0[n] + h * f.weight;
  return refl;
}

bool finite_state(const StageArrays& a, std::size_t n) {
  return std::isfinite(a.r[n]) && std::isfinite(a.theta[n]) && std::isfinite(a.zeta[n]) && std::isfinite(a.vpar[n]) &&
         std::isfinite(a.w[n]);
}

}  // namespace

std::array<double, 3> gather_one(const ParticleStore& store, std::size_t i, const TorusGrid& grid,
                                 const RankDomain& dom, const GridVector& e, bool* clamped) {
  bool c = false;
  const auto v = gather_at(store, i, grid, dom, e, b_at(store, i, grid), c);
  if (clamped) *clamped = c;
  return v;
}

std::vector<double> gather(const ParticleStore& store, const TorusGrid& grid, const RankDomain& dom,
                           const GridVector& e, std::uint64_t* clamped) {
  const long long n = static_cast<long long>(store.size());
  std::vector<double> out(3 * store.size());
  std::uint64_t count = 0;
#pragma omp parallel for reduction(+ : count) schedule(static)
  for (long long i = 0; i < n; ++i) {
    bool c = false;
    const auto v = gather_at(store, i, grid, dom, e, b_at(store, i, grid), c);
    out[3 * i] = v[0];
    out[3 * i + 1] = v[1];
    out[3 * i + 2] = v[2];
    count += c ? 1 : 0;
  }
  if (clamped) *clamped = count;
  return out;
}

PushStats& PushStats::operator+=(const PushStats& o) {
  reflected += o.reflected;
  double_crossings += o.double_crossings;
  clamped_points += o.clamped_points;
  weight_over_cap += o.weight_over_cap;
  return *this;
}

int reflect(double& r, double r_inner, double r_outer) {
  int n = 0;
  if (r > r_outer) {
    r = 2.0 * r_outer - r;
    ++n;
    if (r < r_inner) {
      r = r_inner;
      ++n;
    }
  } else if (r < r_inner) {
    r = 2.0 * r_inner - r;
    ++n;
    if (r > r_outer) {
      r = r_outer;
      ++n;
    }
  }
  return n;
}

PushStats boundary(ParticleStore& store, const TorusGrid& grid) {
  PushStats st;
  for (double& r : store.r()) {
    const int n = reflect(r, grid.r_inner, grid.r_outer);
    if (n > 0) ++st.reflected;
    if (n > 1) ++st.double_crossings;
  }
  return st;
}

PushStats advance(ParticleStore& store, const TorusGrid& grid, const RankDomain& dom, const GridVector& e,
                  const Physics& phys, double dt, int stage, bool split_loops) {
  if (stage != 1 && stage != 2) throw std::invalid_argument("advance: stage must be 1 or 2");
  if (stage == 1) store.save_stage();
  const double h = stage == 1 ? 0.5 * dt : dt;
  const long long n = static_cast<long long>(store.size());
  const StageArrays a = stage_arrays(store);
  std::atomic<long long> bad{-1};
  std::uint64_t reflected = 0;
  std::uint64_t doubles = 0;
  std::uint64_t clamped = 0;
  std::uint64_t over = 0;

  // flag bits: 1 reflected, 2 double crossing, 4 over cap
  auto finish = [&a, &bad, &phys](long long i, int refl) {
    if (!finite_state(a, i)) {
      long long expected = -1;
      bad.compare_exchange_strong(expected, i);
    }
    return (refl > 0 ? 1 : 0) | (refl > 1 ? 2 : 0) | (std::abs(a.w[i]) > phys.weight_cap ? 4 : 0);
  };
  auto tally = [](int f, std::uint64_t& r, std::uint64_t& d, std::uint64_t& o) {
    r += f & 1;
    d += (f >> 1) & 1;
    o += (f >> 2) & 1;
  };

  if (split_loops) {
    const std::vector<double> eg = gather(store, grid, dom, e, &clamped);
#pragma omp parallel for reduction(+ : reflected, doubles, over) schedule(static)
    for (long long i = 0; i < n; ++i) {
      const std::array<double, 3> ei{eg[3 * i], eg[3 * i + 1], eg[3 * i + 2]};
      const Equilibrium eq = equilibrium_at(grid.major_radius, a.r[i], a.theta[i]);
      tally(finish(i, update_one(a, i, grid, phys, h, eq, ei)), reflected, doubles, over);
    }
  } else {
#pragma omp parallel for reduction(+ : reflected, doubles, over, clamped) schedule(static)
    for (long long i = 0; i < n; ++i) {
      bool c = false;
      const Equilibrium eq = equilibrium_at(grid.major_radius, a.r[i], a.theta[i]);
      const auto ei = gather_at(store, i, grid, dom, e, eq.b, c);
      clamped += c ? 1 : 0;
      tally(finish(i, update_one(a, i, grid, phys, h, eq, ei)), reflected, doubles, over);
    }
  }
  if (bad.load() >= 0) {
    throw std::runtime_error("push: non-finite state at particle " + std::to_string(bad.load()));
  }
  PushStats st;
  st.reflected = reflected;
  st.double_crossings = doubles;
  st.clamped_points = clamped;
  st.weight_over_cap = over;
  return st;
}

OrbitState integrate_orbit(const TorusGrid& grid, const Physics& phys, OrbitState s, double dt, int steps,
                           const std::array<double, 3>& e) {
  for (int k = 0; k < steps; ++k) {
    const PhaseRate f0 = phase_rate(grid, phys, s.r, s.theta, s.vpar, s.mu, s.w, e);
    OrbitState mid = s;
    mid.r = s.r + 0.5 * dt * f0.r;
    reflect(mid.r, grid.r_inner, grid.r_outer);
    mid.theta = wrap_angle(s.theta + 0.5 * dt * f0.theta);
    mid.zeta = wrap_angle(s.zeta + 0.5 * dt * f0.zeta);
    mid.vpar = s.vpar + 0.5 * dt * f0.vpar;
    mid.w = s.w + 0.5 * dt * f0.weight;
    const PhaseRate f1 = phase_rate(grid, phys, mid.r, mid.theta, mid.vpar, mid.mu, mid.w, e);
    s.r += dt * f1.r;
    reflect(s.r, grid.r_inner, grid.r_outer);
    s.theta = wrap_angle(s.theta + dt * f1.theta);
    s.zeta = wrap_angle(s.zeta + dt * f1.zeta);
    s.vpar += dt * f1.vpar;
    s.w += dt * f1.weight;
  }
  return s;
}

}  // namespace gtc
