#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "gtc/config.hpp"
#include "gtc/fields.hpp"
#include "gtc/geometry.hpp"
#include "gtc/particles.hpp"
#include "gtc/simulation.hpp"

namespace gtc::test {

/// Seeded generator for hand-rolled property tests.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(eng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng_); }
  bool coin() { return integer(0, 1) == 1; }
  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

/// Toy machine: mpsi=16 grid with a gyroradius large enough to span rings.
inline RunParams toy_params() {
  RunParams p;
  p.mpsi = 16;
  p.mthetamax = 64;
  p.ntoroidal = 4;
  p.micell = 4;
  p.a_over_rho = 40.0;
  p.nsteps = 2;
  return p;
}

/// Scaled-down A preset used by the smoke and determinism runs.
inline RunParams smoke_params() {
  RunParams p = preset("A");
  p.mpsi = 16;
  p.mthetamax = 64;
  p.ntoroidal = 4;
  p.micell = 10;
  p.a_over_rho = 125.0 * 16.0 / 90.0;
  p.nsteps = 10;
  return p;
}

/// One rank holding the full grid and every plane.
inline RankDomain whole_domain(const TorusGrid& grid) {
  RankDomain d;
  d.planes = grid.ntoroidal;
  d.first_plane = 0;
  d.zeta_lo = 0.0;
  d.zeta_hi = kTwoPi;
  d.window = radial_partition(grid, 1)[0];
  return d;
}

/// Random particle with its gyro-ring inside the grid.
inline void push_random_particle(ParticleStore& s, const TorusGrid& g, Rng& rng, double w) {
  const double margin = 4.0 * g.rho_thermal() + 1e-3;
  const double r = rng.uniform(g.r_inner + margin, g.r_outer - margin);
  const double th = rng.uniform(0.0, kTwoPi);
  const double ze = rng.uniform(0.0, kTwoPi);
  const double vpar = rng.normal();
  const double mu = rng.uniform(0.0, 2.0);
  s.push_back(r, th, ze, vpar, mu, w);
}

/// Global owned values of a set of per-rank fields as [plane][mgrid]
/// (canonical nodes; closure nodes left 0). Replica 0 supplies the values.
inline std::vector<double> global_field(const TorusGrid& grid, const std::vector<RankDomain>& doms,
                                        const std::vector<GridScalar>& f) {
  std::vector<double> out(static_cast<std::size_t>(grid.ntoroidal) * grid.mgrid, 0.0);
  for (std::size_t k = 0; k < doms.size(); ++k) {
    const RankDomain& d = doms[k];
    if (d.replica != 0) continue;
    for (int p = 0; p < d.planes; ++p) {
      for (int i = d.window.first_owned; i <= d.window.last_owned; ++i) {
        for (int j = 0; j < grid.mtheta[i]; ++j) {
          const int idx = grid.igrid[i] + j;
          out[static_cast<std::size_t>(d.first_plane + p) * grid.mgrid + idx] = f[k].at(p, idx);
        }
      }
    }
  }
  return out;
}

/// Replace every rank's particles with `all`, each particle going to the
/// rank owning its (r, ζ); replicas take particles round-robin.
inline void distribute(Simulation& sim, const ParticleStore& all) {
  auto& stores = sim.stores();
  const auto& doms = sim.domains();
  const int nrep = sim.params().npartdom;
  for (auto& s : stores) s.clear();
  for (std::size_t i = 0; i < all.size(); ++i) {
    const double r = all.r()[i];
    const double z = all.zeta()[i];
    const int rep = static_cast<int>(i % nrep);
    bool placed = false;
    for (std::size_t k = 0; k < doms.size() && !placed; ++k) {
      const RankDomain& d = doms[k];
      const bool last_radial = d.radial_index == sim.params().nradial_domains - 1;
      const bool in_r = r >= d.window.r_lo && (r < d.window.r_hi || (last_radial && r <= d.window.r_hi));
      if (d.replica != rep || !in_r || z < d.zeta_lo || z >= d.zeta_hi) continue;
      stores[k].append_from(all, i);
      placed = true;
    }
    if (!placed) throw std::logic_error("distribute: no owner");
  }
}

inline double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double max_rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  const double scale = std::max(max_abs(a), max_abs(b));
  return scale > 0.0 ? d / scale : d;
}

/// Dense Gaussian elimination with partial pivoting; row-major a (n×n).
inline std::vector<double> dense_solve(std::vector<double> a, std::vector<double> b) {
  const int n = static_cast<int>(b.size());
  for (int c = 0; c < n; ++c) {
    int piv = c;
    for (int r = c + 1; r < n; ++r) {
      if (std::abs(a[r * n + c]) > std::abs(a[piv * n + c])) piv = r;
    }
    if (piv != c) {
      for (int k = 0; k < n; ++k) std::swap(a[c * n + k], a[piv * n + k]);
      std::swap(b[c], b[piv]);
    }
    for (int r = c + 1; r < n; ++r) {
      const double f = a[r * n + c] / a[c * n + c];
      if (f == 0.0) continue;
      for (int k = c; k < n; ++k) a[r * n + k] -= f * a[c * n + k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (int r = n - 1; r >= 0; --r) {
    double s = b[r];
    for (int k = r + 1; k < n; ++k) s -= a[r * n + k] * x[k];
    x[r] = s / a[r * n + r];
  }
  return x;
}

}  // namespace gtc::test
