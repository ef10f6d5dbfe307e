#include "gtc/deposit.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>

namespace gtc {

DepositStats& DepositStats::operator+=(const DepositStats& o) {
  deposited += o.deposited;
  dropped_weight += o.dropped_weight;
  dropped_points += o.dropped_points;
  clamped_points += o.clamped_points;
  return *this;
}

namespace {

// Local plane of stencil plane `p` (0 lower, 1 upper); -1 if outside [0, planes).
int local_plane(const CellStencil& s, int p, const RankDomain& dom, int planes) {
  const int lp = s.plane + p - dom.first_plane;
  return lp >= 0 && lp < planes ? lp : -1;
}

void deposit_range(const ParticleStore& store, const TorusGrid& grid, const RankDomain& dom, const GridScalar& shape,
                   std::size_t lo, std::size_t hi, std::vector<double>& out, DepositStats& st) {
  const auto& win = shape.window();
  const int planes = shape.planes();
  const std::size_t stride = shape.plane_size();
  const auto r = store.r();
  const auto theta = store.theta();
  const auto zeta = store.zeta();
  const auto mu = store.mu();
  const auto w = store.weight();
  std::array<CellStencil, 4> stencils;
  for (std::size_t n = lo; n < hi; ++n) {
    const double b = equilibrium_at(grid.major_radius, r[n], theta[n]).b;
    const double rho = gyroradius(grid, mu[n], b);
    const double wq = 0.25 * w[n];
    locate_gyro(grid, r[n], theta[n], rho, zeta[n], stencils);
    for (const CellStencil& s : stencils) {
      if (s.clamped) ++st.clamped_points;
      if (!win.holds_ring(s.ring) || !win.holds_ring(s.ring + 1)) {
        ++st.dropped_points;
        st.dropped_weight += wq;
        continue;
      }
      const int lp = s.plane - dom.first_plane;
      if (lp >= 0 && lp + 1 < planes) {
        double* lower = out.data() + lp * stride - win.offset;
        double* upper = lower + stride;
        for (int k = 0; k < 4; ++k) lower[s.index[k]] += wq * s.weight[k];
        for (int k = 4; k < 8; ++k) upper[s.index[k]] += wq * s.weight[k];
      } else {
        // ζ on the wedge's upper edge: only the zero-weight plane is missing
        for (int p = 0; p < 2; ++p) {
          const int lq = local_plane(s, p, dom, planes);
          for (int k = p * 4; k < p * 4 + 4; ++k) {
            if (s.weight[k] == 0.0) continue;
            if (lq < 0) throw std::logic_error("deposit: particle " + std::to_string(n) + " outside the local wedge");
            out[lq * stride + (s.index[k] - win.offset)] += wq * s.weight[k];
          }
        }
      }
      st.deposited += wq;
    }
  }
}

}  // namespace

DepositStats deposit_charge(const ParticleStore& store, const TorusGrid& grid, const RankDomain& dom,
                            GridScalar& charge, int workers, DepositScratch& scratch) {
  if (workers < 1) throw std::invalid_argument("deposit: workers must be >= 1");
  const std::size_t n = store.size();
  const std::size_t len = charge.values().size();
  const auto wts = store.weight();
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(wts[i])) throw std::runtime_error("deposit: non-finite weight at particle " + std::to_string(i));
  }
  scratch.replicas.resize(workers);
  std::vector<DepositStats> stats(workers);

#pragma omp parallel for schedule(static, 1)
  for (int wk = 0; wk < workers; ++wk) {
    auto& rep = scratch.replicas[wk];
    rep.assign(len, 0.0);
    const std::size_t lo = n * wk / workers;
    const std::size_t hi = n * (wk + 1) / workers;
    deposit_range(store, grid, dom, charge, lo, hi, rep, stats[wk]);
  }

  auto out = charge.values();
  const long long total = static_cast<long long>(len);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < total; ++i) {
    double s = 0.0;
    for (int wk = 0; wk < workers; ++wk) s += scratch.replicas[wk][i];
    out[i] = s;
  }

  DepositStats sum;
  for (const auto& s : stats) sum += s;
  return sum;
}

int stencil_footprint(const ParticleStore& store, std::size_t i, const TorusGrid& grid) {
  std::set<std::pair<int, int>> seen;
  for (const GyroPoint& gp : gyro_points(store, i, grid)) {
    const CellStencil s = locate(grid, gp.r, gp.theta, store.zeta()[i]);
    for (int k = 0; k < 8; ++k) seen.emplace(s.plane + k / 4, s.index[k]);
  }
  return static_cast<int>(seen.size());
}

void merge_charge(Fabric& fabric, const TorusGrid& grid, const std::vector<RankTopology>& topo,
                  std::span<GridScalar* const> charge) {
  std::vector<FieldView> views;
  views.reserve(charge.size());
  for (GridScalar* c : charge) views.push_back(view(*c));
  const int planes = charge.empty() ? 0 : charge[0]->planes();
  exchange_radial(fabric, grid, topo, views, GhostMode::Add, 0, planes);
  exchange_toroidal(fabric, topo, views, GhostMode::Add);
  particle_reduce_grid(fabric, topo, views);
}

double owned_sum(const TorusGrid& grid, const GridScalar& f) {
  const auto& w = f.window();
  double s = 0.0;
  for (int p = 0; p + 1 < f.planes(); ++p) {
    for (int i = w.first_owned; i <= w.last_owned; ++i) {
      const int base = grid.igrid[i];
      for (int j = 0; j < grid.mtheta[i]; ++j) s += f.at(p, base + j);
    }
  }
  return s;
}

std::vector<double> node_volume_fraction(const TorusGrid& grid) {
  std::vector<double> v(grid.mgrid, 0.0);
  double total = 0.0;
  for (int i = 0; i <= grid.mpsi; ++i) {
    const double dr = (i == 0 || i == grid.mpsi) ? 0.5 * grid.delta_r : grid.delta_r;
    for (int j = 0; j < grid.mtheta[i]; ++j) {
      const double th = j * grid.delta_theta[i];
      const double vol = jacobian(grid.major_radius, grid.radius[i], th) * grid.radius[i] * dr * grid.delta_theta[i];
      v[grid.igrid[i] + j] = vol;
      total += vol;
    }
  }
  for (int i = 0; i <= grid.mpsi; ++i) {
    for (int j = 0; j < grid.mtheta[i]; ++j) v[grid.igrid[i] + j] /= total;
    v[grid.igrid[i] + grid.mtheta[i]] = v[grid.igrid[i]];
  }
  return v;
}

std::vector<double> marker_density(const TorusGrid& grid, double markers_per_plane) {
  auto v = node_volume_fraction(grid);
  for (double& x : v) x *= markers_per_plane;
  return v;
}

void charge_to_density(const TorusGrid& grid, std::span<const double> markers, const GridScalar& charge,
                       GridScalar& density) {
  const auto& w = charge.window();
  density.fill(0.0);
  for (int p = 0; p + 1 < charge.planes(); ++p) {
    for (int i = w.first_owned; i <= w.last_owned; ++i) {
      const int base = grid.igrid[i];
      for (int j = 0; j < grid.mtheta[i]; ++j) density.at(p, base + j) = charge.at(p, base + j) / markers[base + j];
      density.at(p, base + grid.mtheta[i]) = density.at(p, base);
    }
  }
}

std::vector<std::vector<double>> flux_surface_average(Fabric& fabric, const TorusGrid& grid,
                                                      const std::vector<RankTopology>& topo,
                                                      std::span<const GridScalar* const> fields) {
  if (fields.size() != topo.size()) throw TransportError("flux_surface_average: one field per rank required");
  const int nr = grid.rings();
  std::vector<std::vector<double>> prof(topo.size(), std::vector<double>(nr, 0.0));
  for (std::size_t k = 0; k < topo.size(); ++k) {
    const GridScalar& f = *fields[k];
    const auto& w = f.window();
    for (int i = w.first_owned; i <= w.last_owned; ++i) {
      const int base = grid.igrid[i];
      double s = 0.0;
      for (int p = 0; p + 1 < f.planes(); ++p) {
        for (int j = 0; j < grid.mtheta[i]; ++j) s += f.at(p, base + j);
      }
      prof[k][i] = s;
    }
  }
  auto reduce = [&](auto group_of, auto is_root) {
    for (const auto& t : topo) {
      if (!is_root(t)) continue;
      const std::vector<int>& group = group_of(t);
      std::vector<std::span<double>> bufs;
      for (int m : group) bufs.emplace_back(prof[m]);
      allreduce_sum(fabric, group, bufs);
    }
  };
  reduce([](const RankTopology& t) -> const std::vector<int>& { return t.radial_group; },
         [](const RankTopology& t) { return t.radial == 0; });
  reduce([](const RankTopology& t) -> const std::vector<int>& { return t.toroidal_group; },
         [](const RankTopology& t) { return t.toroidal == 0; });
  for (auto& pr : prof) {
    for (int i = 0; i < nr; ++i) pr[i] /= static_cast<double>(grid.mtheta[i]) * grid.ntoroidal;
  }
  return prof;
}

void remove_zonal(const TorusGrid& grid, std::span<const double> profile, GridScalar& f) {
  const auto& w = f.window();
  for (int p = 0; p + 1 < f.planes(); ++p) {
    for (int i = w.first_owned; i <= w.last_owned; ++i) {
      const int base = grid.igrid[i];
      for (int j = 0; j <= grid.mtheta[i]; ++j) f.at(p, base + j) -= profile[i];
    }
  }
}

}  // namespace gtc
