#include "gtc/fieldsolve.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace gtc {

namespace {

// Snap values within rounding of an integer so nodal points get exact weights.
double snap(double x) {
  const double n = std::round(x);
  return std::abs(x - n) < 1e-9 ? n : x;
}

// Bilinear single-plane weights of (r, θ) added into `row` with factor f.
void accumulate_bilinear(const TorusGrid& g, double r, double theta, double f, std::map<int, double>& row) {
  double x = snap((r - g.r_inner) / g.delta_r);
  x = std::clamp(x, 0.0, static_cast<double>(g.mpsi));
  int i = static_cast<int>(x);
  if (i >= g.mpsi) i = g.mpsi - 1;
  const double wr1 = x - i;
  for (int rr = 0; rr < 2; ++rr) {
    const double wr = rr == 0 ? 1.0 - wr1 : wr1;
    if (wr == 0.0) continue;
    const int ring = i + rr;
    const int m = g.mtheta[ring];
    const double t = snap(wrap_angle(theta) / g.delta_theta[ring]);
    int j = static_cast<int>(t);
    const double wt1 = t - j;
    j %= m;
    const int j1 = (j + 1) % m;
    if (1.0 - wt1 != 0.0) row[g.igrid[ring] + j] += f * wr * (1.0 - wt1);
    if (wt1 != 0.0) row[g.igrid[ring] + j1] += f * wr * wt1;
  }
}

void append_row(SparseRows& s, const std::map<int, double>& row) {
  for (const auto& [c, v] : row) {
    if (v == 0.0) continue;
    s.col.push_back(c);
    s.val.push_back(v);
  }
  s.row_ptr.push_back(static_cast<int>(s.col.size()));
}

bool interior_ring(const TorusGrid& g, int i) { return i > 0 && i < g.mpsi; }

template <typename Field>
double interp_ptr(const TorusGrid& g, const Field* base, int offset, int ring, double theta) {
  const int m = g.mtheta[ring];
  const double t = wrap_angle(theta) / g.delta_theta[ring];
  int j = static_cast<int>(t);
  const double wt1 = t - j;
  if (j >= m) j -= m;
  const int j1 = j + 1 == m ? 0 : j + 1;
  const int b = g.igrid[ring] - offset;
  return (1.0 - wt1) * base[b + j] + wt1 * base[b + j1];
}

std::vector<FieldView> views_of(std::span<GridScalar* const> f) {
  std::vector<FieldView> v;
  v.reserve(f.size());
  for (GridScalar* x : f) v.push_back(view(*x));
  return v;
}

// Kernels for one flat point (closure nodes reuse node 0's stencil, so the
// flattened loop writes them consistently without a separate sync).

double theta_point(const TorusGrid& g, const double* src, int offset, int idx) {
  const int ring = g.ring_of[idx];
  const int m = g.mtheta[ring];
  const int j = g.node_of[idx] % m;
  const int b = g.igrid[ring] - offset;
  const int jm = j == 0 ? m - 1 : j - 1;
  const int jp = j + 1 == m ? 0 : j + 1;
  return 0.25 * src[b + jm] + 0.5 * src[b + j] + 0.25 * src[b + jp];
}

double radial_point(const TorusGrid& g, const double* src, int offset, int idx) {
  const int ring = g.ring_of[idx];
  if (!interior_ring(g, ring)) return src[idx - offset];
  const int j = g.node_of[idx] % g.mtheta[ring];
  const double th = j * g.delta_theta[ring];
  return 0.5 * src[idx - offset] + 0.25 * interp_ptr(g, src, offset, ring - 1, th) +
         0.25 * interp_ptr(g, src, offset, ring + 1, th);
}

double parallel_point(const TorusGrid& g, const double* self, const double* lower, const double* upper, int offset,
                      int idx) {
  const int ring = g.ring_of[idx];
  const int j = g.node_of[idx] % g.mtheta[ring];
  const double th = j * g.delta_theta[ring];
  const double tw = g.twist_offset[ring];
  return 0.5 * self[idx - offset] + 0.25 * interp_ptr(g, lower, offset, ring, th - tw) +
         0.25 * interp_ptr(g, upper, offset, ring, th + tw);
}

void field_point(const TorusGrid& g, const double* self, const double* lower, const double* upper, int offset,
                 int idx, double* e) {
  const int ring = g.ring_of[idx];
  const int m = g.mtheta[ring];
  const int j = g.node_of[idx] % m;
  const double th = j * g.delta_theta[ring];
  const int b = g.igrid[ring] - offset;

  double dr;
  if (ring == 0) {
    dr = (interp_ptr(g, self, offset, 1, th) - self[b + j]) / g.delta_r;
  } else if (ring == g.mpsi) {
    dr = (self[b + j] - interp_ptr(g, self, offset, ring - 1, th)) / g.delta_r;
  } else {
    dr = (interp_ptr(g, self, offset, ring + 1, th) - interp_ptr(g, self, offset, ring - 1, th)) / (2.0 * g.delta_r);
  }
  const int jm = j == 0 ? m - 1 : j - 1;
  const int jp = j + 1 == m ? 0 : j + 1;
  const double dth = (self[b + jp] - self[b + jm]) / (2.0 * g.delta_theta[ring] * g.radius[ring]);
  const double tw = g.twist_offset[ring];
  const double dz =
      (interp_ptr(g, upper, offset, ring, th + tw) - interp_ptr(g, lower, offset, ring, th - tw)) / (2.0 * g.delta_zeta);
  e[0] = -dr;
  e[1] = -dth;
  e[2] = -dz;
}

struct FlatRange {
  int begin;
  int end;
};

FlatRange owned_flat(const TorusGrid& g, const RadialWindow& w) { return {g.igrid[w.first_owned], g.igrid[w.last_owned + 1]}; }

}  // namespace

GyroOperator build_gyro_operator(const TorusGrid& g, const GyroOptions& opt) {
  GyroOperator op;
  op.c1 = 1.0;
  op.c2 = opt.tau;
  op.g.row_ptr.push_back(0);
  for (int idx = 0; idx < g.mgrid; ++idx) {
    const int i = g.ring_of[idx];
    const int j = g.node_of[idx];
    std::map<int, double> row;
    if (j < g.mtheta[i]) {
      const double r = g.radius[i];
      const double th = j * g.delta_theta[i];
      const double b = equilibrium_at(g.major_radius, r, th).b;
      const double rho = opt.rho_scale * g.rho_thermal() / b;
      for (const GyroPoint& p : gyro_points(r, th, rho)) accumulate_bilinear(g, p.r, p.theta, 0.25, row);
    }
    append_row(op.g, row);
  }

  op.g2.row_ptr.push_back(0);
  for (int idx = 0; idx < g.mgrid; ++idx) {
    std::map<int, double> row;
    const auto c = op.g.cols_of(idx);
    const auto v = op.g.vals_of(idx);
    for (std::size_t a = 0; a < c.size(); ++a) {
      const auto c2 = op.g.cols_of(c[a]);
      const auto v2 = op.g.vals_of(c[a]);
      for (std::size_t b = 0; b < c2.size(); ++b) row[c2[b]] += v[a] * v2[b];
    }
    append_row(op.g2, row);
    for (int col : op.g2.cols_of(idx)) op.reach = std::max(op.reach, std::abs(g.ring_of[col] - g.ring_of[idx]));
  }
  return op;
}

std::vector<double> dense_system(const TorusGrid& g, const GyroOperator& op) {
  const std::size_t n = g.mgrid;
  std::vector<double> a(n * n, 0.0);
  for (int idx = 0; idx < g.mgrid; ++idx) {
    const int i = g.ring_of[idx];
    const int j = g.node_of[idx];
    double* row = a.data() + idx * n;
    if (j == g.mtheta[i]) {
      row[idx] = 1.0;
      row[g.igrid[i]] -= 1.0;
    } else if (!interior_ring(g, i)) {
      row[idx] = 1.0;
    } else {
      row[idx] = op.c1 + op.c2;
      const auto c = op.g2.cols_of(idx);
      const auto v = op.g2.vals_of(idx);
      for (std::size_t k = 0; k < c.size(); ++k) row[c[k]] -= op.c1 * v[k];
    }
  }
  return a;
}

PoissonReport poisson(Fabric& fabric, const TorusGrid& g, const std::vector<RankTopology>& topo,
                      const GyroOperator& op, const JacobiOptions& opt, std::span<const GridScalar* const> rhs,
                      std::span<GridScalar* const> phi) {
  const int nranks = static_cast<int>(topo.size());
  if (static_cast<int>(rhs.size()) != nranks || static_cast<int>(phi.size()) != nranks) {
    throw std::invalid_argument("poisson: one field per rank required");
  }
  for (int k = 0; k < nranks; ++k) {
    const auto& w = phi[k]->window();
    const bool edge_lo = w.first_ghost == 0;
    const bool edge_hi = w.last_ghost == g.mpsi;
    if ((!edge_lo && w.first_owned - w.first_ghost < op.reach) || (!edge_hi && w.last_ghost - w.last_owned < op.reach)) {
      throw std::invalid_argument("poisson: ghost window narrower than the gyroaverage reach");
    }
    phi[k]->fill(0.0);
  }
  std::vector<int> everyone(nranks);
  for (int k = 0; k < nranks; ++k) everyone[k] = k;

  const double diag = op.c1 + op.c2;
  auto global_max = [&](std::vector<double>& local) {
    std::vector<std::span<double>> bufs;
    for (auto& x : local) bufs.emplace_back(&x, 1);
    allreduce_max(fabric, everyone, bufs);
    return local[0];
  };

  std::vector<double> norms(nranks, 0.0);
  for (int k = 0; k < nranks; ++k) {
    const GridScalar& b = *rhs[k];
    const FlatRange fr = owned_flat(g, b.window());
    double m = 0.0;
    for (int p = 0; p + 1 < b.planes(); ++p) {
      for (int idx = fr.begin; idx < fr.end; ++idx) {
        if (interior_ring(g, g.ring_of[idx]) && g.node_of[idx] < g.mtheta[g.ring_of[idx]]) {
          m = std::max(m, std::abs(b.at(p, idx)));
        }
      }
    }
    norms[k] = m;
  }
  const double rhs_norm = global_max(norms);

  PoissonReport rep;
  std::vector<std::vector<double>> resid(nranks);
  auto views = views_of(phi);
  const int planes = phi.empty() ? 0 : phi[0]->planes();

  if (rhs_norm == 0.0) {
    rep.residuals.push_back(0.0);
    return rep;
  }
  for (int it = 0;; ++it) {
    std::vector<double> local(nranks, 0.0);
    for (int k = 0; k < nranks; ++k) {
      const GridScalar& b = *rhs[k];
      const GridScalar& f = *phi[k];
      const FlatRange fr = owned_flat(g, f.window());
      const int off = f.window().offset;
      const int npts = fr.end - fr.begin;
      resid[k].assign(static_cast<std::size_t>(npts) * (planes - 1), 0.0);
      double m = 0.0;
      for (int p = 0; p + 1 < planes; ++p) {
        const double* src = f.plane(p).data();
        double* out = resid[k].data() + static_cast<std::size_t>(p) * npts;
#pragma omp parallel for reduction(max : m) schedule(static)
        for (int idx = fr.begin; idx < fr.end; ++idx) {
          const int ring = g.ring_of[idx];
          if (!interior_ring(g, ring) || g.node_of[idx] == g.mtheta[ring]) continue;
          const auto c = op.g2.cols_of(idx);
          const auto v = op.g2.vals_of(idx);
          double acc = 0.0;
          for (std::size_t q = 0; q < c.size(); ++q) acc += v[q] * src[c[q] - off];
          const double r = b.at(p, idx) + op.c1 * acc - diag * src[idx - off];
          out[idx - fr.begin] = r;
          m = std::max(m, std::abs(r));
        }
      }
      local[k] = m;
    }
    const double rel = global_max(local) / rhs_norm;
    rep.residuals.push_back(rel);
    if (rel <= opt.tol) break;
    if (it == opt.max_iter) {
      rep.converged = false;
      break;
    }
    for (int k = 0; k < nranks; ++k) {
      GridScalar& f = *phi[k];
      const FlatRange fr = owned_flat(g, f.window());
      const int npts = fr.end - fr.begin;
      for (int p = 0; p + 1 < planes; ++p) {
        double* dst = f.plane(p).data();
        const double* r = resid[k].data() + static_cast<std::size_t>(p) * npts;
        const int off = f.window().offset;
        for (int q = 0; q < npts; ++q) dst[fr.begin + q - off] += opt.omega * r[q] / diag;
      }
    }
    ++rep.iterations;
    exchange_radial(fabric, g, topo, views, GhostMode::Copy, 0, planes - 1);
  }
  for (int k = 0; k < nranks; ++k) sync_closure_nodes(g, *phi[k]);
  return rep;
}

ZonalSolver::ZonalSolver(const TorusGrid& g, const GyroOperator& op) : n_(g.rings()) {
  const int n = n_;
  dense_.assign(static_cast<std::size_t>(n) * n, 0.0);
  std::vector<double> z(static_cast<std::size_t>(n) * n, 0.0);
  for (int idx = 0; idx < g.mgrid; ++idx) {
    const int i = g.ring_of[idx];
    if (g.node_of[idx] == g.mtheta[i]) continue;
    const auto c = op.g2.cols_of(idx);
    const auto v = op.g2.vals_of(idx);
    for (std::size_t q = 0; q < c.size(); ++q) z[i * n + g.ring_of[c[q]]] += v[q] / g.mtheta[i];
  }
  for (int i = 0; i < n; ++i) {
    if (i == 0 || i == n - 1) {
      dense_[i * n + i] = 1.0;
      continue;
    }
    for (int k = 0; k < n; ++k) dense_[i * n + k] = -op.c1 * z[i * n + k];
    dense_[i * n + i] += op.c1 + op.c2;
  }
  bw_ = 0;
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      if (dense_[i * n + k] != 0.0) bw_ = std::max(bw_, std::abs(i - k));
    }
  }
  // Band LU without pivoting; the system is diagonally dominant.
  const int w = 2 * bw_ + 1;
  lu_.assign(static_cast<std::size_t>(n) * w, 0.0);
  auto at = [&](int i, int k) -> double& { return lu_[static_cast<std::size_t>(i) * w + (k - i + bw_)]; };
  for (int i = 0; i < n; ++i) {
    for (int k = std::max(0, i - bw_); k <= std::min(n - 1, i + bw_); ++k) at(i, k) = dense_[i * n + k];
  }
  for (int k = 0; k < n; ++k) {
    const double piv = at(k, k);
    if (piv == 0.0) throw std::runtime_error("zonal solver: zero pivot");
    for (int i = k + 1; i <= std::min(n - 1, k + bw_); ++i) {
      const double l = at(i, k) / piv;
      at(i, k) = l;
      for (int c = k + 1; c <= std::min(n - 1, k + bw_); ++c) at(i, c) -= l * at(k, c);
    }
  }
}

std::vector<double> ZonalSolver::solve(std::span<const double> avg) const {
  const int n = n_;
  if (static_cast<int>(avg.size()) != n) throw std::invalid_argument("zonal solve: one value per ring required");
  const int w = 2 * bw_ + 1;
  auto at = [&](int i, int k) { return lu_[static_cast<std::size_t>(i) * w + (k - i + bw_)]; };
  std::vector<double> x(avg.begin(), avg.end());
  x[0] = 0.0;
  x[n - 1] = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int k = std::max(0, i - bw_); k < i; ++k) x[i] -= at(i, k) * x[k];
  }
  for (int i = n - 1; i >= 0; --i) {
    for (int k = i + 1; k <= std::min(n - 1, i + bw_); ++k) x[i] -= at(i, k) * x[k];
    x[i] /= at(i, i);
  }
  return x;
}

void add_zonal(const TorusGrid& g, std::span<const double> phi00, GridScalar& phi) {
  const auto& w = phi.window();
  for (int p = 0; p + 1 < phi.planes(); ++p) {
    for (int i = w.first_owned; i <= w.last_owned; ++i) {
      const int base = g.igrid[i];
      for (int j = 0; j <= g.mtheta[i]; ++j) phi.at(p, base + j) += phi00[i];
    }
  }
}

double ring_interp(const TorusGrid& g, const GridScalar& f, int plane, int ring, double theta) {
  return interp_ptr(g, f.plane(plane).data(), f.window().offset, ring, theta);
}

std::size_t flattened_extent(const TorusGrid& g, const RadialWindow& w) {
  const FlatRange fr = owned_flat(g, w);
  return static_cast<std::size_t>(fr.end - fr.begin);
}

void smooth_theta(const TorusGrid& g, GridScalar& f) {
  const FlatRange fr = owned_flat(g, f.window());
  const int off = f.window().offset;
  std::vector<double> src;
  for (int p = 0; p + 1 < f.planes(); ++p) {
    auto pl = f.plane(p);
    src.assign(pl.begin(), pl.end());
#pragma omp parallel for schedule(static)
    for (int idx = fr.begin; idx < fr.end; ++idx) pl[idx - off] = theta_point(g, src.data(), off, idx);
  }
}

void smooth_radial(const TorusGrid& g, GridScalar& f) {
  const FlatRange fr = owned_flat(g, f.window());
  const int off = f.window().offset;
  std::vector<double> src;
  for (int p = 0; p + 1 < f.planes(); ++p) {
    auto pl = f.plane(p);
    src.assign(pl.begin(), pl.end());
#pragma omp parallel for schedule(static)
    for (int idx = fr.begin; idx < fr.end; ++idx) pl[idx - off] = radial_point(g, src.data(), off, idx);
  }
}

void smooth_parallel(const TorusGrid& g, GridScalar& f, std::span<const double> lower_plane) {
  const FlatRange fr = owned_flat(g, f.window());
  const int off = f.window().offset;
  const int planes = f.planes();
  if (lower_plane.size() != f.plane_size()) throw std::invalid_argument("smooth: lower plane size mismatch");
  // plane p reads the unfiltered plane p-1
  std::vector<double> orig(f.values().begin(), f.values().end());
  const std::size_t stride = f.plane_size();
  for (int p = 0; p + 1 < planes; ++p) {
    const double* self = orig.data() + p * stride;
    const double* lower = p == 0 ? lower_plane.data() : orig.data() + (p - 1) * stride;
    const double* upper = orig.data() + (p + 1) * stride;
    auto pl = f.plane(p);
#pragma omp parallel for schedule(static)
    for (int idx = fr.begin; idx < fr.end; ++idx) pl[idx - off] = parallel_point(g, self, lower, upper, off, idx);
  }
}

void smooth(Fabric& fabric, const TorusGrid& g, const std::vector<RankTopology>& topo,
            std::span<GridScalar* const> fields) {
  auto views = views_of(fields);
  if (fields.empty()) return;
  const int owned = fields[0]->planes() - 1;
  for (GridScalar* f : fields) smooth_theta(g, *f);
  exchange_radial(fabric, g, topo, views, GhostMode::Copy, 0, owned);
  for (GridScalar* f : fields) smooth_radial(g, *f);
  exchange_radial(fabric, g, topo, views, GhostMode::Copy, 0, owned);
  exchange_toroidal(fabric, topo, views, GhostMode::Copy);
  const auto lower = fetch_lower_planes(fabric, topo, views);
  for (std::size_t k = 0; k < fields.size(); ++k) smooth_parallel(g, *fields[k], lower[k]);
  exchange_radial(fabric, g, topo, views, GhostMode::Copy, 0, owned);
  exchange_toroidal(fabric, topo, views, GhostMode::Copy);
}

void field_local(const TorusGrid& g, const GridScalar& phi, std::span<const double> lower_plane, GridVector& e) {
  const FlatRange fr = owned_flat(g, phi.window());
  const int off = phi.window().offset;
  if (lower_plane.size() != phi.plane_size()) throw std::invalid_argument("field: lower plane size mismatch");
  for (int p = 0; p + 1 < phi.planes(); ++p) {
    const double* self = phi.plane(p).data();
    const double* lower = p == 0 ? lower_plane.data() : phi.plane(p - 1).data();
    const double* upper = phi.plane(p + 1).data();
#pragma omp parallel for schedule(static)
    for (int idx = fr.begin; idx < fr.end; ++idx) field_point(g, self, lower, upper, off, idx, e.at(p, idx));
  }
}

void field(Fabric& fabric, const TorusGrid& g, const std::vector<RankTopology>& topo,
           std::span<GridScalar* const> phi, std::span<GridVector* const> e) {
  if (phi.size() != e.size()) throw std::invalid_argument("field: one vector field per potential");
  if (phi.empty()) return;
  auto pv = views_of(phi);
  const int owned = phi[0]->planes() - 1;
  exchange_radial(fabric, g, topo, pv, GhostMode::Copy, 0, owned);
  exchange_toroidal(fabric, topo, pv, GhostMode::Copy);
  const auto lower = fetch_lower_planes(fabric, topo, pv);
  for (std::size_t k = 0; k < phi.size(); ++k) field_local(g, *phi[k], lower[k], *e[k]);
  std::vector<FieldView> ev;
  for (GridVector* x : e) ev.push_back(view(*x));
  exchange_radial(fabric, g, topo, ev, GhostMode::Copy, 0, owned);
  exchange_toroidal(fabric, topo, ev, GhostMode::Copy);
}

namespace reference {

void smooth_theta(const TorusGrid& g, GridScalar& f) {
  const auto& w = f.window();
  const int off = w.offset;
  for (int p = 0; p + 1 < f.planes(); ++p) {
    auto pl = f.plane(p);
    const std::vector<double> src(pl.begin(), pl.end());
    for (int i = w.first_owned; i <= w.last_owned; ++i) {
      for (int j = 0; j <= g.mtheta[i]; ++j) {
        const int idx = g.igrid[i] + j;
        pl[idx - off] = theta_point(g, src.data(), off, idx);
      }
    }
  }
}

void smooth_radial(const TorusGrid& g, GridScalar& f) {
  const auto& w = f.window();
  const int off = w.offset;
  for (int p = 0; p + 1 < f.planes(); ++p) {
    auto pl = f.plane(p);
    const std::vector<double> src(pl.begin(), pl.end());
    for (int i = w.first_owned; i <= w.last_owned; ++i) {
      for (int j = 0; j <= g.mtheta[i]; ++j) {
        const int idx = g.igrid[i] + j;
        pl[idx - off] = radial_point(g, src.data(), off, idx);
      }
    }
  }
}

void field_local(const TorusGrid& g, const GridScalar& phi, std::span<const double> lower_plane, GridVector& e) {
  const auto& w = phi.window();
  const int off = w.offset;
  for (int p = 0; p + 1 < phi.planes(); ++p) {
    const double* self = phi.plane(p).data();
    const double* lower = p == 0 ? lower_plane.data() : phi.plane(p - 1).data();
    const double* upper = phi.plane(p + 1).data();
    for (int i = w.first_owned; i <= w.last_owned; ++i) {
      for (int j = 0; j <= g.mtheta[i]; ++j) {
        const int idx = g.igrid[i] + j;
        field_point(g, self, lower, upper, off, idx, e.at(p, idx));
      }
    }
  }
}

}  // namespace reference

}  // namespace gtc
