#include "gtc/geometry.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace gtc {

int ring_node_count(double r, double r_outer, int mthetamax) {
  const double half = static_cast<double>(mthetamax) * r / (2.0 * r_outer);
  const int n = static_cast<int>(std::floor(half + 0.5));
  return 2 * std::max(2, n);
}

TorusGrid build_grid(const RunParams& p) {
  validate(p);
  TorusGrid g;
  g.mpsi = p.mpsi;
  g.mthetamax = p.mthetamax;
  g.ntoroidal = p.ntoroidal;
  g.nghost = p.nghost;
  g.r_inner = p.r_inner;
  g.r_outer = p.r_outer;
  g.delta_r = (p.r_outer - p.r_inner) / p.mpsi;
  g.delta_zeta = kTwoPi / p.ntoroidal;
  g.inv_delta_r = 1.0 / g.delta_r;
  g.inv_delta_zeta = p.ntoroidal / kTwoPi;
  g.major_radius = p.aspect_ratio;
  g.q0 = p.q0;
  g.q2 = p.q2;
  g.a_over_rho = p.a_over_rho;

  const int nr = p.mpsi + 1;
  g.radius.resize(nr);
  g.mtheta.resize(nr);
  g.igrid.resize(nr + 1);
  g.delta_theta.resize(nr);
  g.inv_delta_theta.resize(nr);
  g.qprofile.resize(nr);
  g.twist_offset.resize(nr);

  int flat = 0;
  for (int i = 0; i < nr; ++i) {
    const double r = i == p.mpsi ? p.r_outer : p.r_inner + i * g.delta_r;
    g.radius[i] = r;
    g.mtheta[i] = i == p.mpsi ? p.mthetamax : ring_node_count(r, p.r_outer, p.mthetamax);
    g.igrid[i] = flat;
    flat += g.mtheta[i] + 1;
    g.delta_theta[i] = kTwoPi / g.mtheta[i];
    g.inv_delta_theta[i] = g.mtheta[i] / kTwoPi;
    g.qprofile[i] = g.q(r);
    g.twist_offset[i] = g.delta_zeta / g.qprofile[i];
  }
  g.igrid[nr] = flat;
  g.mgrid = flat;

  g.ring_of.resize(flat);
  g.node_of.resize(flat);
  for (int i = 0; i < nr; ++i) {
    for (int j = 0; j <= g.mtheta[i]; ++j) {
      g.ring_of[g.igrid[i] + j] = i;
      g.node_of[g.igrid[i] + j] = j;
    }
  }
  return g;
}

Equilibrium equilibrium(const TorusGrid& grid, double r, double theta) {
  const double slack = 1e-12;
  if (r < grid.r_inner - slack || r > grid.r_outer + slack) {
    throw std::domain_error("equilibrium: r outside [r_inner, r_outer]");
  }
  return equilibrium_at(grid.major_radius, r, theta);
}

double qprofile(const TorusGrid& grid, double r) { return grid.q(r); }

double magnetic_shear(const TorusGrid& grid, double r) {
  return r * (2.0 * grid.q2 * r) / grid.q(r);
}

SafetyFactorFit fit_safety_factor(double r_ref, double q_ref, double shear) {
  // s = 2 q2 r² / q  and  q = q0 + q2 r²
  const double q2 = shear * q_ref / (2.0 * r_ref * r_ref);
  return {q_ref - q2 * r_ref * r_ref, q2};
}

std::vector<double> equal_area_radii(double r_inner, double r_outer, int k) {
  std::vector<double> radii(k + 1);
  const double a0 = r_inner * r_inner;
  const double span = r_outer * r_outer - a0;
  for (int d = 0; d <= k; ++d) radii[d] = std::sqrt(a0 + span * d / k);
  radii[0] = r_inner;
  radii[k] = r_outer;
  return radii;
}

std::vector<RadialWindow> radial_partition(const TorusGrid& g, int nradial_domains) {
  if (nradial_domains < 1) throw std::invalid_argument("radial_partition: need at least one domain");
  if (nradial_domains > g.rings()) {
    throw std::invalid_argument("radial_partition: too many domains for the ring count");
  }
  const auto radii = equal_area_radii(g.r_inner, g.r_outer, nradial_domains);
  std::vector<int> start(nradial_domains + 1);
  start[0] = 0;
  start[nradial_domains] = g.mpsi + 1;
  for (int d = 1; d < nradial_domains; ++d) {
    start[d] = static_cast<int>(std::lround((radii[d] - g.r_inner) / g.delta_r));
  }
  for (int d = 0; d < nradial_domains; ++d) {
    if (start[d + 1] <= start[d]) {
      throw std::invalid_argument("radial_partition: too many domains for the ring count");
    }
  }

  std::vector<RadialWindow> out(nradial_domains);
  for (int d = 0; d < nradial_domains; ++d) {
    RadialWindow& w = out[d];
    w.domain = d;
    w.first_owned = start[d];
    w.last_owned = start[d + 1] - 1;
    w.first_ghost = std::max(0, w.first_owned - g.nghost);
    w.last_ghost = std::min(g.mpsi, w.last_owned + g.nghost);
    w.r_lo = g.radius[w.first_owned];
    w.r_hi = d + 1 == nradial_domains ? g.r_outer : g.radius[start[d + 1]];
    w.offset = g.igrid[w.first_ghost];
    w.size = g.igrid[w.last_ghost + 1] - w.offset;
  }
  return out;
}

int radial_owner(const std::vector<RadialWindow>& windows, double r) {
  const int n = static_cast<int>(windows.size());
  for (int d = 0; d + 1 < n; ++d) {
    if (r < windows[d].r_hi) return d;
  }
  return n - 1;
}

std::string grid_summary(const TorusGrid& g) {
  std::string out = "# ring r mtheta q twist_offset\n";
  char buf[128];
  for (int i = 0; i <= g.mpsi; ++i) {
    std::snprintf(buf, sizeof(buf), "%d %.10f %d %.10f %.10f\n", i, g.radius[i], g.mtheta[i], g.qprofile[i],
                  g.twist_offset[i]);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "# mgrid=%d ntoroidal=%d\n", g.mgrid, g.ntoroidal);
  out += buf;
  return out;
}

}  // namespace gtc
