#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "gtc/config.hpp"

namespace gtc {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Exact reduction of an angle into [0, 2π).
inline double wrap_angle(double a) {
  if (a >= 0.0 && a < kTwoPi) return a;
  if (a < 0.0 && a >= -kTwoPi) {
    const double w = a + kTwoPi;
    return w >= kTwoPi ? 0.0 : w;
  }
  if (a >= kTwoPi && a < 2.0 * kTwoPi) return a - kTwoPi;
  double w = std::fmod(a, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  if (w >= kTwoPi) w = 0.0;
  return w;
}

/// Field-aligned poloidal/toroidal mesh of a circular tokamak. Each ring i
/// carries mtheta(i) distinct nodes plus one duplicate closure node at 2π;
/// node j of ring i on plane k sits at (r_i, j·Δθ_i, k·Δζ). Immutable after
/// construction.
struct TorusGrid {
  int mpsi = 0;
  int mthetamax = 0;
  int ntoroidal = 0;
  int nghost = 4;
  double r_inner = 0.0;  // r of ring 0, units of a
  double r_outer = 0.0;  // r of ring mpsi
  double delta_r = 0.0;
  double delta_zeta = 0.0;
  double major_radius = 0.0;  // R0 / a
  double q0 = 0.0;
  double q2 = 0.0;
  double a_over_rho = 0.0;
  int mgrid = 0;

  std::vector<double> radius;       // mpsi+1
  std::vector<int> mtheta;          // mpsi+1
  std::vector<int> igrid;           // mpsi+2, igrid[mpsi+1] == mgrid
  std::vector<double> delta_theta;  // mpsi+1
  std::vector<double> inv_delta_theta;
  double inv_delta_r = 0.0;
  double inv_delta_zeta = 0.0;
  std::vector<double> qprofile;     // mpsi+1
  std::vector<double> twist_offset; // mpsi+1, Δζ / q(r_i)

  /// Ring of every flat index, and node index within that ring.
  std::vector<int> ring_of;
  std::vector<int> node_of;

  int rings() const { return mpsi + 1; }
  int index(int ring, int node) const { return igrid[ring] + node; }
  double q(double r) const { return q0 + q2 * r * r; }
  /// Thermal gyroradius at B = 1 in units of a.
  double rho_thermal() const { return 1.0 / a_over_rho; }
};

TorusGrid build_grid(const RunParams& p);

/// Number of nodes on a ring of radius r (nearest-even proportional rule).
int ring_node_count(double r, double r_outer, int mthetamax);

struct Equilibrium {
  double b;
  double db_dr;
  double db_dtheta;
  double major;  // local major radius R/a = R0 + r cosθ
};

/// Circular large-aspect-ratio equilibrium B = 1/(1 + (r/R0) cosθ).
inline Equilibrium equilibrium_at(double major_radius, double r, double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double eps = r / major_radius;
  const double b = 1.0 / (1.0 + eps * c);
  return {b, -b * b * c / major_radius, b * b * eps * s, major_radius * (1.0 + eps * c)};
}

/// Checked variant: throws std::domain_error when r is outside the grid.
Equilibrium equilibrium(const TorusGrid& grid, double r, double theta);

double qprofile(const TorusGrid& grid, double r);
double magnetic_shear(const TorusGrid& grid, double r);

struct SafetyFactorFit {
  double q0;
  double q2;
};

/// Solves q(r_ref)=q_ref and (r/q)(dq/dr)=shear at r_ref for q = q0 + q2 r².
SafetyFactorFit fit_safety_factor(double r_ref, double q_ref, double shear);

inline double jacobian(double major_radius, double r, double theta) {
  const double f = 1.0 + (r / major_radius) * std::cos(theta);
  return f * f;
}

/// Eight bounding nodes of a point: index = plane*4 + ring*2 + node, planes
/// k and k+1 (global plane numbers, k+1 may equal ntoroidal), rings i and i+1.
struct CellStencil {
  int plane = 0;
  std::array<int, 8> index{};  // global flat in-plane index (canonical node)
  std::array<double, 8> weight{};
  int ring = 0;
  bool clamped = false;
};

namespace detail {

struct RadialPart {
  int ring;
  double wr[2];
  bool clamped;
};

struct ToroidalPart {
  int plane;
  double wz1;
};

inline RadialPart radial_part(const TorusGrid& g, double r) {
  constexpr double kSlack = 1e-9;
  RadialPart p{0, {1.0, 0.0}, false};
  double x = (r - g.r_inner) * g.inv_delta_r;
  if (x < 0.0) {
    p.clamped = x < -kSlack;
    x = 0.0;
  } else if (x > g.mpsi) {
    p.clamped = x > g.mpsi + kSlack;
    x = g.mpsi;
  }
  int i = static_cast<int>(x);
  if (i >= g.mpsi) i = g.mpsi - 1;
  const double wr1 = x - i;
  p.ring = i;
  p.wr[0] = 1.0 - wr1;
  p.wr[1] = wr1;
  return p;
}

inline ToroidalPart toroidal_part(const TorusGrid& g, double zeta) {
  const double zt = wrap_angle(zeta) * g.inv_delta_zeta;
  int k = static_cast<int>(zt);
  if (k >= g.ntoroidal) k = g.ntoroidal - 1;
  return {k, zt - k};
}

inline void fill_stencil(const TorusGrid& g, const RadialPart& rp, const ToroidalPart& tp, double theta,
                         CellStencil& s) {
  s.ring = rp.ring;
  s.clamped = rp.clamped;
  s.plane = tp.plane;
  const double wz[2] = {1.0 - tp.wz1, tp.wz1};
  for (int rr = 0; rr < 2; ++rr) {
    const int ring = rp.ring + rr;
    const double twist = g.twist_offset[ring];
    const int m = g.mtheta[ring];
    const int base = g.igrid[ring];
    const double inv_dt = g.inv_delta_theta[ring];
    for (int p = 0; p < 2; ++p) {
      // field line through the point, followed back (p=0) or forward (p=1)
      const double shift = p == 0 ? -tp.wz1 * twist : wz[0] * twist;
      const double t = wrap_angle(theta + shift) * inv_dt;
      int j = static_cast<int>(t);
      const double wt1 = t - j;
      if (j >= m) j -= m;
      const int j1 = j + 1 == m ? 0 : j + 1;
      const int slot = p * 4 + rr * 2;
      const double w = wz[p] * rp.wr[rr];
      s.index[slot] = base + j;
      s.index[slot + 1] = base + j1;
      s.weight[slot] = w * (1.0 - wt1);
      s.weight[slot + 1] = w * wt1;
    }
  }
}

}  // namespace detail

/// Trilinear field-aligned interpolation stencil. θ on each ring is first
/// projected along the field line onto each bounding plane. Radii beyond
/// the grid are clamped onto the boundary ring (flagged).
inline CellStencil locate(const TorusGrid& g, double r, double theta, double zeta) {
  CellStencil s;
  detail::fill_stencil(g, detail::radial_part(g, r), detail::toroidal_part(g, zeta), theta, s);
  return s;
}

/// Stencils of the four gyro-points (r+ρ,θ), (r,θ+ρ/r), (r−ρ,θ), (r,θ−ρ/r),
/// identical to locating each point separately.
inline void locate_gyro(const TorusGrid& g, double r, double theta, double rho, double zeta,
                        std::array<CellStencil, 4>& out) {
  const detail::ToroidalPart tp = detail::toroidal_part(g, zeta);
  const detail::RadialPart center = detail::radial_part(g, r);
  const double dtheta = rho / r;
  detail::fill_stencil(g, detail::radial_part(g, r + rho), tp, theta, out[0]);
  detail::fill_stencil(g, center, tp, theta + dtheta, out[1]);
  detail::fill_stencil(g, detail::radial_part(g, r - rho), tp, theta, out[2]);
  detail::fill_stencil(g, center, tp, theta - dtheta, out[3]);
}

/// Owned ring ranges for each radial domain, with ghost padding.
struct RadialWindow {
  int domain = 0;
  int first_owned = 0;
  int last_owned = 0;
  int first_ghost = 0;  // lowest ring held locally
  int last_ghost = 0;   // highest ring held locally
  double r_lo = 0.0;    // particle ownership [r_lo, r_hi)
  double r_hi = 0.0;
  int offset = 0;       // igrid[first_ghost]
  int size = 0;         // flat points held locally per plane

  bool owns_ring(int ring) const { return ring >= first_owned && ring <= last_owned; }
  bool holds_ring(int ring) const { return ring >= first_ghost && ring <= last_ghost; }
  int owned_rings() const { return last_owned - first_owned + 1; }
};

std::vector<RadialWindow> radial_partition(const TorusGrid& grid, int nradial_domains);

/// Equal-area split radii between r_inner and r_outer (K+1 values).
std::vector<double> equal_area_radii(double r_inner, double r_outer, int k);

int radial_owner(const std::vector<RadialWindow>& windows, double r);

/// Per-ring r, mtheta, q, twist_offset as text.
std::string grid_summary(const TorusGrid& grid);

}  // namespace gtc
