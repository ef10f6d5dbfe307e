#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>

#include "gtc/deposit.hpp"
#include "gtc/push.hpp"
#include "support.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace gtc;

namespace {

struct Toy {
  TorusGrid grid;
  RankDomain dom;
  Physics phys;

  explicit Toy(RunParams p = test::toy_params()) : grid(build_grid(p)), dom(test::whole_domain(grid)), phys(physics_from(p)) {}

  GridVector uniform_field(const std::array<double, 3>& v) const {
    GridVector e(dom.window, dom.planes + 1);
    for (int p = 0; p <= dom.planes; ++p) {
      for (int idx = 0; idx < grid.mgrid; ++idx) {
        for (int c = 0; c < 3; ++c) e.at(p, idx)[c] = v[c];
      }
    }
    return e;
  }

  GridVector random_field(test::Rng& rng) const {
    GridVector e(dom.window, dom.planes + 1);
    for (double& x : e.values()) x = rng.uniform(-1.0, 1.0);
    return e;
  }
};

ParticleStore central_particles(const TorusGrid& g, int n, test::Rng& rng, double w_amp) {
  ParticleStore s;
  for (int i = 0; i < n; ++i) {
    s.push_back(rng.uniform(0.4, 0.6), rng.uniform(0.0, kTwoPi), rng.uniform(0.0, kTwoPi), rng.normal(),
                rng.uniform(0.0, 1.0), rng.uniform(-w_amp, w_amp));
  }
  (void)g;
  return s;
}

double angle_diff(double a, double b) { return std::remainder(a - b, kTwoPi); }

double orbit_distance(const OrbitState& a, const OrbitState& b) {
  return std::abs(a.r - b.r) + std::abs(angle_diff(a.theta, b.theta)) + std::abs(angle_diff(a.zeta, b.zeta)) +
         std::abs(a.vpar - b.vpar) + std::abs(a.w - b.w);
}

double energy(const TorusGrid& g, const OrbitState& s) { return kinetic_energy(g, s.r, s.theta, s.vpar, s.mu); }

}  // namespace

TEST_CASE("gradient envelope values") {
  CHECK(gradient_profile(0.5) == 1.0);
  CHECK(std::abs(gradient_profile(0.15) - std::exp(-1.0)) <= 1e-12);
  CHECK(std::abs(gradient_profile(0.85) - std::exp(-1.0)) <= 1e-12);
}

TEST_CASE("uniform field gathers to itself") {
  Toy t;
  const GridVector e = t.uniform_field({0.3, -1.2, 0.05});
  test::Rng rng(1);
  ParticleStore s;
  for (int i = 0; i < 2000; ++i) test::push_random_particle(s, t.grid, rng, 0.0);
  const auto g = gather(s, t.grid, t.dom, e);
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(g[3 * i] == doctest::Approx(0.3).epsilon(1e-13));
    CHECK(g[3 * i + 1] == doctest::Approx(-1.2).epsilon(1e-13));
    CHECK(g[3 * i + 2] == doctest::Approx(0.05).epsilon(1e-13));
  }
}

TEST_CASE("zero-gyroradius particle on a node gathers the nodal field") {
  Toy t;
  test::Rng rng(2);
  const GridVector e = t.random_field(rng);
  for (int k = 0; k < 100; ++k) {
    const int i = rng.integer(0, t.grid.mpsi);
    const int j = rng.integer(0, t.grid.mtheta[i] - 1);
    const int p = rng.integer(0, t.grid.ntoroidal - 1);
    ParticleStore s;
    s.push_back(t.grid.radius[i], j * t.grid.delta_theta[i], p * t.grid.delta_zeta, 1.0, 0.0, 0.0);
    const auto v = gather_one(s, 0, t.grid, t.dom, e);
    for (int c = 0; c < 3; ++c) CHECK(v[c] == doctest::Approx(e.at(p, t.grid.index(i, j))[c]).epsilon(1e-13));
  }
}

TEST_CASE("gather is the adjoint of deposit") {
  Toy t;
  test::Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    ParticleStore s;
    const int n = 500;
    for (int i = 0; i < n; ++i) {
      s.push_back(rng.uniform(0.1, 0.9), rng.uniform(0.0, kTwoPi), rng.uniform(0.0, kTwoPi), rng.normal(),
                  rng.uniform(0.0, 3.0), rng.uniform(-1.0, 1.0));
    }
    const GridVector e = t.random_field(rng);
    GridScalar c(t.dom.window, t.dom.planes + 1);
    DepositScratch scratch;
    deposit_charge(s, t.grid, t.dom, c, 1, scratch);
    const auto g = gather(s, t.grid, t.dom, e);
    for (int comp = 0; comp < 3; ++comp) {
      double lhs = 0.0;
      double scale = 0.0;
      for (int p = 0; p <= t.dom.planes; ++p) {
        for (int idx = 0; idx < t.grid.mgrid; ++idx) {
          lhs += c.at(p, idx) * e.at(p, idx)[comp];
          scale += std::abs(c.at(p, idx) * e.at(p, idx)[comp]);
        }
      }
      double rhs = 0.0;
      for (int i = 0; i < n; ++i) rhs += s.weight()[i] * g[3 * i + comp];
      CHECK(std::abs(lhs - rhs) <= 1e-12 * scale);
    }
  }
}

TEST_CASE("zero field leaves weights and magnetic moments bitwise constant") {
  Toy t;
  test::Rng rng(4);
  ParticleStore s = central_particles(t.grid, 500, rng, 0.5);
  const std::vector<double> w0(s.weight().begin(), s.weight().end());
  const std::vector<double> mu0(s.mu().begin(), s.mu().end());
  const GridVector e = t.uniform_field({0.0, 0.0, 0.0});
  for (int step = 0; step < 20; ++step) {
    advance(s, t.grid, t.dom, e, t.phys, 0.06, 1);
    advance(s, t.grid, t.dom, e, t.phys, 0.06, 2);
  }
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(s.weight()[i] == w0[i]);
    CHECK(s.mu()[i] == mu0[i]);
  }
}

TEST_CASE("magnetic moment is invariant in a random field") {
  Toy t;
  test::Rng rng(5);
  ParticleStore s = central_particles(t.grid, 300, rng, 0.1);
  const std::vector<double> mu0(s.mu().begin(), s.mu().end());
  const GridVector e = t.random_field(rng);
  advance(s, t.grid, t.dom, e, t.phys, 0.06, 1);
  advance(s, t.grid, t.dom, e, t.phys, 0.06, 2);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(s.mu()[i] == mu0[i]);
}

TEST_CASE("zero field has no E x B drift") {
  Toy t;
  const DriftTerms d = drift_terms(t.grid, t.phys, 0.5, 0.7, 1.0, 0.4, {0.0, 0.0, 0.0});
  CHECK(d.vE == std::array<double, 3>{0.0, 0.0, 0.0});
  // |vd| scales as (v∥² + μB)/B
  const DriftTerms d2 = drift_terms(t.grid, t.phys, 0.5, 0.7, 2.0, 0.4, {0.0, 0.0, 0.0});
  const double b = equilibrium_at(t.grid.major_radius, 0.5, 0.7).b;
  const double ratio = (4.0 + 0.4 * b) / (1.0 + 0.4 * b);
  CHECK(std::hypot(d2.vd[0], d2.vd[1]) / std::hypot(d.vd[0], d.vd[1]) == doctest::Approx(ratio).epsilon(1e-12));
}

TEST_CASE("RK2 self-convergence under dt halving") {
  Toy t;
  test::Rng rng(6);
  for (int k = 0; k < 10; ++k) {
    const OrbitState s0{rng.uniform(0.4, 0.6), rng.uniform(0.0, kTwoPi), 0.0, rng.normal(), rng.uniform(0.0, 1.0), 0.0};
    const double T = 6.0;
    auto run = [&](double dt) { return integrate_orbit(t.grid, t.phys, s0, dt, static_cast<int>(std::lround(T / dt))); };
    const OrbitState a = run(0.06);
    const OrbitState b = run(0.03);
    const OrbitState c = run(0.015);
    const double ratio = orbit_distance(a, b) / orbit_distance(b, c);
    CHECK(ratio == doctest::Approx(4.0).epsilon(0.1));
  }
}

TEST_CASE("energy drift in zero field") {
  Toy t;
  test::Rng rng(7);
  for (int k = 0; k < 10; ++k) {
    const OrbitState s0{rng.uniform(0.4, 0.6), rng.uniform(0.0, kTwoPi), 0.0, rng.normal(), rng.uniform(0.0, 1.0), 0.0};
    const OrbitState s1 = integrate_orbit(t.grid, t.phys, s0, 0.06, 1000);
    CHECK(std::abs(energy(t.grid, s1) - energy(t.grid, s0)) / energy(t.grid, s0) < 1e-4);
    // local truncation error is third order
    auto local = [&](double dt) {
      return orbit_distance(integrate_orbit(t.grid, t.phys, s0, dt, 1), integrate_orbit(t.grid, t.phys, s0, dt / 1000, 1000));
    };
    CHECK(local(0.2) / local(0.1) == doctest::Approx(8.0).epsilon(0.15));
  }
}

TEST_CASE("field-line following without drifts") {
  Toy t;
  Physics ph = t.phys;
  ph.drifts = false;
  OrbitState s{0.5, 0.3, 0.0, 1.0, 0.0, 0.0};
  double dth = 0.0;
  double dze = 0.0;
  for (int k = 0; k < 500; ++k) {
    const OrbitState n = integrate_orbit(t.grid, ph, s, 0.06, 1);
    dth += angle_diff(n.theta, s.theta);
    dze += angle_diff(n.zeta, s.zeta);
    CHECK(n.r == s.r);
    s = n;
  }
  CHECK(std::abs(dth / dze - 1.0 / t.grid.q(0.5)) < 1e-10);
}

TEST_CASE("advance in a uniform field matches the standalone integrator") {
  Toy t;
  test::Rng rng(8);
  ParticleStore s = central_particles(t.grid, 50, rng, 0.01);
  const std::array<double, 3> ev{0.02, -0.03, 0.01};
  const GridVector e = t.uniform_field(ev);
  std::vector<OrbitState> ref;
  for (std::size_t i = 0; i < s.size(); ++i) {
    ref.push_back({s.r()[i], s.theta()[i], s.zeta()[i], s.vpar()[i], s.mu()[i], s.weight()[i]});
  }
  for (int step = 0; step < 10; ++step) {
    advance(s, t.grid, t.dom, e, t.phys, 0.06, 1);
    advance(s, t.grid, t.dom, e, t.phys, 0.06, 2);
  }
  for (std::size_t i = 0; i < s.size(); ++i) {
    const OrbitState o = integrate_orbit(t.grid, t.phys, ref[i], 0.06, 10, ev);
    CHECK(std::abs(o.r - s.r()[i]) < 1e-12);
    CHECK(std::abs(o.vpar - s.vpar()[i]) < 1e-12);
    CHECK(std::abs(o.w - s.weight()[i]) < 1e-12);
  }
}

TEST_CASE("total weight converges to a fine-step reference at second order") {
  Toy t;
  test::Rng rng(9);
  std::vector<OrbitState> p;
  for (int i = 0; i < 100; ++i) {
    p.push_back({rng.uniform(0.4, 0.6), rng.uniform(0.0, kTwoPi), rng.uniform(0.0, kTwoPi), rng.normal(),
                 rng.uniform(0.0, 1.0), rng.uniform(-0.01, 0.01)});
  }
  const std::array<double, 3> ev{0.5, -0.8, 0.3};
  const double T = 1.2;
  auto sum_w = [&](double dt) {
    double s = 0.0;
    for (const auto& o : p) s += integrate_orbit(t.grid, t.phys, o, dt, static_cast<int>(std::lround(T / dt)), ev).w;
    return s;
  };
  const double dt = 0.06;
  const double fine = sum_w(dt / 100);
  const double e1 = std::abs(sum_w(dt) - fine);
  const double e2 = std::abs(sum_w(dt / 2) - fine);
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.25));
}

TEST_CASE("reflection at the radial boundaries") {
  const double lo = 0.1;
  const double hi = 0.9;
  double r = hi + 0.01;
  CHECK(reflect(r, lo, hi) == 1);
  CHECK(r == doctest::Approx(hi - 0.01).epsilon(1e-15));
  r = lo - 0.02;
  CHECK(reflect(r, lo, hi) == 1);
  CHECK(r == doctest::Approx(lo + 0.02).epsilon(1e-15));
  r = 0.5;
  CHECK(reflect(r, lo, hi) == 0);
  CHECK(r == 0.5);
  r = hi + 0.9;  // mirror lands beyond the inner edge
  CHECK(reflect(r, lo, hi) == 2);
  CHECK(r == lo);

  Toy t;
  test::Rng rng(10);
  ParticleStore s;
  for (int i = 0; i < 1000; ++i) s.push_back(rng.uniform(-0.2, 1.2), 0.0, 0.0, 0.0, 0.0, 0.0);
  std::uint64_t want = 0;
  std::uint64_t want_double = 0;
  for (double x : s.r()) {
    want += x < t.grid.r_inner || x > t.grid.r_outer;
    want_double += x > 2.0 * t.grid.r_outer - t.grid.r_inner || x < 2.0 * t.grid.r_inner - t.grid.r_outer;
  }
  const std::vector<double> vp(s.vpar().begin(), s.vpar().end());
  const PushStats st = boundary(s, t.grid);
  CHECK(st.reflected == want);
  CHECK(st.double_crossings == want_double);
  for (double x : s.r()) {
    CHECK(x >= t.grid.r_inner);
    CHECK(x <= t.grid.r_outer);
  }
}

TEST_CASE("non-finite state aborts the push with the particle index") {
  Toy t;
  test::Rng rng(11);
  ParticleStore s = central_particles(t.grid, 20, rng, 0.1);
  s.vpar()[13] = std::numeric_limits<double>::infinity();
  const GridVector e = t.uniform_field({0.0, 0.0, 0.0});
  try {
    advance(s, t.grid, t.dom, e, t.phys, 0.06, 1);
    FAIL("no throw");
  } catch (const std::runtime_error& ex) {
    CHECK(std::string(ex.what()).find("13") != std::string::npos);
  }
}

TEST_CASE("split and fused push loops agree bitwise, for any worker count") {
  Toy t;
  test::Rng rng(12);
  const ParticleStore s0 = central_particles(t.grid, 3000, rng, 0.1);
  const GridVector e = t.random_field(rng);
  auto run = [&](bool split, int workers) {
#ifdef _OPENMP
    omp_set_num_threads(workers);
#endif
    ParticleStore s = s0;
    advance(s, t.grid, t.dom, e, t.phys, 0.06, 1, split);
    advance(s, t.grid, t.dom, e, t.phys, 0.06, 2, split);
    return s;
  };
  const ParticleStore ref = run(false, 1);
  CHECK(run(true, 1) == ref);
  CHECK(run(false, 4) == ref);
  CHECK(run(true, 3) == ref);
#ifdef _OPENMP
  omp_set_num_threads(1);
#endif
}

TEST_CASE("weights above the cap are counted, not altered") {
  Toy t;
  test::Rng rng(13);
  ParticleStore s = central_particles(t.grid, 10, rng, 0.1);
  s.weight()[2] = 5.0;
  const GridVector e = t.uniform_field({0.0, 0.0, 0.0});
  const PushStats st = advance(s, t.grid, t.dom, e, t.phys, 0.06, 1);
  CHECK(st.weight_over_cap == 1u);
  CHECK(s.weight()[2] == 5.0);
}
