// Acceptance gate: one PASS/FAIL line per criterion. `acceptance 4 11`
// runs a subset; `--itg-out DIR` keeps the long run's history.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "gtc/deposit.hpp"
#include "gtc/fieldsolve.hpp"
#include "gtc/push.hpp"
#include "gtc/simulation.hpp"
#include "support.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace gtc;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// A at a coarser grid; a/ρ shrinks with mpsi so Δr/ρ stays that of A.
RunParams scaled_a() {
  const RunParams a = preset("A");
  RunParams p = a;
  p.mpsi = 32;
  p.mthetamax = 128;
  p.ntoroidal = 8;
  p.micell = 20;
  p.a_over_rho = a.a_over_rho * p.mpsi / a.mpsi;
  return p;
}

std::filesystem::path g_itg_out;

Outcome grid_presets() {
  const auto t0 = std::chrono::steady_clock::now();
  const int want[4] = {32449, 128893, 513785, 2051567};
  const char* names[4] = {"A", "B", "C", "D"};
  int got[4];
  bool ok = true;
  double worst = 0.0;
  for (int k = 0; k < 4; ++k) {
    got[k] = build_grid(preset(names[k])).mgrid;
    const double rel = std::abs(got[k] - want[k]) / static_cast<double>(want[k]);
    worst = std::max(worst, rel);
    ok = ok && rel <= 0.005;
  }
  double worst_ratio = 0.0;
  for (int k = 1; k < 4; ++k) {
    const double dev = std::abs(static_cast<double>(got[k]) / got[k - 1] / 4.0 - 1.0);
    worst_ratio = std::max(worst_ratio, dev);
    ok = ok && dev <= 0.02;
  }
  const double t = seconds_since(t0);
  ok = ok && t < 1.0;
  return {ok, fmt("mgrid %d %d %d %d, worst %.3f%%, ratio dev %.3f%%, %.3fs", got[0], got[1], got[2], got[3],
                  100 * worst, 100 * worst_ratio, t)};
}

Outcome memory_accounting() {
  const MemoryFootprint a = domain_footprint(build_grid(preset("A")), preset("A").micell);
  const MemoryFootprint d = domain_footprint(build_grid(preset("D")), preset("D").micell);
  auto within = [](double x, double ref) { return std::abs(x - ref) <= 0.05 * ref; };
  const bool ok = within(a.chargei_mib, 0.5) && within(a.evector_mib, 1.49) && within(d.chargei_mib, 31.30) &&
                  within(d.evector_mib, 93.91);
  return {ok, fmt("A %.3f/%.3f MiB, D %.2f/%.2f MiB", a.chargei_mib, a.evector_mib, d.chargei_mib, d.evector_mib)};
}

Outcome cyclone_constraints() {
  const TorusGrid g = build_grid(preset("A"));
  const double q = g.q(0.5);
  const double s = magnetic_shear(g, 0.5);
  const double e = std::exp(-1.0);
  const double p0 = gradient_profile(0.5);
  const double p1 = gradient_profile(0.15);
  const double p2 = gradient_profile(0.85);
  const bool ok = q == 1.4 && std::abs(s - 0.78) <= 1e-12 && std::abs(p0 - 1.0) <= 1e-12 && std::abs(p1 - e) <= 1e-12 &&
                  std::abs(p2 - e) <= 1e-12;
  return {ok, fmt("q=%.17g shear-0.78=%.2e prof=%.15f/%.15f/%.15f", q, s - 0.78, p0, p1, p2)};
}

Outcome charge_conservation() {
  const auto t0 = std::chrono::steady_clock::now();
  RunParams p = scaled_a();
  p.nsteps = 50;
  Simulation sim(p);
  sim.run(p.nsteps);
  double worst = 0.0;
  std::uint64_t dropped = 0;
  for (const ChargeCheck& c : sim.charge_checks()) {
    worst = std::max(worst, std::abs(c.grid_sum - c.weight_sum) / std::abs(c.weight_sum));
    dropped += c.dropped_points;
  }
  const double t = seconds_since(t0);
  const bool ok = sim.charge_checks().size() == 2u * p.nsteps && worst <= 1e-12 && t < 120.0;
  return {ok, fmt("%zu cycles, worst rel %.2e, dropped points %llu, %.1fs", sim.charge_checks().size(), worst,
                  static_cast<unsigned long long>(dropped), t)};
}

Outcome parallel_equivalence() {
  RunParams base = scaled_a();
  base.micell = 5;
  base.toroidal_domains = 1;
  base.nghost = 8;  // covers the largest gyroradius, so no rank drops a gyro-point
  Simulation ref_sim(base);
  ParticleStore all;
  for (const auto& s : ref_sim.stores()) {
    for (std::size_t i = 0; i < s.size(); ++i) all.append_from(s, i);
  }
  std::uint64_t dropped = 0;
  auto charge = [&](int tor, int rad, int workers) {
    RunParams p = base;
    p.toroidal_domains = tor;
    p.nradial_domains = rad;
    p.workers = workers;
    Simulation sim(p);
    test::distribute(sim, all);
    dropped += sim.charge_phase().dropped_points;
    return test::global_field(sim.grid(), sim.domains(), sim.charge());
  };
  const auto ref = charge(1, 1, 1);
  double worst = 0.0;
  for (int w : {2, 8}) worst = std::max(worst, test::max_rel_diff(ref, charge(1, 1, w)));
  for (auto [t, r] : {std::pair{2, 2}, std::pair{4, 2}}) {
    for (int w : {1, 2, 8}) worst = std::max(worst, test::max_rel_diff(ref, charge(t, r, w)));
  }
#ifdef _OPENMP
  omp_set_num_threads(1);
#endif
  return {worst <= 1e-12, fmt("%zu particles, worst rel %.2e, dropped points %llu", all.size(), worst,
                              static_cast<unsigned long long>(dropped))};
}

Outcome solver_oracle() {
  const RunParams p = test::toy_params();
  const TorusGrid g = build_grid(p);
  const RankDomain d = test::whole_domain(g);
  const auto topo = build_topology(1, 1, 1);
  Fabric fab(1);
  const GyroOperator op = build_gyro_operator(g, {1.0, p.tau});
  test::Rng rng(6);
  GridScalar rhs(d.window, d.planes + 1);
  for (int pl = 0; pl < d.planes; ++pl) {
    for (int i = 1; i < g.mpsi; ++i) {
      for (int j = 0; j < g.mtheta[i]; ++j) rhs.at(pl, g.index(i, j)) = rng.uniform(-1.0, 1.0);
    }
  }
  sync_closure_nodes(g, rhs);
  GridScalar phi(d.window, d.planes + 1);
  const GridScalar* rp = &rhs;
  GridScalar* pp = &phi;
  const PoissonReport rep = poisson(fab, g, topo, op, {p.jacobi_omega, 1e-13, 2000}, std::span(&rp, 1), std::span(&pp, 1));
  bool monotone = true;
  for (std::size_t k = 1; k < rep.residuals.size(); ++k) monotone = monotone && rep.residuals[k] <= rep.residuals[k - 1];
  const auto a = dense_system(g, op);
  double worst = 0.0;
  for (int pl = 0; pl < d.planes; ++pl) {
    std::vector<double> b(g.mgrid, 0.0);
    std::vector<double> got(g.mgrid);
    for (int idx = 0; idx < g.mgrid; ++idx) {
      const int ring = g.ring_of[idx];
      const bool closure = g.node_of[idx] == g.mtheta[ring];
      if (!closure && ring > 0 && ring < g.mpsi) b[idx] = rhs.at(pl, idx);
      got[idx] = phi.at(pl, idx);
    }
    worst = std::max(worst, test::max_rel_diff(test::dense_solve(a, b), got));
  }
  return {rep.converged && monotone && worst <= 1e-8,
          fmt("%d iterations, monotone=%s, worst rel %.2e", rep.iterations, monotone ? "yes" : "no", worst)};
}

Outcome integrator_order() {
  const RunParams p = preset("A");
  const TorusGrid g = build_grid(p);
  const Physics ph = physics_from(p);
  test::Rng rng(7);
  double lo = 1e9;
  double hi = 0.0;
  double drift = 0.0;
  auto dist = [](const OrbitState& a, const OrbitState& b) {
    return std::abs(a.r - b.r) + std::abs(std::remainder(a.theta - b.theta, kTwoPi)) +
           std::abs(std::remainder(a.zeta - b.zeta, kTwoPi)) + std::abs(a.vpar - b.vpar);
  };
  for (int k = 0; k < 20; ++k) {
    const OrbitState s0{rng.uniform(0.3, 0.7), rng.uniform(0.0, kTwoPi), 0.0, rng.normal(), rng.uniform(0.0, 1.0), 0.0};
    const OrbitState a = integrate_orbit(g, ph, s0, p.dt, 100);
    const OrbitState b = integrate_orbit(g, ph, s0, p.dt / 2, 200);
    const OrbitState c = integrate_orbit(g, ph, s0, p.dt / 4, 400);
    const double ratio = dist(a, b) / dist(b, c);
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
    const OrbitState e = integrate_orbit(g, ph, s0, p.dt, 1000);
    const double e0 = kinetic_energy(g, s0.r, s0.theta, s0.vpar, s0.mu);
    drift = std::max(drift, std::abs(kinetic_energy(g, e.r, e.theta, e.vpar, e.mu) - e0) / e0);
  }
  const bool ok = lo >= 3.6 && hi <= 4.4 && drift < 1e-4;
  return {ok, fmt("ratio in [%.3f, %.3f], max energy drift %.2e", lo, hi, drift)};
}

Outcome adjointness() {
  const TorusGrid g = build_grid(test::toy_params());
  const RankDomain d = test::whole_domain(g);
  test::Rng rng(8);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    ParticleStore s;
    for (int i = 0; i < 1000; ++i) test::push_random_particle(s, g, rng, rng.uniform(-1.0, 1.0));
    GridVector e(d.window, d.planes + 1);
    for (double& x : e.values()) x = rng.uniform(-1.0, 1.0);
    GridScalar c(d.window, d.planes + 1);
    DepositScratch scratch;
    deposit_charge(s, g, d, c, 1, scratch);
    const auto ge = gather(s, g, d, e);
    for (int comp = 0; comp < 3; ++comp) {
      double lhs = 0.0;
      double scale = 0.0;
      for (int pl = 0; pl <= d.planes; ++pl) {
        for (int idx = 0; idx < g.mgrid; ++idx) {
          lhs += c.at(pl, idx) * e.at(pl, idx)[comp];
          scale += std::abs(c.at(pl, idx) * e.at(pl, idx)[comp]);
        }
      }
      double rhs = 0.0;
      for (std::size_t i = 0; i < s.size(); ++i) rhs += s.weight()[i] * ge[3 * i + comp];
      worst = std::max(worst, std::abs(lhs - rhs) / scale);
    }
  }
  return {worst <= 1e-12, fmt("worst |<Dw,E> - <w,GE>| / scale = %.2e", worst)};
}

Outcome shift_correctness() {
  RunParams p = test::toy_params();
  p.ntoroidal = 8;
  const TorusGrid g = build_grid(p);
  const int T = 4;
  const int R = 2;
  const auto topo = build_topology(T, R, 1);
  ShiftContext ctx;
  ctx.grid = &g;
  ctx.windows = radial_partition(g, R);
  ctx.toroidal_ranks = T;
  ctx.planes_per_rank = g.ntoroidal / T;
  test::Rng rng(9);
  std::vector<ParticleStore> stores(T * R);
  std::vector<ParticleStore*> ptrs;
  // start on owners, then displace by up to three wedges and across annuli
  const double wedge = kTwoPi / T;
  for (const auto& t : topo) {
    const RadialWindow& w = ctx.windows[t.radial];
    for (int i = 0; i < 12500; ++i) {
      double z = (t.toroidal + rng.uniform()) * wedge + rng.integer(-3, 3) * wedge;
      const double r = rng.coin() ? rng.uniform(w.r_lo, w.r_hi) : rng.uniform(g.r_inner, g.r_outer);
      stores[t.rank].push_back(r, rng.uniform(0.0, kTwoPi), wrap_angle(z), rng.normal(), rng.uniform(0.0, 1.0),
                               rng.uniform(-1.0, 1.0));
    }
  }
  for (auto& s : stores) ptrs.push_back(&s);
  auto totals = [&] {
    std::size_t n = 0;
    double w = 0.0;
    for (const auto& s : stores) {
      n += s.size();
      for (double x : s.weight()) w += x;
    }
    return std::pair{n, w};
  };
  std::multiset<double> before;
  for (const auto& s : stores) before.insert(s.weight().begin(), s.weight().end());
  const auto [n0, w0] = totals();
  Fabric fab(T * R);
  const ShiftStats st = shift(fab, topo, ctx, ptrs);
  std::size_t wrong = 0;
  for (const auto& t : topo) {
    const ParticleStore& s = stores[t.rank];
    for (std::size_t i = 0; i < s.size(); ++i) {
      // brute-force owner: the wedge by division, the annulus by linear scan
      const int to = std::min(T - 1, static_cast<int>(s.zeta()[i] / wedge));
      int ro = 0;
      while (ro + 1 < R && s.r()[i] >= ctx.windows[ro].r_hi) ++ro;
      wrong += to != t.toroidal || ro != t.radial;
    }
  }
  std::multiset<double> after;
  for (const auto& s : stores) after.insert(s.weight().begin(), s.weight().end());
  const auto [n1, w1] = totals();
  const ShiftStats again = shift(fab, topo, ctx, ptrs);
  const std::uint64_t moved2 = again.toroidal_moved + again.radial_moved;
  const bool ok = wrong == 0 && n1 == n0 && before == after && moved2 == 0;
  return {ok, fmt("%zu particles, %d passes, %llu/%llu moved, misplaced %zu, sum w diff %.1e, second pass moved %llu", n0,
                  st.iterations, static_cast<unsigned long long>(st.toroidal_moved),
                  static_cast<unsigned long long>(st.radial_moved), wrong, w1 - w0,
                  static_cast<unsigned long long>(moved2))};
}

Outcome determinism() {
  RunParams p = scaled_a();
  p.nsteps = 20;
  const auto dir = std::filesystem::temp_directory_path() / "gtcp_acceptance_det";
  std::string text[2];
  for (int k = 0; k < 2; ++k) {
    const auto out = dir / std::to_string(k);
    std::filesystem::remove_all(out);
    std::ostringstream err;
    if (run_main(p, {}, out, err) != 0) return {false, "run failed: " + err.str()};
    text[k] = read_text(out / "history.csv");
  }
  std::filesystem::remove_all(dir);
  return {text[0] == text[1] && !text[0].empty(), fmt("%zu bytes each, identical=%s", text[0].size(),
                                                      text[0] == text[1] ? "yes" : "no")};
}

RunParams itg_params() {
  RunParams p = scaled_a();
  p.ntoroidal = 4;
  p.micell = 50;
  p.nsteps = 2000;
  return p;
}

Outcome itg_behaviour() {
  const auto t0 = std::chrono::steady_clock::now();
  const RunParams p = itg_params();
  Simulation sim(p);
  sim.run(p.nsteps);
  const double t = seconds_since(t0);
  if (!g_itg_out.empty()) {
    std::filesystem::create_directories(g_itg_out);
    write_text(g_itg_out / "history.csv", history_csv(sim.history()));
  }
  bool finite = true;
  for (const auto& r : sim.history()) finite = finite && std::isfinite(r.field_energy) && std::isfinite(r.chi_gb);
  const GrowthAnalysis a = analyze_growth(sim.history());
  const bool ok = finite && a.found && a.saturated && t < 1800.0;
  return {ok, fmt("linear phase steps %d-%d rate %.4g/step R2 %.4f; slope %.3g (%.1f%%) from step %d; "
                  "trailing %.3g (%.1f%%); %.0fs",
                  a.first_step, a.last_step, a.rate, a.r2, a.saturation_rate,
                  a.rate > 0 ? 100 * a.saturation_rate / a.rate : 0.0, a.saturation_step, a.trailing_rate,
                  a.rate > 0 ? 100 * a.trailing_rate / a.rate : 0.0, t)};
}

Outcome kernel_split() {
  RunParams p = scaled_a();
  p.ntoroidal = 4;
  p.micell = 10;
  p.nsteps = 20;
  auto totals = [&](int micell) {
    RunParams q = p;
    q.micell = micell;
    Simulation sim(q);
    sim.run(q.nsteps);
    return sim.timings().totals();
  };
  auto part = [](const std::array<double, kNumKernels>& t, std::initializer_list<Kernel> ks) {
    double s = 0.0;
    for (Kernel k : ks) s += t[static_cast<int>(k)];
    return s;
  };
  totals(p.micell);  // warm-up
  const auto a = totals(p.micell);
  const auto b = totals(2 * p.micell);
  const double ga = part(a, {Kernel::Poisson, Kernel::Field, Kernel::Smooth});
  const double gb = part(b, {Kernel::Poisson, Kernel::Field, Kernel::Smooth});
  const double pa = part(a, {Kernel::Charge, Kernel::Push, Kernel::Shift});
  const double pb = part(b, {Kernel::Charge, Kernel::Push, Kernel::Shift});
  const double grid_change = std::abs(gb / ga - 1.0);
  const double particle_ratio = pb / pa;
  return {grid_change < 0.15 && particle_ratio >= 1.7,
          fmt("grid kernels %.3fs -> %.3fs (%+.1f%%), particle kernels %.3fs -> %.3fs (x%.2f)", ga, gb,
              100 * (gb / ga - 1.0), pa, pb, particle_ratio)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"grid presets", grid_presets},
      {"memory accounting", memory_accounting},
      {"cyclone constraints", cyclone_constraints},
      {"charge conservation", charge_conservation},
      {"parallel equivalence", parallel_equivalence},
      {"solver oracle", solver_oracle},
      {"integrator order", integrator_order},
      {"adjointness", adjointness},
      {"shift correctness", shift_correctness},
      {"determinism", determinism},
      {"ITG growth and saturation", itg_behaviour},
      {"kernel scaling split", kernel_split},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--itg-out") == 0 && i + 1 < argc) {
      g_itg_out = argv[++i];
    } else {
      only.insert(std::stoi(argv[i]));
    }
  }
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %2d %-27s %s  %s\n", id, criteria[k].first, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
