#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <sstream>

#include "gtc/simulation.hpp"
#include "support.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace gtc;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("gtcp_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

bool bitwise_equal(const std::vector<HistoryRow>& a, const std::vector<HistoryRow>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a[i];
    const auto& y = b[i];
    if (x.step != y.step || x.particle_count != y.particle_count) return false;
    for (auto [u, v] : {std::pair{x.time, y.time}, std::pair{x.field_energy, y.field_energy},
                        std::pair{x.chi_gb, y.chi_gb}, std::pair{x.total_weight, y.total_weight}}) {
      if (std::memcmp(&u, &v, sizeof(double)) != 0) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("a smoke run writes both outputs") {
  const auto dir = scratch_dir("smoke");
  std::ostringstream err;
  REQUIRE(run_main(test::smoke_params(), {}, dir, err) == 0);
  const auto hist = parse_history_csv(read_text(dir / "history.csv"));
  CHECK(hist.size() == 10u);
  const auto tim = KernelTimings::from_csv(read_text(dir / "timing.csv"));
  CHECK_FALSE(tim.rows().empty());
  for (const auto& r : hist) {
    CHECK(std::isfinite(r.field_energy));
    CHECK(std::isfinite(r.chi_gb));
    CHECK(std::isfinite(r.total_weight));
    CHECK(r.particle_count > 0u);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("run_main reports bad overrides without throwing") {
  const auto dir = scratch_dir("bad");
  std::ostringstream err;
  CHECK(run_main(test::smoke_params(), {"nosuchkey=1"}, dir, err) != 0);
  CHECK(err.str().find("nosuchkey") != std::string::npos);
  CHECK(run_main(test::smoke_params(), {"mpsi=-3"}, dir, err) != 0);
}

TEST_CASE("zero steps write headers only") {
  const auto dir = scratch_dir("zero");
  RunParams p = test::smoke_params();
  p.nsteps = 0;
  std::ostringstream err;
  REQUIRE(run_main(p, {}, dir, err) == 0);
  CHECK(read_text(dir / "history.csv") == std::string(kHistoryHeader) + "\n");
  CHECK(read_text(dir / "timing.csv") == std::string(kTimingHeader) + "\n");
  std::filesystem::remove_all(dir);
}

TEST_CASE("repeated runs are bitwise identical") {
  RunParams p = test::smoke_params();
  p.nsteps = 4;
  Simulation a(p);
  a.run(p.nsteps);
  Simulation b(p);
  b.run(p.nsteps);
  CHECK(bitwise_equal(a.history(), b.history()));
  CHECK(a.stores() == b.stores());
}

TEST_CASE("particle count is conserved and weights evolve continuously") {
  RunParams p = test::smoke_params();
  p.nsteps = 6;
  p.toroidal_domains = 2;
  p.nradial_domains = 2;
  Simulation sim(p);
  const auto n0 = sim.global_particles();
  sim.run(p.nsteps);
  const auto& h = sim.history();
  for (const auto& r : h) CHECK(r.particle_count == n0);
  for (std::size_t i = 1; i < h.size(); ++i) {
    // weights start at 1e-3 noise; one step moves Σw by a small fraction of Σ|w|
    CHECK(std::abs(h[i].total_weight - h[i - 1].total_weight) < 1e-3 * static_cast<double>(n0));
  }
  for (const auto& c : sim.charge_checks()) {
    CHECK(std::abs(c.grid_sum + c.dropped_weight - c.weight_sum) <= 1e-10 * static_cast<double>(n0) * 1e-3 + 1e-12);
  }
}

TEST_CASE("worker count and rank layout leave the physics unchanged") {
  RunParams p = test::smoke_params();
  p.nsteps = 3;
  p.nghost = 8;  // wide enough that no gyro-point leaves a window
  auto run = [&](int tor, int rad, int rep, int threads) {
#ifdef _OPENMP
    omp_set_num_threads(threads);
#endif
    RunParams q = p;
    q.toroidal_domains = tor;
    q.nradial_domains = rad;
    q.npartdom = rep;
    Simulation sim(q);
    // identical global particle set for every layout
    Simulation ref(p);
    ParticleStore all;
    for (const auto& s : ref.stores()) {
      for (std::size_t i = 0; i < s.size(); ++i) all.append_from(s, i);
    }
    test::distribute(sim, all);
    sim.run(q.nsteps);
    CHECK(sim.counters().dropped_points == 0u);
    CHECK(sim.counters().gather_clamped == 0u);
    return sim.history();
  };
  const auto base = run(1, 1, 1, 1);
  for (auto [t, r, q, w] : {std::tuple{1, 1, 1, 3}, std::tuple{2, 2, 1, 1}, std::tuple{4, 1, 2, 2}}) {
    CAPTURE(t);
    CAPTURE(r);
    CAPTURE(q);
    const auto h = run(t, r, q, w);
    REQUIRE(h.size() == base.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
      CHECK(h[i].particle_count == base[i].particle_count);
      CHECK(h[i].field_energy == doctest::Approx(base[i].field_energy).epsilon(1e-8));
      CHECK(h[i].total_weight == doctest::Approx(base[i].total_weight).epsilon(1e-8).scale(1e-3 * h[i].particle_count));
      CHECK(h[i].chi_gb == doctest::Approx(base[i].chi_gb).epsilon(1e-6).scale(1e-3));
    }
  }
#ifdef _OPENMP
  omp_set_num_threads(1);
#endif
}
