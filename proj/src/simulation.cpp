#include "gtc/simulation.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gtc {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

template <typename T>
std::vector<T*> pointers(std::vector<T>& v) {
  std::vector<T*> out;
  out.reserve(v.size());
  for (auto& x : v) out.push_back(&x);
  return out;
}

template <typename T>
std::vector<const T*> const_pointers(const std::vector<T>& v) {
  std::vector<const T*> out;
  out.reserve(v.size());
  for (const auto& x : v) out.push_back(&x);
  return out;
}

}  // namespace

Simulation::Simulation(const RunParams& params)
    : params_(params), grid_(build_grid(params)), fabric_(params.total_ranks()) {
#ifdef _OPENMP
  omp_set_num_threads(params_.workers);
#endif
  const int t_ranks = params_.toroidal_ranks();
  const int planes = params_.planes_per_rank();
  windows_ = radial_partition(grid_, params_.nradial_domains);
  topo_ = build_topology(t_ranks, params_.nradial_domains, params_.npartdom);
  phys_ = physics_from(params_);
  op_ = build_gyro_operator(grid_, {1.0, params_.tau});
  zonal_ = ZonalSolver(grid_, op_);
  volume_ = node_volume_fraction(grid_);
  markers_ = marker_density(grid_, static_cast<double>(grid_.mgrid) * params_.micell);

  shift_ctx_.grid = &grid_;
  shift_ctx_.windows = windows_;
  shift_ctx_.toroidal_ranks = t_ranks;
  shift_ctx_.planes_per_rank = planes;

  const int n = static_cast<int>(topo_.size());
  doms_.resize(n);
  for (int k = 0; k < n; ++k) {
    RankDomain& d = doms_[k];
    d.rank = k;
    d.toroidal_index = topo_[k].toroidal;
    d.radial_index = topo_[k].radial;
    d.replica = topo_[k].replica;
    d.planes = planes;
    d.first_plane = d.toroidal_index * planes;
    d.zeta_lo = d.first_plane * grid_.delta_zeta;
    d.zeta_hi = d.toroidal_index + 1 == t_ranks ? kTwoPi : (d.first_plane + planes) * grid_.delta_zeta;
    d.window = windows_[d.radial_index];
    stores_.push_back(load(grid_, params_, d));
    charge_.emplace_back(d.window, planes + 1);
    density_.emplace_back(d.window, planes + 1);
    phi_.emplace_back(d.window, planes + 1);
    efield_.emplace_back(d.window, planes + 1);
  }
  scratch_.resize(n);
}

std::uint64_t Simulation::global_particles() const {
  std::uint64_t s = 0;
  for (const auto& st : stores_) s += st.size();
  return s;
}

double Simulation::global_weight() const {
  double s = 0.0;
  for (const auto& st : stores_) {
    for (double w : st.weight()) s += w;
  }
  return s;
}

ChargeCheck Simulation::charge_kernel(Acc& acc) {
  const int n = static_cast<int>(topo_.size());
  ChargeCheck check;
  for (int k = 0; k < n; ++k) {
    const auto t0 = Clock::now();
    const DepositStats st = deposit_charge(stores_[k], grid_, doms_[k], charge_[k], params_.workers, scratch_[k]);
    acc[k][static_cast<int>(Kernel::Charge)] += seconds_since(t0);
    check.dropped_points += st.dropped_points;
    check.clamped_points += st.clamped_points;
    check.dropped_weight += st.dropped_weight;
  }
  auto t0 = Clock::now();
  merge_charge(fabric_, grid_, topo_, pointers(charge_));
  for (int k = 0; k < n; ++k) charge_to_density(grid_, markers_, charge_[k], density_[k]);
  const auto profiles = flux_surface_average(fabric_, grid_, topo_, const_pointers(density_));
  zonal_profile_ = profiles[0];
  for (int k = 0; k < n; ++k) remove_zonal(grid_, profiles[k], density_[k]);
  const double share = seconds_since(t0) / n;
  for (int k = 0; k < n; ++k) acc[k][static_cast<int>(Kernel::Charge)] += share;

  for (int k = 0; k < n; ++k) {
    if (topo_[k].replica == 0) check.grid_sum += owned_sum(grid_, charge_[k]);
    for (double w : stores_[k].weight()) check.weight_sum += w;
  }
  counters_.dropped_points += check.dropped_points;
  counters_.deposit_clamped += check.clamped_points;
  return check;
}

ChargeCheck Simulation::charge_phase() {
  Acc acc(topo_.size());
  return charge_kernel(acc);
}

void Simulation::diagnose(Acc&) {
  const int n = static_cast<int>(topo_.size());
  std::vector<std::array<double, 5>> part(n);
  for (int k = 0; k < n; ++k) {
    const ChiSums cs = chi_partial(stores_[k], grid_, doms_[k], efield_[k]);
    double wsum = 0.0;
    for (double w : stores_[k].weight()) wsum += w;
    const double fe = topo_[k].replica == 0 ? field_energy_partial(grid_, volume_, efield_[k]) : 0.0;
    part[k] = {fe, cs.flux, cs.norm, wsum, static_cast<double>(stores_[k].size())};
  }
  std::vector<std::span<double>> bufs;
  std::vector<int> group;
  for (int k = 0; k < n; ++k) {
    bufs.emplace_back(part[k]);
    group.push_back(k);
  }
  allreduce_sum(fabric_, group, bufs);
  HistoryRow row;
  row.step = step_;
  row.time = step_ * params_.dt;
  row.field_energy = part[0][0] / grid_.ntoroidal;
  row.chi_gb = chi_from_sums(grid_, phys_, {part[0][1], part[0][2]});
  row.total_weight = part[0][3];
  row.particle_count = static_cast<std::uint64_t>(std::llround(part[0][4]));
  history_.push_back(row);
}

void Simulation::cycle(int stage, bool diag, Acc& acc) {
  const int n = static_cast<int>(topo_.size());
  auto collective = [&](Kernel kern, auto&& fn) {
    const auto t0 = Clock::now();
    fn();
    const double share = seconds_since(t0) / n;
    for (int k = 0; k < n; ++k) acc[k][static_cast<int>(kern)] += share;
  };

  checks_.push_back(charge_kernel(acc));
  collective(Kernel::Smooth, [&] { smooth(fabric_, grid_, topo_, pointers(density_)); });
  collective(Kernel::Poisson, [&] {
    const JacobiOptions jo{params_.jacobi_omega, params_.jacobi_tol, params_.jacobi_max_iter};
    const PoissonReport rep = poisson(fabric_, grid_, topo_, op_, jo, const_pointers(density_), pointers(phi_));
    if (!rep.converged) ++counters_.poisson_unconverged;
    counters_.poisson_max_iterations = std::max(counters_.poisson_max_iterations, rep.iterations);
    const auto phi00 = zonal_.solve(zonal_profile_);
    for (int k = 0; k < n; ++k) add_zonal(grid_, phi00, phi_[k]);
  });
  collective(Kernel::Smooth, [&] { smooth(fabric_, grid_, topo_, pointers(phi_)); });
  collective(Kernel::Field, [&] { field(fabric_, grid_, topo_, pointers(phi_), pointers(efield_)); });
  if (diag) diagnose(acc);

  for (int k = 0; k < n; ++k) {
    const auto t0 = Clock::now();
    const PushStats st = advance(stores_[k], grid_, doms_[k], efield_[k], phys_, params_.dt, stage, params_.split_push);
    acc[k][static_cast<int>(Kernel::Push)] += seconds_since(t0);
    counters_.reflected += st.reflected;
    counters_.double_crossings += st.double_crossings;
    counters_.gather_clamped += st.clamped_points;
    counters_.weight_over_cap += st.weight_over_cap;
  }
  collective(Kernel::Shift, [&] {
    const ShiftStats ss = shift(fabric_, topo_, shift_ctx_, pointers(stores_));
    counters_.toroidal_shift_bytes += ss.toroidal_bytes;
    counters_.radial_shift_bytes += ss.radial_bytes;
    counters_.toroidal_moved += ss.toroidal_moved;
    counters_.radial_moved += ss.radial_moved;
  });
}

void Simulation::step() {
  const int n = static_cast<int>(topo_.size());
  Acc acc(n, std::array<double, kNumKernels>{});
  if (params_.bin_every > 0 && step_ % params_.bin_every == 0) {
    for (int k = 0; k < n; ++k) {
      const auto t0 = Clock::now();
      bin_radial(stores_[k], grid_, doms_[k].window);
      acc[k][static_cast<int>(Kernel::Sort)] += seconds_since(t0);
    }
  }
  const bool diag = step_ % params_.diag_every == 0;
  cycle(1, diag, acc);
  cycle(2, false, acc);
  for (int k = 0; k < n; ++k) {
    for (int kern = 0; kern < kNumKernels; ++kern) timings_.record(static_cast<Kernel>(kern), k, step_, acc[k][kern]);
  }
  ++step_;
}

void Simulation::run(int nsteps) {
  for (int s = 0; s < nsteps; ++s) step();
}

int run_main(RunParams params, const std::vector<std::string>& overrides, const std::filesystem::path& out_dir,
             std::ostream& err) {
  try {
    apply_overrides(params, overrides);
    validate(params);
    std::filesystem::create_directories(out_dir);
    Simulation sim(params);
    sim.run(params.nsteps);
    write_text(out_dir / "timing.csv", sim.timings().to_csv());
    write_text(out_dir / "history.csv", history_csv(sim.history()));
    return 0;
  } catch (const std::exception& e) {
    err << "gtcp: " << e.what() << '\n';
    return 1;
  }
}

RunParams rung_params(const RunParams& base, int rung) {
  RunParams p = base;
  const int f = 1 << rung;
  p.mpsi = base.mpsi * f;
  p.mthetamax = base.mthetamax * f;
  p.a_over_rho = base.a_over_rho * f;
  p.nradial_domains = base.nradial_domains * f * f;
  return p;
}

std::vector<RungReport> weak_scaling(const RunParams& base, int rungs) {
  std::vector<RungReport> out;
  for (int k = 0; k < rungs; ++k) {
    RungReport rep;
    rep.rung = k;
    rep.params = rung_params(base, k);
    try {
      Simulation sim(rep.params);
      const auto& doms = sim.domains();
      for (int d = 0; d < rep.params.nradial_domains; ++d) {
        const auto& w = doms[d * rep.params.toroidal_ranks()].window;
        rep.points_per_radial_rank.push_back(sim.grid().igrid[w.last_owned + 1] - sim.grid().igrid[w.first_owned]);
      }
      rep.particles_per_rank = static_cast<double>(sim.global_particles()) / rep.params.total_ranks();
      sim.run(rep.params.nsteps);
      const auto totals = sim.timings().totals();
      const double denom = static_cast<double>(std::max(1, rep.params.nsteps)) * rep.params.total_ranks();
      for (int kern = 0; kern < kNumKernels; ++kern) rep.mean_seconds[kern] = totals[kern] / denom;
      rep.ok = true;
    } catch (const std::exception& e) {
      rep.error = e.what();
    }
    out.push_back(std::move(rep));
  }
  return out;
}

std::string weak_scaling_csv(const std::vector<RungReport>& reports) {
  std::string out = "rung,kernel,mean_s,rel_to_first\n";
  const RungReport* first = nullptr;
  for (const auto& r : reports) {
    if (r.ok) {
      first = &r;
      break;
    }
  }
  char buf[160];
  for (const auto& r : reports) {
    if (!r.ok) continue;
    for (int k = 0; k < kNumKernels; ++k) {
      const double base = first->mean_seconds[k];
      const double rel = base > 0.0 ? r.mean_seconds[k] / base : 0.0;
      std::snprintf(buf, sizeof(buf), "%d,%s,%.9g,%.6g\n", r.rung, std::string(kernel_name(static_cast<Kernel>(k))).c_str(),
                    r.mean_seconds[k], rel);
      out += buf;
    }
  }
  return out;
}

}  // namespace gtc
