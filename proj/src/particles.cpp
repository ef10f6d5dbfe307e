#include "gtc/particles.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>
#include <string>

#include "gtc/bytes.hpp"

namespace gtc {

std::string_view attr_name(Attr a) {
  static constexpr std::string_view names[kNumAttrs] = {"r",  "theta",  "zeta",  "vpar",  "mu",  "weight",
                                                        "r0", "theta0", "zeta0", "vpar0", "mu0", "weight0"};
  return names[static_cast<int>(a)];
}

ParticleStore::ParticleStore(std::size_t capacity) { reserve(capacity); }

void ParticleStore::reserve(std::size_t capacity) {
  if (capacity <= capacity_) return;
  for (auto& v : data_) v.resize(capacity);
  capacity_ = capacity;
}

void ParticleStore::resize(std::size_t count) {
  if (count > capacity_) reserve(std::max(count, capacity_ + capacity_ / 2));
  count_ = count;
}

void ParticleStore::push_back(double r, double theta, double zeta, double vpar, double mu, double w) {
  const std::size_t i = count_;
  resize(count_ + 1);
  const double live[kLiveAttrs] = {r, theta, zeta, vpar, mu, w};
  for (int a = 0; a < kLiveAttrs; ++a) {
    data_[a][i] = live[a];
    data_[a + kLiveAttrs][i] = live[a];
  }
}

void ParticleStore::append_from(const ParticleStore& other, std::size_t i) {
  const std::size_t dst = count_;
  resize(count_ + 1);
  for (int a = 0; a < kNumAttrs; ++a) data_[a][dst] = other.data_[a][i];
}

void ParticleStore::move_slot(std::size_t src, std::size_t dst) {
  for (int a = 0; a < kNumAttrs; ++a) data_[a][dst] = data_[a][src];
}

void ParticleStore::save_stage() {
  for (int a = 0; a < kLiveAttrs; ++a) {
    std::copy_n(data_[a].begin(), count_, data_[a + kLiveAttrs].begin());
  }
}

std::array<double, kNumAttrs> ParticleStore::row(std::size_t i) const {
  std::array<double, kNumAttrs> out{};
  for (int a = 0; a < kNumAttrs; ++a) out[a] = data_[a][i];
  return out;
}

bool ParticleStore::operator==(const ParticleStore& o) const {
  if (count_ != o.count_) return false;
  for (int a = 0; a < kNumAttrs; ++a) {
    if (!std::equal(data_[a].begin(), data_[a].begin() + count_, o.data_[a].begin())) return false;
  }
  return true;
}

std::uint64_t rank_seed(std::uint64_t seed, int rank) {
  // splitmix64 over (seed, rank)
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (static_cast<std::uint64_t>(rank) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::size_t load_count(const TorusGrid& grid, const RunParams& p, const RankDomain& dom) {
  const auto& w = dom.window;
  const std::size_t points = static_cast<std::size_t>(grid.igrid[w.last_owned + 1] - grid.igrid[w.first_owned]);
  const std::size_t total = points * static_cast<std::size_t>(dom.planes) * static_cast<std::size_t>(p.micell);
  const std::size_t reps = static_cast<std::size_t>(p.npartdom);
  const std::size_t base = total / reps;
  const std::size_t extra = total % reps;
  return base + (static_cast<std::size_t>(dom.replica) < extra ? 1 : 0);
}

ParticleStore load(const TorusGrid& grid, const RunParams& p, const RankDomain& dom) {
  const std::size_t n = load_count(grid, p, dom);
  ParticleStore store(n + n / 4 + 16);

  std::mt19937_64 rng(rank_seed(p.seed, dom.rank));
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  const double r_lo = dom.window.r_lo;
  const double r_hi = dom.window.r_hi;
  const double r2_lo = r_lo * r_lo;
  const double r2_span = r_hi * r_hi - r2_lo;
  const double j_max = jacobian(grid.major_radius, r_hi, 0.0);
  const double zeta_span = dom.zeta_hi - dom.zeta_lo;
  constexpr double kVcut2 = 25.0;

  for (std::size_t k = 0; k < n; ++k) {
    double r = 0.0;
    double theta = 0.0;
    for (;;) {
      r = std::sqrt(r2_lo + r2_span * uniform(rng));
      theta = kTwoPi * uniform(rng);
      if (r >= r_hi) continue;
      if (uniform(rng) * j_max <= jacobian(grid.major_radius, r, theta)) break;
    }
    double zeta = dom.zeta_lo + zeta_span * uniform(rng);
    if (zeta >= dom.zeta_hi) zeta = dom.zeta_lo;

    double vpar = 0.0;
    double vperp2 = 0.0;
    do {
      vpar = normal(rng);
      vperp2 = -2.0 * std::log(1.0 - uniform(rng));
    } while (vpar * vpar + vperp2 > kVcut2);

    const double b = equilibrium_at(grid.major_radius, r, theta).b;
    const double mu = 0.5 * vperp2 / b;
    const double w = p.weight_noise * (2.0 * uniform(rng) - 1.0);
    store.push_back(r, theta, zeta, vpar, mu, w);
  }
  return store;
}

int radial_bin(const TorusGrid& grid, const RadialWindow& window, double r) {
  const double x = (r - grid.radius[window.first_owned]) / grid.delta_r;
  const int nb = window.owned_rings();
  int b = static_cast<int>(std::floor(x));
  return std::clamp(b, 0, nb - 1);
}

std::vector<int> bin_radial(ParticleStore& store, const TorusGrid& grid, const RadialWindow& window) {
  const std::size_t n = store.size();
  const int nb = window.owned_rings();
  std::vector<int> bins(n);
  std::vector<std::size_t> offsets(nb + 1, 0);
  const auto r = store.r();
  for (std::size_t i = 0; i < n; ++i) {
    bins[i] = radial_bin(grid, window, r[i]);
    ++offsets[bins[i] + 1];
  }
  for (int b = 0; b < nb; ++b) offsets[b + 1] += offsets[b];

  std::vector<std::size_t> dest(n);
  for (std::size_t i = 0; i < n; ++i) dest[i] = offsets[bins[i]]++;

  std::vector<double> tmp(n);
  for (int a = 0; a < kNumAttrs; ++a) {
    double* col = store.raw(static_cast<Attr>(a));
    for (std::size_t i = 0; i < n; ++i) tmp[dest[i]] = col[i];
    std::copy(tmp.begin(), tmp.end(), col);
  }
  std::vector<int> sorted(n);
  for (std::size_t i = 0; i < n; ++i) sorted[dest[i]] = bins[i];
  return sorted;
}

std::array<GyroPoint, 4> gyro_points(double r, double theta, double rho) {
  const double dtheta = rho / r;
  return {GyroPoint{r + rho, theta}, GyroPoint{r, theta + dtheta}, GyroPoint{r - rho, theta},
          GyroPoint{r, theta - dtheta}};
}

std::array<GyroPoint, 4> gyro_points(const ParticleStore& store, std::size_t i, const TorusGrid& grid) {
  const double r = store.r()[i];
  const double theta = store.theta()[i];
  const double b = equilibrium_at(grid.major_radius, r, theta).b;
  return gyro_points(r, theta, gyroradius(grid, store.mu()[i], b));
}

MemoryFootprint domain_footprint(const TorusGrid& grid, int micell) {
  constexpr double mib = 1024.0 * 1024.0;
  constexpr double gib = mib * 1024.0;
  const double m = static_cast<double>(grid.mgrid);
  return {m * 2.0 * sizeof(double) / mib, m * 2.0 * 3.0 * sizeof(double) / mib,
          m * micell * static_cast<double>(ParticleStore::bytes_per_particle()) / gib};
}

std::vector<std::byte> snapshot(const ParticleStore& store) {
  bytes::Writer w;
  w.put(static_cast<std::uint64_t>(store.size()));
  w.put(static_cast<std::uint32_t>(kNumAttrs));
  for (int a = 0; a < kNumAttrs; ++a) {
    const auto name = attr_name(static_cast<Attr>(a));
    w.put(static_cast<std::uint32_t>(name.size()));
    w.put_raw(std::as_bytes(std::span(name.data(), name.size())));
  }
  for (int a = 0; a < kNumAttrs; ++a) w.put_doubles(store.attr(static_cast<Attr>(a)));
  return w.take();
}

ParticleStore read_snapshot(std::span<const std::byte> data) {
  bytes::Reader rd(data);
  const auto count = rd.get<std::uint64_t>();
  const auto nattr = rd.get<std::uint32_t>();
  if (nattr != kNumAttrs) throw std::runtime_error("snapshot: unexpected attribute count");
  for (int a = 0; a < kNumAttrs; ++a) {
    const auto len = rd.get<std::uint32_t>();
    const auto raw = rd.get_raw(len);
    const std::string name(reinterpret_cast<const char*>(raw.data()), raw.size());
    if (name != attr_name(static_cast<Attr>(a))) throw std::runtime_error("snapshot: attribute order mismatch");
  }
  ParticleStore store(count);
  store.resize(count);
  for (int a = 0; a < kNumAttrs; ++a) rd.get_doubles(store.attr(static_cast<Attr>(a)));
  return store;
}

}  // namespace gtc
