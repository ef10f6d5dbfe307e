#include "gtc/diagnostics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gtc {

namespace {

constexpr std::string_view kKernelNames[kNumKernels] = {"charge", "poisson", "field", "smooth",
                                                        "push",   "shift",   "sort"};

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_num(std::string_view s) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw std::invalid_argument("csv: bad number '" + std::string(s) + "'");
  }
  return v;
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string_view kernel_name(Kernel k) { return kKernelNames[static_cast<int>(k)]; }

Kernel parse_kernel(std::string_view name) {
  for (int k = 0; k < kNumKernels; ++k) {
    if (kKernelNames[k] == name) return static_cast<Kernel>(k);
  }
  throw std::invalid_argument("unknown kernel '" + std::string(name) + "'");
}

void KernelTimings::record(Kernel kernel, int rank, int step, double seconds) {
  if (!(seconds >= 0.0) || !std::isfinite(seconds)) {
    throw std::invalid_argument("timing: seconds must be finite and non-negative");
  }
  rows_.push_back({step, kernel, rank, seconds});
}

std::array<double, kNumKernels> KernelTimings::totals() const {
  std::array<double, kNumKernels> t{};
  for (const auto& r : rows_) t[static_cast<int>(r.kernel)] += r.seconds;
  return t;
}

std::string KernelTimings::to_csv() const {
  std::string out(kTimingHeader);
  out += '\n';
  for (const auto& r : rows_) {
    out += std::to_string(r.step);
    out += ',';
    out += kernel_name(r.kernel);
    out += ',';
    out += std::to_string(r.rank);
    out += ',';
    out += g17(r.seconds);
    out += '\n';
  }
  return out;
}

KernelTimings KernelTimings::from_csv(std::string_view text) {
  KernelTimings t;
  const auto lines = split(text, '\n');
  if (lines.empty() || lines[0] != kTimingHeader) throw std::invalid_argument("timing csv: bad header");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = split(lines[i], ',');
    if (f.size() != 4) throw std::invalid_argument("timing csv: expected 4 columns");
    t.record(parse_kernel(f[1]), parse_num<int>(f[2]), parse_num<int>(f[0]), parse_num<double>(f[3]));
  }
  return t;
}

std::string format_history_row(const HistoryRow& r) {
  return std::to_string(r.step) + ',' + g17(r.time) + ',' + g17(r.field_energy) + ',' + g17(r.chi_gb) + ',' +
         g17(r.total_weight) + ',' + std::to_string(r.particle_count);
}

std::string history_csv(std::span<const HistoryRow> rows) {
  std::string out(kHistoryHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += format_history_row(r);
    out += '\n';
  }
  return out;
}

std::vector<HistoryRow> parse_history_csv(std::string_view text) {
  const auto lines = split(text, '\n');
  if (lines.empty() || lines[0] != kHistoryHeader) throw std::invalid_argument("history csv: bad header");
  std::vector<HistoryRow> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = split(lines[i], ',');
    if (f.size() != 6) throw std::invalid_argument("history csv: expected 6 columns");
    out.push_back({parse_num<int>(f[0]), parse_num<double>(f[1]), parse_num<double>(f[2]), parse_num<double>(f[3]),
                   parse_num<double>(f[4]), parse_num<std::uint64_t>(f[5])});
  }
  return out;
}

ChiSums chi_partial(const ParticleStore& store, const TorusGrid& grid, std::span<const double> efield) {
  if (efield.size() != 3 * store.size()) throw std::invalid_argument("chi: gathered field size mismatch");
  ChiSums s;
  const auto r = store.r();
  const auto th = store.theta();
  const auto vp = store.vpar();
  const auto mu = store.mu();
  const auto w = store.weight();
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (r[i] < kChiAnnulusLo || r[i] > kChiAnnulusHi) continue;
    const double b = equilibrium_at(grid.major_radius, r[i], th[i]).b;
    const double ekin = 0.5 * vp[i] * vp[i] + mu[i] * b;
    const double ver = efield[3 * i + 1] / (grid.a_over_rho * b);
    s.flux += w[i] * ekin * ver;
    s.norm += std::abs(w[i]);
  }
  return s;
}

ChiSums chi_partial(const ParticleStore& store, const TorusGrid& grid, const RankDomain& dom, const GridVector& e) {
  ChiSums s;
  const auto r = store.r();
  const auto th = store.theta();
  const auto vp = store.vpar();
  const auto mu = store.mu();
  const auto w = store.weight();
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (r[i] < kChiAnnulusLo || r[i] > kChiAnnulusHi) continue;
    const auto ei = gather_one(store, i, grid, dom, e);
    const double b = equilibrium_at(grid.major_radius, r[i], th[i]).b;
    const double ekin = 0.5 * vp[i] * vp[i] + mu[i] * b;
    s.flux += w[i] * ekin * ei[1] / (grid.a_over_rho * b);
    s.norm += std::abs(w[i]);
  }
  return s;
}

double chi_from_sums(const TorusGrid& grid, const Physics& phys, const ChiSums& sums) {
  if (sums.norm == 0.0 || phys.rlt == 0.0) return 0.0;
  constexpr double n0 = 1.0;
  const double grad_t = phys.rlt / grid.major_radius;
  const double rho = grid.rho_thermal();
  const double chi_gb = rho * rho * std::sqrt(1.0 / phys.tau);
  return sums.flux / (n0 * grad_t * sums.norm) / chi_gb;
}

double field_energy_partial(const TorusGrid& grid, std::span<const double> volume, const GridVector& e) {
  const auto& w = e.window();
  double s = 0.0;
  for (int p = 0; p + 1 < e.planes(); ++p) {
    for (int i = w.first_owned; i <= w.last_owned; ++i) {
      const int base = grid.igrid[i];
      for (int j = 0; j < grid.mtheta[i]; ++j) {
        const double* v = e.at(p, base + j);
        s += volume[base + j] * 0.5 * (v[0] * v[0] + v[1] * v[1]);
      }
    }
  }
  return s;
}

namespace {

struct LineFit {
  double slope = 0.0;
  double r2 = 0.0;
};

// Least squares over [a, b) from prefix sums of x, y, x², xy, y².
struct PrefixFit {
  std::vector<double> sx{0.0}, sy{0.0}, sxx{0.0}, sxy{0.0}, syy{0.0};

  void push(double x, double y) {
    sx.push_back(sx.back() + x);
    sy.push_back(sy.back() + y);
    sxx.push_back(sxx.back() + x * x);
    sxy.push_back(sxy.back() + x * y);
    syy.push_back(syy.back() + y * y);
  }

  LineFit fit(std::size_t a, std::size_t b) const {
    const double n = static_cast<double>(b - a);
    const double mx = (sx[b] - sx[a]) / n;
    const double my = (sy[b] - sy[a]) / n;
    const double vxx = (sxx[b] - sxx[a]) / n - mx * mx;
    const double vxy = (sxy[b] - sxy[a]) / n - mx * my;
    const double vyy = (syy[b] - syy[a]) / n - my * my;
    LineFit f;
    if (vxx <= 0.0) return f;
    f.slope = vxy / vxx;
    f.r2 = vyy > 0.0 ? vxy * vxy / (vxx * vyy) : 1.0;
    return f;
  }
};

}  // namespace

GrowthAnalysis analyze_growth(std::span<const HistoryRow> rows, int min_window, double min_r2) {
  GrowthAnalysis out;
  std::vector<int> step;
  PrefixFit pf;
  for (const auto& r : rows) {
    if (!(r.field_energy > 0.0) || !std::isfinite(r.field_energy)) continue;
    step.push_back(r.step);
    pf.push(r.step, std::log(r.field_energy));
  }
  const std::size_t n = step.size();
  if (n < 2) return out;
  // smallest b with step[b-1] - step[a] >= min_window, or n + 1 if none
  auto window_end = [&](std::size_t a) {
    std::size_t b = a + 2;
    while (b <= n && step[b - 1] - step[a] < min_window) ++b;
    return b;
  };
  // windows start and end on a coarse stride; the fits themselves are O(1)
  const std::size_t stride = std::max<std::size_t>(1, n / 400);
  std::size_t phase_end = 0;
  for (std::size_t a = 0; a < n; a += stride) {
    for (std::size_t b = window_end(a); b <= n; b += stride) {
      const LineFit f = pf.fit(a, b);
      if (f.r2 < min_r2 || f.slope <= 0.0 || (out.found && f.slope <= out.rate)) continue;
      out.found = true;
      out.first_step = step[a];
      out.last_step = step[b - 1];
      out.rate = f.slope;
      out.r2 = f.r2;
      phase_end = b - 1;
    }
  }
  std::size_t tail = n - 1;
  while (tail > 0 && step.back() - step[tail] < min_window) --tail;
  out.trailing_rate = pf.fit(tail, n).slope;
  if (!out.found) return out;
  for (std::size_t a = phase_end; a < n; ++a) {
    const std::size_t b = window_end(a);
    if (b > n) break;
    const LineFit f = pf.fit(a, b);
    if (f.slope < 0.1 * out.rate) {
      out.saturated = true;
      out.saturation_step = step[a];
      out.saturation_rate = f.slope;
      break;
    }
  }
  return out;
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace gtc
