#include "gtc/transport.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "gtc/bytes.hpp"

namespace gtc {

std::vector<RankTopology> build_topology(int ntor, int nrad, int npart) {
  if (ntor < 1 || nrad < 1 || npart < 1) throw TransportError("topology: communicator sizes must be >= 1");
  const int n = ntor * nrad * npart;
  auto id = [=](int t, int r, int p) { return t + ntor * (r + nrad * p); };
  std::vector<RankTopology> out(n);
  for (int p = 0; p < npart; ++p) {
    for (int r = 0; r < nrad; ++r) {
      for (int t = 0; t < ntor; ++t) {
        RankTopology& tp = out[id(t, r, p)];
        tp.rank = id(t, r, p);
        tp.toroidal = t;
        tp.radial = r;
        tp.replica = p;
        tp.left = id((t + ntor - 1) % ntor, r, p);
        tp.right = id((t + 1) % ntor, r, p);
        tp.inner = r > 0 ? id(t, r - 1, p) : -1;
        tp.outer = r + 1 < nrad ? id(t, r + 1, p) : -1;
        for (int k = 0; k < ntor; ++k) tp.toroidal_group.push_back(id(k, r, p));
        for (int k = 0; k < nrad; ++k) tp.radial_group.push_back(id(t, k, p));
        for (int k = 0; k < npart; ++k) tp.particle_group.push_back(id(t, r, k));
      }
    }
  }
  return out;
}

void Fabric::check_rank(int r) const {
  if (r < 0 || r >= nranks_) throw TransportError("fabric: rank " + std::to_string(r) + " out of range");
}

void Fabric::send(int src, int dst, Tag tag, std::vector<std::byte> payload) {
  check_rank(src);
  check_rank(dst);
  auto& c = counters_[static_cast<int>(tag)];
  ++c.messages;
  c.bytes += payload.size();
  queues_[{src, dst, static_cast<int>(tag)}].push_back(std::move(payload));
}

std::vector<std::byte> Fabric::recv(int dst, int src, Tag tag) {
  check_rank(src);
  check_rank(dst);
  auto it = queues_.find({src, dst, static_cast<int>(tag)});
  if (it == queues_.end() || it->second.empty()) {
    throw TransportError("fabric: no message from " + std::to_string(src) + " to " + std::to_string(dst));
  }
  auto msg = std::move(it->second.front());
  it->second.pop_front();
  return msg;
}

std::optional<std::vector<std::byte>> Fabric::try_recv(int dst, int src, Tag tag) {
  check_rank(src);
  check_rank(dst);
  auto it = queues_.find({src, dst, static_cast<int>(tag)});
  if (it == queues_.end() || it->second.empty()) return std::nullopt;
  auto msg = std::move(it->second.front());
  it->second.pop_front();
  return msg;
}

bool Fabric::idle() const {
  return std::all_of(queues_.begin(), queues_.end(), [](const auto& kv) { return kv.second.empty(); });
}

void Fabric::reset_counters() {
  for (auto& c : counters_) c = Counter{};
}

namespace {

std::vector<std::byte> pack_doubles(std::span<const double> v) {
  bytes::Writer w;
  w.put(static_cast<std::uint64_t>(v.size()));
  w.put_doubles(v);
  return w.take();
}

std::vector<double> unpack_doubles(std::span<const std::byte> msg) {
  bytes::Reader rd(msg);
  const auto n = rd.get<std::uint64_t>();
  std::vector<double> out(n);
  rd.get_doubles(out);
  return out;
}

template <typename Combine>
void allreduce(Fabric& fabric, std::span<const int> group, std::span<const std::span<double>> buffers,
               Combine combine) {
  if (group.size() != buffers.size()) throw TransportError("allreduce: one buffer per member required");
  if (group.empty()) return;
  const std::size_t len = buffers[0].size();
  for (const auto& b : buffers) {
    if (b.size() != len) throw TransportError("allreduce: length mismatch");
  }
  if (group.size() == 1) return;
  const int root = group[0];
  for (std::size_t m = 1; m < group.size(); ++m) fabric.send(group[m], root, Tag::Collective, pack_doubles(buffers[m]));
  std::span<double> acc = buffers[0];
  for (std::size_t m = 1; m < group.size(); ++m) {
    const auto part = unpack_doubles(fabric.recv(root, group[m], Tag::Collective));
    for (std::size_t i = 0; i < len; ++i) acc[i] = combine(acc[i], part[i]);
  }
  for (std::size_t m = 1; m < group.size(); ++m) fabric.send(root, group[m], Tag::Collective, pack_doubles(acc));
  for (std::size_t m = 1; m < group.size(); ++m) {
    const auto result = unpack_doubles(fabric.recv(group[m], root, Tag::Collective));
    std::copy(result.begin(), result.end(), buffers[m].begin());
  }
}

struct RingRange {
  int lo;
  int hi;
  bool empty() const { return hi < lo; }
};

// Rings held as ghosts by `holder` and owned by `owner`.
RingRange ghost_overlap(const RadialWindow& holder, const RadialWindow& owner) {
  return {std::max(holder.first_ghost, owner.first_owned), std::min(holder.last_ghost, owner.last_owned)};
}

std::vector<double> gather_rings(const TorusGrid& grid, const FieldView& f, RingRange rr, int p0, int p1) {
  const int g0 = grid.igrid[rr.lo];
  const int g1 = grid.igrid[rr.hi + 1];
  const std::size_t n = static_cast<std::size_t>(g1 - g0) * f.components;
  std::vector<double> out;
  out.reserve(n * (p1 - p0));
  for (int p = p0; p < p1; ++p) {
    const double* src = f.plane_ptr(p) + static_cast<std::size_t>(g0 - f.window.offset) * f.components;
    out.insert(out.end(), src, src + n);
  }
  return out;
}

template <typename Op>
void scatter_rings(const TorusGrid& grid, const FieldView& f, RingRange rr, int p0, int p1,
                   std::span<const double> data, Op op) {
  const int g0 = grid.igrid[rr.lo];
  const int g1 = grid.igrid[rr.hi + 1];
  const std::size_t n = static_cast<std::size_t>(g1 - g0) * f.components;
  if (data.size() != n * (p1 - p0)) throw TransportError("ghost exchange: size mismatch");
  std::size_t k = 0;
  for (int p = p0; p < p1; ++p) {
    double* dst = f.plane_ptr(p) + static_cast<std::size_t>(g0 - f.window.offset) * f.components;
    for (std::size_t i = 0; i < n; ++i) op(dst[i], data[k++]);
  }
}

void check_fields(const std::vector<RankTopology>& topo, std::span<const FieldView> fields) {
  if (fields.size() != topo.size()) throw TransportError("exchange: one field per rank required");
}

}  // namespace

void allreduce_sum(Fabric& fabric, std::span<const int> group, std::span<const std::span<double>> buffers) {
  allreduce(fabric, group, buffers, [](double a, double b) { return a + b; });
}

void allreduce_max(Fabric& fabric, std::span<const int> group, std::span<const std::span<double>> buffers) {
  allreduce(fabric, group, buffers, [](double a, double b) { return std::max(a, b); });
}

FieldView view(GridScalar& f) { return {f.values(), f.window(), f.planes(), 1}; }
FieldView view(GridVector& f) { return {f.values(), f.window(), f.planes(), 3}; }

void exchange_radial(Fabric& fabric, const TorusGrid& grid, const std::vector<RankTopology>& topo,
                     std::span<const FieldView> fields, GhostMode mode, int p0, int p1) {
  check_fields(topo, fields);
  const int n = static_cast<int>(topo.size());
  if (mode == GhostMode::Add) {
    for (int a = 0; a < n; ++a) {
      for (int b : topo[a].radial_group) {
        if (b == a) continue;
        const RingRange rr = ghost_overlap(fields[a].window, fields[b].window);
        if (rr.empty()) continue;
        fabric.send(a, b, Tag::RadialGhost, pack_doubles(gather_rings(grid, fields[a], rr, p0, p1)));
        const std::vector<double> zeros((grid.igrid[rr.hi + 1] - grid.igrid[rr.lo]) * fields[a].components *
                                        (p1 - p0));
        scatter_rings(grid, fields[a], rr, p0, p1, zeros, [](double& d, double s) { d = s; });
      }
    }
    for (int b = 0; b < n; ++b) {
      for (int a : topo[b].radial_group) {
        if (a == b) continue;
        const RingRange rr = ghost_overlap(fields[a].window, fields[b].window);
        if (rr.empty()) continue;
        const auto data = unpack_doubles(fabric.recv(b, a, Tag::RadialGhost));
        scatter_rings(grid, fields[b], rr, p0, p1, data, [](double& d, double s) { d += s; });
      }
    }
  } else {
    for (int b = 0; b < n; ++b) {
      for (int a : topo[b].radial_group) {
        if (a == b) continue;
        const RingRange rr = ghost_overlap(fields[a].window, fields[b].window);
        if (rr.empty()) continue;
        fabric.send(b, a, Tag::RadialGhost, pack_doubles(gather_rings(grid, fields[b], rr, p0, p1)));
      }
    }
    for (int a = 0; a < n; ++a) {
      for (int b : topo[a].radial_group) {
        if (a == b) continue;
        const RingRange rr = ghost_overlap(fields[a].window, fields[b].window);
        if (rr.empty()) continue;
        const auto data = unpack_doubles(fabric.recv(a, b, Tag::RadialGhost));
        scatter_rings(grid, fields[a], rr, p0, p1, data, [](double& d, double s) { d = s; });
      }
    }
  }
}

void exchange_toroidal(Fabric& fabric, const std::vector<RankTopology>& topo, std::span<const FieldView> fields,
                       GhostMode mode) {
  check_fields(topo, fields);
  const int n = static_cast<int>(topo.size());
  auto plane_span = [](const FieldView& f, int p) {
    return std::span<double>(f.plane_ptr(p), static_cast<std::size_t>(f.window.size) * f.components);
  };
  if (mode == GhostMode::Add) {
    for (int a = 0; a < n; ++a) {
      auto top = plane_span(fields[a], fields[a].planes - 1);
      fabric.send(a, topo[a].right, Tag::ToroidalGhost, pack_doubles(top));
      std::fill(top.begin(), top.end(), 0.0);
    }
    for (int b = 0; b < n; ++b) {
      const auto data = unpack_doubles(fabric.recv(b, topo[b].left, Tag::ToroidalGhost));
      auto bottom = plane_span(fields[b], 0);
      if (data.size() != bottom.size()) throw TransportError("toroidal exchange: size mismatch");
      for (std::size_t i = 0; i < data.size(); ++i) bottom[i] += data[i];
    }
  } else {
    for (int b = 0; b < n; ++b) {
      fabric.send(b, topo[b].left, Tag::ToroidalGhost, pack_doubles(plane_span(fields[b], 0)));
    }
    for (int a = 0; a < n; ++a) {
      const auto data = unpack_doubles(fabric.recv(a, topo[a].right, Tag::ToroidalGhost));
      auto top = plane_span(fields[a], fields[a].planes - 1);
      if (data.size() != top.size()) throw TransportError("toroidal exchange: size mismatch");
      std::copy(data.begin(), data.end(), top.begin());
    }
  }
}

std::vector<std::vector<double>> fetch_lower_planes(Fabric& fabric, const std::vector<RankTopology>& topo,
                                                    std::span<const FieldView> fields) {
  check_fields(topo, fields);
  const int n = static_cast<int>(topo.size());
  for (int a = 0; a < n; ++a) {
    const FieldView& f = fields[a];
    const std::span<const double> last(f.plane_ptr(f.planes - 2), static_cast<std::size_t>(f.window.size) * f.components);
    fabric.send(a, topo[a].right, Tag::ToroidalGhost, pack_doubles(last));
  }
  std::vector<std::vector<double>> out(n);
  for (int b = 0; b < n; ++b) out[b] = unpack_doubles(fabric.recv(b, topo[b].left, Tag::ToroidalGhost));
  return out;
}

void particle_reduce_grid(Fabric& fabric, const std::vector<RankTopology>& topo, std::span<const FieldView> fields) {
  check_fields(topo, fields);
  for (const auto& t : topo) {
    if (t.replica != 0) continue;
    std::vector<std::span<double>> bufs;
    for (int m : t.particle_group) bufs.push_back(fields[m].data);
    allreduce_sum(fabric, t.particle_group, bufs);
  }
}

std::vector<std::byte> pack_particles(const ParticleStore& store, std::span<const std::size_t> indices) {
  bytes::Writer w;
  w.put(kParticleMagic);
  w.put(static_cast<std::uint32_t>(kNumAttrs));
  w.put(static_cast<std::uint64_t>(indices.size()));
  std::vector<double> column(indices.size());
  for (int a = 0; a < kNumAttrs; ++a) {
    const double* src = store.raw(static_cast<Attr>(a));
    for (std::size_t k = 0; k < indices.size(); ++k) column[k] = src[indices[k]];
    w.put_doubles(column);
  }
  return w.take();
}

std::size_t unpack_particles(std::span<const std::byte> msg, ParticleStore& store) {
  bytes::Reader rd(msg);
  if (rd.get<std::uint32_t>() != kParticleMagic) throw TransportError("particle message: bad magic");
  if (rd.get<std::uint32_t>() != kNumAttrs) throw TransportError("particle message: bad attribute count");
  const auto n = static_cast<std::size_t>(rd.get<std::uint64_t>());
  if (rd.remaining() != n * kNumAttrs * sizeof(double)) throw TransportError("particle message: size mismatch");
  const std::size_t base = store.size();
  store.resize(base + n);
  for (int a = 0; a < kNumAttrs; ++a) {
    rd.get_doubles(std::span<double>(store.raw(static_cast<Attr>(a)) + base, n));
  }
  return n;
}

int toroidal_owner(const ShiftContext& ctx, double zeta) {
  const double wedge = ctx.grid->delta_zeta * ctx.planes_per_rank;
  int t = static_cast<int>(wrap_angle(zeta) / wedge);
  return std::min(t, ctx.toroidal_ranks - 1);
}

namespace {

// Removes flagged particles by moving tail survivors into the holes.
void backfill(ParticleStore& store, std::vector<char>& moving, std::span<const std::size_t> holes) {
  std::size_t last = store.size();
  for (std::size_t h : holes) {
    while (last > 0 && moving[last - 1]) --last;
    if (h >= last) break;
    store.move_slot(last - 1, h);
    moving[h] = 0;
    moving[last - 1] = 1;
    --last;
  }
  store.resize(store.size() - holes.size());
}

enum Direction { kRight, kLeft, kOuter, kInner };

void receive_into(ParticleStore& store, std::span<const std::byte> msg, std::size_t limit) {
  bytes::Reader rd(msg);
  rd.get<std::uint32_t>();
  rd.get<std::uint32_t>();
  const auto n = rd.get<std::uint64_t>();
  if (limit != 0 && store.size() + n > limit) throw TransportError("shift: receive exceeds particle capacity");
  unpack_particles(msg, store);
}

}  // namespace

ShiftStats shift(Fabric& fabric, const std::vector<RankTopology>& topo, const ShiftContext& ctx,
                 std::span<ParticleStore* const> stores) {
  const int n = static_cast<int>(topo.size());
  if (static_cast<int>(stores.size()) != n) throw TransportError("shift: one store per rank required");
  const int guard = ctx.toroidal_ranks + static_cast<int>(ctx.windows.size());
  ShiftStats stats;

  std::vector<int> everyone(n);
  std::iota(everyone.begin(), everyone.end(), 0);

  auto phase = [&](bool toroidal) {
    std::uint64_t moved = 0;
    for (int a = 0; a < n; ++a) {
      ParticleStore& s = *stores[a];
      const auto& tp = topo[a];
      std::vector<std::size_t> out[2];
      std::vector<std::size_t> holes;
      std::vector<char> moving(s.size(), 0);
      const auto r = s.r();
      const auto z = s.zeta();
      for (std::size_t i = 0; i < s.size(); ++i) {
        int dir = -1;
        if (toroidal) {
          const int owner = toroidal_owner(ctx, z[i]);
          if (owner != tp.toroidal) {
            const int d = (owner - tp.toroidal + ctx.toroidal_ranks) % ctx.toroidal_ranks;
            dir = 2 * d <= ctx.toroidal_ranks ? kRight : kLeft;
          }
        } else {
          const int owner = radial_owner(ctx.windows, r[i]);
          if (owner > tp.radial) dir = kOuter;
          if (owner < tp.radial) dir = kInner;
        }
        if (dir < 0) continue;
        out[dir % 2].push_back(i);
        holes.push_back(i);
        moving[i] = 1;
      }
      const int dest[2] = {toroidal ? tp.right : tp.outer, toroidal ? tp.left : tp.inner};
      const Tag tag = toroidal ? Tag::ToroidalShift : Tag::RadialShift;
      for (int d = 0; d < 2; ++d) {
        if (out[d].empty()) continue;
        auto msg = pack_particles(s, out[d]);
        (toroidal ? stats.toroidal_bytes : stats.radial_bytes) += msg.size();
        (toroidal ? stats.toroidal_moved : stats.radial_moved) += out[d].size();
        moved += out[d].size();
        fabric.send(a, dest[d], tag, std::move(msg));
      }
      backfill(s, moving, holes);
    }
    for (int b = 0; b < n; ++b) {
      const auto& tp = topo[b];
      const int src[2] = {toroidal ? tp.left : tp.inner, toroidal ? tp.right : tp.outer};
      const Tag tag = toroidal ? Tag::ToroidalShift : Tag::RadialShift;
      for (int d = 0; d < 2; ++d) {
        if (src[d] < 0 || (d == 1 && src[1] == src[0])) continue;
        while (auto msg = fabric.try_recv(b, src[d], tag)) receive_into(*stores[b], *msg, ctx.capacity_limit);
      }
    }
    return moved;
  };

  for (;;) {
    if (stats.iterations >= guard) throw TransportError("shift: particles still moving after iteration guard");
    ++stats.iterations;
    if (ctx.toroidal_ranks > 1) phase(true);
    if (ctx.windows.size() > 1) phase(false);

    // global count of particles still outside their owner
    std::vector<std::vector<double>> remaining(n, std::vector<double>(1, 0.0));
    for (int a = 0; a < n; ++a) {
      const ParticleStore& s = *stores[a];
      double c = 0.0;
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (toroidal_owner(ctx, s.zeta()[i]) != topo[a].toroidal ||
            radial_owner(ctx.windows, s.r()[i]) != topo[a].radial) {
          c += 1.0;
        }
      }
      remaining[a][0] = c;
    }
    std::vector<std::span<double>> bufs(remaining.begin(), remaining.end());
    allreduce_sum(fabric, everyone, bufs);
    if (remaining[0][0] == 0.0) break;
  }
  return stats;
}

}  // namespace gtc
