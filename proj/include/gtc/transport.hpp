#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "gtc/fields.hpp"
#include "gtc/geometry.hpp"
#include "gtc/particles.hpp"

namespace gtc {

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Logical-rank identity and neighbour links. Ranks are numbered
/// toroidal-fastest: rank = t + T·(r + R·p).
struct RankTopology {
  int rank = 0;
  int toroidal = 0;
  int radial = 0;
  int replica = 0;
  int left = 0;    // toroidal neighbours, periodic
  int right = 0;
  int inner = -1;  // radial neighbours, -1 at the edge
  int outer = -1;
  std::vector<int> toroidal_group;
  std::vector<int> radial_group;
  std::vector<int> particle_group;
};

std::vector<RankTopology> build_topology(int ntoroidal, int nradial, int npartdom);

enum class Tag : int { RadialGhost, ToroidalGhost, ToroidalShift, RadialShift, Collective };

/// In-process message fabric: FIFO channel per (src, dst, tag). Ranks are
/// stepped by the caller in bulk-synchronous phases, so every receive is
/// preceded by its matching send within the same phase.
class Fabric {
 public:
  explicit Fabric(int nranks) : nranks_(nranks) {}

  int size() const { return nranks_; }
  void send(int src, int dst, Tag tag, std::vector<std::byte> payload);
  std::vector<std::byte> recv(int dst, int src, Tag tag);
  /// Receive if a message is queued; valid once the sending phase is done.
  std::optional<std::vector<std::byte>> try_recv(int dst, int src, Tag tag);
  bool idle() const;

  struct Counter {
    std::uint64_t messages = 0;
    std::uint64_t bytes = 0;
  };
  const Counter& counter(Tag tag) const { return counters_[static_cast<int>(tag)]; }
  void reset_counters();

 private:
  void check_rank(int r) const;

  int nranks_;
  std::map<std::tuple<int, int, int>, std::deque<std::vector<std::byte>>> queues_;
  Counter counters_[5];
};

/// Element-wise sum over a group. `buffers[m]` belongs to `group[m]`; the
/// root (group[0]) folds contributions left to right in group order and
/// broadcasts, so every member ends with bitwise-identical values.
void allreduce_sum(Fabric& fabric, std::span<const int> group, std::span<const std::span<double>> buffers);
void allreduce_max(Fabric& fabric, std::span<const int> group, std::span<const std::span<double>> buffers);

/// Non-owning view of a rank-local grid field.
struct FieldView {
  std::span<double> data;
  RadialWindow window;
  int planes = 0;
  int components = 1;

  double* plane_ptr(int p) const { return data.data() + static_cast<std::size_t>(p) * window.size * components; }
};

FieldView view(GridScalar& f);
FieldView view(GridVector& f);

enum class GhostMode { Add, Copy };

/// Radial ghost exchange between ranks of each radial communicator.
/// Add: ghost-ring values are sent to the owning rank and added there,
/// then zeroed locally. Copy: owners overwrite the ghost rings of every
/// rank holding them. Planes [plane_begin, plane_end) take part.
void exchange_radial(Fabric& fabric, const TorusGrid& grid, const std::vector<RankTopology>& topo,
                     std::span<const FieldView> fields, GhostMode mode, int plane_begin, int plane_end);

/// Toroidal exchange of the duplicated plane. Add: each rank's last plane
/// is added into its right neighbour's plane 0 and zeroed. Copy: each
/// rank's last plane is overwritten with its right neighbour's plane 0.
void exchange_toroidal(Fabric& fabric, const std::vector<RankTopology>& topo, std::span<const FieldView> fields,
                       GhostMode mode);

/// Plane `planes-2` (the last owned plane) of each rank's left neighbour.
std::vector<std::vector<double>> fetch_lower_planes(Fabric& fabric, const std::vector<RankTopology>& topo,
                                                    std::span<const FieldView> fields);

/// Sum private grid copies across each particle communicator.
void particle_reduce_grid(Fabric& fabric, const std::vector<RankTopology>& topo, std::span<const FieldView> fields);

/// Particle wire format: u32 magic, u32 attribute count, u64 particle
/// count, then each attribute array in canonical order (LE f64).
inline constexpr std::uint32_t kParticleMagic = 0x47544350u;  // "GTCP"
std::vector<std::byte> pack_particles(const ParticleStore& store, std::span<const std::size_t> indices);
/// Appends the packed particles; returns the number appended.
std::size_t unpack_particles(std::span<const std::byte> msg, ParticleStore& store);

struct ShiftStats {
  int iterations = 0;
  std::uint64_t toroidal_moved = 0;
  std::uint64_t radial_moved = 0;
  std::uint64_t toroidal_bytes = 0;
  std::uint64_t radial_bytes = 0;
};

struct ShiftContext {
  const TorusGrid* grid = nullptr;
  std::vector<RadialWindow> windows;  // per radial domain
  int toroidal_ranks = 1;
  int planes_per_rank = 1;
  std::size_t capacity_limit = 0;  // 0 = unlimited
};

int toroidal_owner(const ShiftContext& ctx, double zeta);

/// Iterative nearest-neighbour particle migration: each pass moves
/// wrong-wedge particles one toroidal hop, then wrong-annulus particles
/// one radial hop; holes are back-filled from the array tail. Stops when
/// the global mover count is zero.
ShiftStats shift(Fabric& fabric, const std::vector<RankTopology>& topo, const ShiftContext& ctx,
                 std::span<ParticleStore* const> stores);

}  // namespace gtc
