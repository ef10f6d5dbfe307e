#pragma once

#include <span>
#include <vector>

#include "gtc/fields.hpp"
#include "gtc/geometry.hpp"
#include "gtc/transport.hpp"

namespace gtc {

/// Compressed sparse rows over global flat in-plane indices. Closure nodes
/// have empty rows; columns are canonical nodes only.
struct SparseRows {
  std::vector<int> row_ptr;
  std::vector<int> col;
  std::vector<double> val;

  int rows() const { return static_cast<int>(row_ptr.size()) - 1; }
  std::span<const int> cols_of(int r) const { return {col.data() + row_ptr[r], col.data() + row_ptr[r + 1]}; }
  std::span<const double> vals_of(int r) const { return {val.data() + row_ptr[r], val.data() + row_ptr[r + 1]}; }
};

/// Four-point gyroaverage G at the thermal gyroradius and its square, the
/// approximation of the double gyroaverage. The system solved is
/// (c1 + c2)·φ − c1·G²φ = rhs on interior rings, φ = 0 on rings 0 and mpsi.
struct GyroOperator {
  SparseRows g;
  SparseRows g2;
  double c1 = 1.0;
  double c2 = 1.0;
  int reach = 0;  // max |ring(col) − ring(row)| in G²
};

struct GyroOptions {
  double rho_scale = 1.0;  // 0 gives G = I
  double tau = 1.0;
};

GyroOperator build_gyro_operator(const TorusGrid& grid, const GyroOptions& opt = {});

/// Dense copy of the assembled system (mgrid × mgrid, row-major). Closure
/// rows are identity. For oracle tests on small grids.
std::vector<double> dense_system(const TorusGrid& grid, const GyroOperator& op);

struct JacobiOptions {
  double omega = 2.0 / 3.0;
  double tol = 1e-6;
  int max_iter = 200;
};

struct PoissonReport {
  int iterations = 0;
  bool converged = true;
  std::vector<double> residuals;  // relative ∞-norm after each iteration
};

/// Weighted Jacobi on every rank's owned planes, ghosts refreshed between
/// iterations. `rhs` and `phi` are per-rank; phi is overwritten.
PoissonReport poisson(Fabric& fabric, const TorusGrid& grid, const std::vector<RankTopology>& topo,
                      const GyroOperator& op, const JacobiOptions& opt, std::span<const GridScalar* const> rhs,
                      std::span<GridScalar* const> phi);

/// Ring-averaged form of the same system reduced to one dimension, solved
/// directly by banded LU (factored once).
class ZonalSolver {
 public:
  ZonalSolver() = default;
  ZonalSolver(const TorusGrid& grid, const GyroOperator& op);

  std::vector<double> solve(std::span<const double> ring_average) const;
  /// Row-major (mpsi+1)² copy of the 1D system for oracle tests.
  const std::vector<double>& matrix() const { return dense_; }
  int bandwidth() const { return bw_; }

 private:
  int n_ = 0;
  int bw_ = 0;
  std::vector<double> dense_;
  std::vector<double> lu_;  // band storage, (2·bw+1) per row
};

/// Adds the zonal profile back onto owned rings and planes.
void add_zonal(const TorusGrid& grid, std::span<const double> phi00, GridScalar& phi);

/// Field value at angle θ on ring i of local plane p, linear in θ.
double ring_interp(const TorusGrid& grid, const GridScalar& f, int plane, int ring, double theta);

/// 1-2-1 filter along θ, then r, then the field line; ghosts and the
/// duplicate plane are current on return.
void smooth(Fabric& fabric, const TorusGrid& grid, const std::vector<RankTopology>& topo,
            std::span<GridScalar* const> fields);

/// Individual passes on a single rank's owned region (no exchange). The
/// plane pass needs the left neighbour's last owned plane.
void smooth_theta(const TorusGrid& grid, GridScalar& f);
void smooth_radial(const TorusGrid& grid, GridScalar& f);
void smooth_parallel(const TorusGrid& grid, GridScalar& f, std::span<const double> lower_plane);

/// E = −∇φ on owned nodes, then every ghost and the duplicate plane filled.
void field(Fabric& fabric, const TorusGrid& grid, const std::vector<RankTopology>& topo,
           std::span<GridScalar* const> phi, std::span<GridVector* const> e);

/// Single-rank gradient given the lower neighbour plane.
void field_local(const TorusGrid& grid, const GridScalar& phi, std::span<const double> lower_plane, GridVector& e);

namespace reference {

/// Nested-loop serial passes, same arithmetic as the flattened kernels.
void smooth_theta(const TorusGrid& grid, GridScalar& f);
void smooth_radial(const TorusGrid& grid, GridScalar& f);
void field_local(const TorusGrid& grid, const GridScalar& phi, std::span<const double> lower_plane, GridVector& e);

}  // namespace reference

/// Number of owned canonical points per plane iterated by the flattened loops.
std::size_t flattened_extent(const TorusGrid& grid, const RadialWindow& w);

}  // namespace gtc
