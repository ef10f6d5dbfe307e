#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "gtc/geometry.hpp"

namespace gtc {

/// Scalar per grid point over one rank's radial window (ghost rings
/// included) and `planes` local planes; the last plane duplicates the
/// toroidal neighbour's first plane.
class GridScalar {
 public:
  GridScalar() = default;
  GridScalar(const RadialWindow& window, int planes)
      : window_(window), planes_(planes), values_(static_cast<std::size_t>(window.size) * planes, 0.0) {}

  const RadialWindow& window() const { return window_; }
  int planes() const { return planes_; }
  int stride() const { return window_.size; }

  /// Index within a plane of the global flat point `global`.
  int local(int global) const { return global - window_.offset; }

  double& at(int plane, int global) { return values_[static_cast<std::size_t>(plane) * window_.size + local(global)]; }
  double at(int plane, int global) const {
    return values_[static_cast<std::size_t>(plane) * window_.size + local(global)];
  }

  std::span<double> plane(int p) { return {values_.data() + static_cast<std::size_t>(p) * window_.size, plane_size()}; }
  std::span<const double> plane(int p) const {
    return {values_.data() + static_cast<std::size_t>(p) * window_.size, plane_size()};
  }
  std::size_t plane_size() const { return static_cast<std::size_t>(window_.size); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  void fill(double v) { std::fill(values_.begin(), values_.end(), v); }

 private:
  RadialWindow window_{};
  int planes_ = 0;
  std::vector<double> values_;
};

/// Three-component field (E_r, E_θ, E_ζ) interleaved per grid point.
class GridVector {
 public:
  GridVector() = default;
  GridVector(const RadialWindow& window, int planes)
      : window_(window), planes_(planes), values_(static_cast<std::size_t>(window.size) * planes * 3, 0.0) {}

  const RadialWindow& window() const { return window_; }
  int planes() const { return planes_; }

  double* at(int plane, int global) {
    return values_.data() + 3 * (static_cast<std::size_t>(plane) * window_.size + (global - window_.offset));
  }
  const double* at(int plane, int global) const {
    return values_.data() + 3 * (static_cast<std::size_t>(plane) * window_.size + (global - window_.offset));
  }
  std::span<double> plane(int p) {
    return {values_.data() + 3 * static_cast<std::size_t>(p) * window_.size, 3 * static_cast<std::size_t>(window_.size)};
  }
  std::span<const double> plane(int p) const {
    return {values_.data() + 3 * static_cast<std::size_t>(p) * window_.size, 3 * static_cast<std::size_t>(window_.size)};
  }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  void fill(double v) { std::fill(values_.begin(), values_.end(), v); }

 private:
  RadialWindow window_{};
  int planes_ = 0;
  std::vector<double> values_;
};

/// Copy each ring's node 0 into its duplicate closure node.
void sync_closure_nodes(const TorusGrid& grid, GridScalar& f);
void sync_closure_nodes(const TorusGrid& grid, GridVector& f);

}  // namespace gtc
