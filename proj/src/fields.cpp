#include "gtc/fields.hpp"

namespace gtc {

void sync_closure_nodes(const TorusGrid& grid, GridScalar& f) {
  const auto& w = f.window();
  for (int p = 0; p < f.planes(); ++p) {
    for (int i = w.first_ghost; i <= w.last_ghost; ++i) {
      const int base = grid.igrid[i];
      f.at(p, base + grid.mtheta[i]) = f.at(p, base);
    }
  }
}

void sync_closure_nodes(const TorusGrid& grid, GridVector& f) {
  const auto& w = f.window();
  for (int p = 0; p < f.planes(); ++p) {
    for (int i = w.first_ghost; i <= w.last_ghost; ++i) {
      const int base = grid.igrid[i];
      const double* src = f.at(p, base);
      double* dst = f.at(p, base + grid.mtheta[i]);
      dst[0] = src[0];
      dst[1] = src[1];
      dst[2] = src[2];
    }
  }
}

}  // namespace gtc
