#include "ipic/grid.hpp"

namespace ipic {

double GridGeometry::node_volume(int i, int j, int k) const {
  double v = cell_volume();
  if (mode == BoundaryMode::OpenInflow) {
    const int idx[3] = {i, j, k};
    for (int a = 0; a < 3; ++a)
      if (idx[a] == 0 || idx[a] == nodes[a] - 1) v *= 0.5;
  }
  return v;
}

}  // namespace ipic
