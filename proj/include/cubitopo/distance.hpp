#pragma once

#include <vector>

#include "cubitopo/grid.hpp"

namespace cubitopo {

/// Exact Euclidean distance, in physical units of the grid spacing, from every
/// grid point to the nearest set point of `seeds`. Points are +infinity when
/// `seeds` is empty.
std::vector<double> distance_to(const BitField& seeds);

}  // namespace cubitopo
