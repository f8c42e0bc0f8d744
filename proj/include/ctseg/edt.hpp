#pragma once

#include <vector>

#include "ctseg/volume.hpp"

namespace ctseg {

// Exact squared Euclidean distance transform on an anisotropic voxel grid.
// sites[i] marks voxels that are distance zero; the result holds, for every
// voxel center, the squared distance in millimeters to the nearest site.
// Voxels with no site anywhere come back as +infinity.
std::vector<double> squared_distance_transform(const std::vector<char>& sites, Dims dims,
                                               Spacing spacing);

}  // namespace ctseg
