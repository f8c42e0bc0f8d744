#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "ctseg/volume.hpp"

namespace ctseg {

struct PhantomSpec {
    Dims dims{24, 48, 48};
    Spacing spacing{0.3, 0.25, 0.25};
    int tooth_count = 6;
    bool missing_teeth = false;
    bool appliance = false;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct Ellipsoid {
    double cz, cy, cx;  // voxel coordinates
    double rz, ry, rx;  // semi-axes in voxels

    bool contains(int z, int y, int x) const {
        double az = (z - cz) / rz, ay = (y - cy) / ry, ax = (x - cx) / rx;
        return az * az + ay * ay + ax * ax <= 1.0;
    }
};

// The deterministic geometry a spec expands to: tooth ellipsoids along a
// parabolic arch (after any missing-teeth removal) and the bright appliance
// foci, which contribute intensity but never labels.
struct PhantomGeometry {
    std::vector<Ellipsoid> teeth;
    std::vector<Ellipsoid> appliance_foci;
    int jaw_y0 = 0, jaw_y1 = 0;  // axial band rows carrying jaw intensity
    int jaw_z0 = 0, jaw_z1 = 0;
};

PhantomGeometry phantom_geometry(const PhantomSpec& spec);

// Synthetic CBCT-like volume pair. Intensity levels: background 0.1,
// jaw 0.3, tooth 0.7, appliance 0.95, plus gaussian noise on the intensity
// channel only. The label is exactly the union of the tooth ellipsoids.
std::pair<Volume, Volume> generate_phantom(const PhantomSpec& spec);

// Controlled imperfect prediction: dilate the mask, flip a seeded fraction
// of voxels, then express the result as soft probabilities with the mask
// side at >= 0.5.
Volume perturb_prediction(const Volume& label, int dilate_steps, double flip_rate,
                          std::uint64_t seed);

// 6-connected morphological dilation, one layer per step.
Volume dilate_mask(const Volume& label, int steps);

}  // namespace ctseg
