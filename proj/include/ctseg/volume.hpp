#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace ctseg {

// Physical voxel size in millimeters along depth/height/width.
struct Spacing {
    double dz = 1.0;
    double dy = 1.0;
    double dx = 1.0;

    bool valid() const;
    bool operator==(const Spacing&) const = default;
};

struct Dims {
    int d = 0;
    int h = 0;
    int w = 0;

    std::size_t voxels() const { return static_cast<std::size_t>(d) * h * w; }
    bool valid() const { return d > 0 && h > 0 && w > 0; }
    bool operator==(const Dims&) const = default;
};

enum class VolumeKind { Intensity, Label, Probability };

const char* to_string(VolumeKind kind);
VolumeKind volume_kind_from_string(const std::string& s);

// A 3D scalar grid in z-major order (slice, row, column), i.e. the W axis
// is fastest. Values are stored as f32; label volumes hold exactly {0,1}
// and probability volumes hold values in [0,1].
struct Volume {
    Dims dims;
    Spacing spacing;
    VolumeKind kind = VolumeKind::Intensity;
    std::vector<float> data;

    static Volume create(Dims dims, Spacing spacing, VolumeKind kind, float fill = 0.0f);

    std::size_t index(int z, int y, int x) const {
        return (static_cast<std::size_t>(z) * dims.h + y) * dims.w + x;
    }
    float at(int z, int y, int x) const { return data[index(z, y, x)]; }
    float& at(int z, int y, int x) { return data[index(z, y, x)]; }

    bool in_bounds(int z, int y, int x) const {
        return z >= 0 && z < dims.d && y >= 0 && y < dims.h && x >= 0 && x < dims.w;
    }

    // Throws std::invalid_argument when dims/spacing/data are inconsistent
    // or the kind's value constraints are violated.
    void validate() const;

    // Kind reinterpretations; both validate the value range first.
    Volume as_probability() const;
    Volume as_label() const;
};

// Boundary voxels of a binary mask, in physical millimeter coordinates.
// When extracted from a volume the voxel indices and originating grid are
// kept so metric kernels can run on the grid instead of the raw point list.
struct SurfacePointSet {
    std::vector<std::array<double, 3>> points;  // (z,y,x) mm
    std::vector<std::array<int, 3>> voxels;     // grid indices, empty for ad-hoc sets
    Dims grid_dims;                             // zero when not grid-backed
    Spacing grid_spacing;

    std::size_t count() const { return points.size(); }
    bool empty() const { return points.empty(); }
    bool grid_backed() const { return grid_dims.valid() && voxels.size() == points.size(); }

    static SurfacePointSet from_points(std::vector<std::array<double, 3>> pts);
};

struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;

    std::uint64_t total() const { return tp + fp + fn + tn; }
};

// Binarize a probability volume: voxel is foreground iff value >= t.
Volume threshold_prob(const Volume& v, double t = 0.5);

// Foreground voxels with at least one 6-connected background or
// out-of-bounds neighbor, scaled by spacing into millimeters.
SurfacePointSet extract_surface(const Volume& mask);

ConfusionCounts confusion_counts(const Volume& pred, const Volume& ref);

std::uint64_t foreground_count(const Volume& mask);

}  // namespace ctseg
