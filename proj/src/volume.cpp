#include "ctseg/volume.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ctseg {

bool Spacing::valid() const {
    return dz > 0 && dy > 0 && dx > 0 && std::isfinite(dz) && std::isfinite(dy) && std::isfinite(dx);
}

const char* to_string(VolumeKind kind) {
    switch (kind) {
        case VolumeKind::Intensity: return "intensity";
        case VolumeKind::Label: return "label";
        case VolumeKind::Probability: return "probability";
    }
    return "intensity";
}

VolumeKind volume_kind_from_string(const std::string& s) {
    if (s == "intensity") return VolumeKind::Intensity;
    if (s == "label") return VolumeKind::Label;
    if (s == "probability") return VolumeKind::Probability;
    throw std::invalid_argument("unknown volume kind: " + s);
}

Volume Volume::create(Dims dims, Spacing spacing, VolumeKind kind, float fill) {
    if (!dims.valid()) throw std::invalid_argument("volume dims must be positive");
    if (!spacing.valid()) throw std::invalid_argument("voxel spacing must be positive and finite");
    Volume v;
    v.dims = dims;
    v.spacing = spacing;
    v.kind = kind;
    v.data.assign(dims.voxels(), fill);
    return v;
}

void Volume::validate() const {
    if (!dims.valid()) throw std::invalid_argument("volume dims must be positive");
    if (!spacing.valid()) throw std::invalid_argument("voxel spacing must be positive and finite");
    if (data.size() != dims.voxels())
        throw std::invalid_argument("volume data length does not match dims");
    if (kind == VolumeKind::Label) {
        for (float v : data)
            if (v != 0.0f && v != 1.0f)
                throw std::invalid_argument("label volume contains values outside {0,1}");
    } else if (kind == VolumeKind::Probability) {
        for (float v : data)
            if (!(v >= 0.0f && v <= 1.0f))
                throw std::invalid_argument("probability volume contains values outside [0,1]");
    }
}

Volume Volume::as_probability() const {
    Volume v = *this;
    v.kind = VolumeKind::Probability;
    v.validate();
    return v;
}

Volume Volume::as_label() const {
    Volume v = *this;
    v.kind = VolumeKind::Label;
    v.validate();
    return v;
}

SurfacePointSet SurfacePointSet::from_points(std::vector<std::array<double, 3>> pts) {
    SurfacePointSet s;
    s.points = std::move(pts);
    return s;
}

Volume threshold_prob(const Volume& v, double t) {
    if (v.kind != VolumeKind::Probability)
        throw std::invalid_argument("threshold_prob expects a probability volume");
    if (!(t > 0.0 && t < 1.0))
        throw std::invalid_argument("threshold must lie in (0,1)");
    Volume out = Volume::create(v.dims, v.spacing, VolumeKind::Label);
    for (std::size_t i = 0; i < v.data.size(); ++i)
        out.data[i] = v.data[i] >= static_cast<float>(t) ? 1.0f : 0.0f;
    return out;
}

SurfacePointSet extract_surface(const Volume& mask) {
    if (mask.kind != VolumeKind::Label)
        throw std::invalid_argument("extract_surface expects a label volume");
    SurfacePointSet s;
    s.grid_dims = mask.dims;
    s.grid_spacing = mask.spacing;

    static constexpr int kNeighbors[6][3] = {
        {-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}};

    for (int z = 0; z < mask.dims.d; ++z) {
        for (int y = 0; y < mask.dims.h; ++y) {
            for (int x = 0; x < mask.dims.w; ++x) {
                if (mask.at(z, y, x) != 1.0f) continue;
                bool boundary = false;
                for (const auto& n : kNeighbors) {
                    int nz = z + n[0], ny = y + n[1], nx = x + n[2];
                    if (!mask.in_bounds(nz, ny, nx) || mask.at(nz, ny, nx) != 1.0f) {
                        boundary = true;
                        break;
                    }
                }
                if (boundary) {
                    s.voxels.push_back({z, y, x});
                    s.points.push_back({z * mask.spacing.dz, y * mask.spacing.dy, x * mask.spacing.dx});
                }
            }
        }
    }
    return s;
}

ConfusionCounts confusion_counts(const Volume& pred, const Volume& ref) {
    if (pred.kind != VolumeKind::Label || ref.kind != VolumeKind::Label)
        throw std::invalid_argument("confusion_counts expects label volumes");
    if (pred.dims != ref.dims) {
        std::ostringstream msg;
        msg << "dimension mismatch: pred (" << pred.dims.d << "," << pred.dims.h << ","
            << pred.dims.w << ") vs ref (" << ref.dims.d << "," << ref.dims.h << "," << ref.dims.w
            << ")";
        throw std::invalid_argument(msg.str());
    }
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        bool p = pred.data[i] == 1.0f;
        bool r = ref.data[i] == 1.0f;
        if (p && r)
            ++c.tp;
        else if (p && !r)
            ++c.fp;
        else if (!p && r)
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

std::uint64_t foreground_count(const Volume& mask) {
    std::uint64_t n = 0;
    for (float v : mask.data)
        if (v == 1.0f) ++n;
    return n;
}

}  // namespace ctseg
