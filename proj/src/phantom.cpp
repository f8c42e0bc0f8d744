#include "ctseg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ctseg/rng.hpp"

namespace ctseg {
namespace {

constexpr float kBackground = 0.1f;
constexpr float kJaw = 0.3f;
constexpr float kTooth = 0.7f;
constexpr float kAppliance = 0.95f;

void paint_ellipsoid(Volume& v, const Ellipsoid& e, float value) {
    int z0 = std::max(0, static_cast<int>(std::floor(e.cz - e.rz)));
    int z1 = std::min(v.dims.d - 1, static_cast<int>(std::ceil(e.cz + e.rz)));
    int y0 = std::max(0, static_cast<int>(std::floor(e.cy - e.ry)));
    int y1 = std::min(v.dims.h - 1, static_cast<int>(std::ceil(e.cy + e.ry)));
    int x0 = std::max(0, static_cast<int>(std::floor(e.cx - e.rx)));
    int x1 = std::min(v.dims.w - 1, static_cast<int>(std::ceil(e.cx + e.rx)));
    for (int z = z0; z <= z1; ++z)
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x)
                if (e.contains(z, y, x)) v.at(z, y, x) = value;
}

}  // namespace

void PhantomSpec::validate() const {
    if (!dims.valid()) throw std::invalid_argument("phantom dims must be positive");
    if (!spacing.valid()) throw std::invalid_argument("phantom spacing must be positive");
    if (tooth_count < 0) throw std::invalid_argument("tooth_count must be >= 0");
    if (noise_sigma < 0) throw std::invalid_argument("noise_sigma must be >= 0");
}

PhantomGeometry phantom_geometry(const PhantomSpec& spec) {
    spec.validate();
    PhantomGeometry g;
    const int d = spec.dims.d, h = spec.dims.h, w = spec.dims.w;

    // Teeth sit along a parabola opening toward +y in the axial plane, with
    // the apex near the front of the jaw.
    const double apex_y = 0.30 * (h - 1);
    const double end_y = 0.62 * (h - 1);
    const double x_lo = 0.15 * (w - 1), x_hi = 0.85 * (w - 1);
    const double x_mid = 0.5 * (w - 1);
    const double half_span = (x_hi - x_lo) / 2.0;
    const double curvature = (end_y - apex_y) / (half_span * half_span);

    Rng rng(spec.seed);
    for (int i = 0; i < spec.tooth_count; ++i) {
        double t = spec.tooth_count == 1 ? 0.5 : static_cast<double>(i) / (spec.tooth_count - 1);
        Ellipsoid e;
        e.cx = x_lo + t * (x_hi - x_lo);
        e.cy = apex_y + curvature * (e.cx - x_mid) * (e.cx - x_mid);
        e.cz = 0.5 * (d - 1) + (rng.next_double() - 0.5) * 0.1 * d;
        double jitter = 0.8 + 0.4 * rng.next_double();
        e.rz = std::max(2.0, 0.16 * d * jitter);
        e.ry = std::max(1.5, 0.055 * h * jitter);
        e.rx = std::max(1.5, 0.040 * w * jitter);

        if (e.cz - e.rz < 0 || e.cz + e.rz > d - 1 || e.cy - e.ry < 0 || e.cy + e.ry > h - 1 ||
            e.cx - e.rx < 0 || e.cx + e.rx > w - 1)
            throw std::invalid_argument("phantom tooth ellipsoid exceeds the volume bounds");
        g.teeth.push_back(e);
    }

    if (spec.missing_teeth && !g.teeth.empty()) {
        int remove = std::max(1, spec.tooth_count / 4);
        for (int k = 0; k < remove && !g.teeth.empty(); ++k) {
            std::size_t idx = static_cast<std::size_t>(rng.next_double() * g.teeth.size());
            idx = std::min(idx, g.teeth.size() - 1);
            g.teeth.erase(g.teeth.begin() + static_cast<std::ptrdiff_t>(idx));
        }
    }

    if (spec.appliance) {
        // Small very-bright foci just in front of a seeded subset of teeth.
        for (std::size_t i = 0; i < g.teeth.size(); ++i) {
            if (rng.next_double() >= 0.5) continue;
            const Ellipsoid& tooth = g.teeth[i];
            Ellipsoid f;
            f.rz = f.ry = f.rx = 1.2;
            f.cz = tooth.cz;
            f.cy = tooth.cy - tooth.ry - 1.5;
            f.cx = tooth.cx;
            f.cy = std::clamp(f.cy, f.ry, h - 1 - f.ry);
            g.appliance_foci.push_back(f);
        }
    }

    g.jaw_y0 = static_cast<int>(0.25 * (h - 1));
    g.jaw_y1 = static_cast<int>(0.75 * (h - 1));
    g.jaw_z0 = static_cast<int>(0.20 * (d - 1));
    g.jaw_z1 = static_cast<int>(0.80 * (d - 1));
    return g;
}

std::pair<Volume, Volume> generate_phantom(const PhantomSpec& spec) {
    PhantomGeometry g = phantom_geometry(spec);

    Volume intensity = Volume::create(spec.dims, spec.spacing, VolumeKind::Intensity, kBackground);
    Volume label = Volume::create(spec.dims, spec.spacing, VolumeKind::Label, 0.0f);

    for (int z = g.jaw_z0; z <= g.jaw_z1; ++z)
        for (int y = g.jaw_y0; y <= g.jaw_y1; ++y)
            for (int x = 0; x < spec.dims.w; ++x) intensity.at(z, y, x) = kJaw;

    for (const Ellipsoid& e : g.teeth) {
        paint_ellipsoid(intensity, e, kTooth);
        paint_ellipsoid(label, e, 1.0f);
    }
    for (const Ellipsoid& f : g.appliance_foci) paint_ellipsoid(intensity, f, kAppliance);

    if (spec.noise_sigma > 0) {
        // Separate stream so the geometry draws stay stable when noise is
        // turned on or off.
        Rng noise(spec.seed ^ 0x6e6f697365ULL);
        for (float& v : intensity.data)
            v = static_cast<float>(v + spec.noise_sigma * noise.next_gaussian());
    }
    return {std::move(intensity), std::move(label)};
}

Volume dilate_mask(const Volume& label, int steps) {
    if (label.kind != VolumeKind::Label)
        throw std::invalid_argument("dilate_mask expects a label volume");
    if (steps < 0) throw std::invalid_argument("dilate steps must be >= 0");

    static constexpr int kNeighbors[6][3] = {
        {-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}};

    Volume cur = label;
    for (int s = 0; s < steps; ++s) {
        Volume next = cur;
        for (int z = 0; z < cur.dims.d; ++z)
            for (int y = 0; y < cur.dims.h; ++y)
                for (int x = 0; x < cur.dims.w; ++x) {
                    if (cur.at(z, y, x) != 1.0f) continue;
                    for (const auto& n : kNeighbors) {
                        int nz = z + n[0], ny = y + n[1], nx = x + n[2];
                        if (cur.in_bounds(nz, ny, nx)) next.at(nz, ny, nx) = 1.0f;
                    }
                }
        cur = std::move(next);
    }
    return cur;
}

Volume perturb_prediction(const Volume& label, int dilate_steps, double flip_rate,
                          std::uint64_t seed) {
    if (!(flip_rate >= 0.0 && flip_rate <= 1.0))
        throw std::invalid_argument("flip_rate must lie in [0,1]");
    Volume mask = dilate_mask(label, dilate_steps);

    Volume prob = Volume::create(label.dims, label.spacing, VolumeKind::Probability);
    Rng rng(seed);
    for (std::size_t i = 0; i < mask.data.size(); ++i) {
        double u_flip = rng.next_double();
        double u_soft = rng.next_double();
        bool fg = mask.data[i] == 1.0f;
        if (u_flip < flip_rate) fg = !fg;
        // Soft probability on the mask's side of the threshold, with margin
        // so float rounding cannot cross 0.5: fg in (0.55, 1], bg in [0, 0.45).
        prob.data[i] = static_cast<float>(fg ? 1.0 - 0.45 * u_soft : 0.45 * u_soft);
    }
    return prob;
}

}  // namespace ctseg
