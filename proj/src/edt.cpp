#include "ctseg/edt.hpp"

#include <limits>
#include <stdexcept>

namespace ctseg {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1D squared distance transform by lower envelope of parabolas
// (Felzenszwalb & Huttenlocher), generalized to samples at positions
// i*step. f holds squared distances from a previous pass; parabolas with
// infinite height carry no site and are skipped.
void dt1d(const double* f, double* out, int n, double step, std::vector<int>& apex,
          std::vector<double>& boundary) {
    apex.resize(static_cast<std::size_t>(n) + 1);
    boundary.resize(static_cast<std::size_t>(n) + 1);

    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (f[q] == kInf) continue;
        double xq = q * step;
        if (k < 0) {
            k = 0;
            apex[0] = q;
            boundary[0] = -kInf;
            boundary[1] = kInf;
            continue;
        }
        // Intersection of the parabola at q with the rightmost envelope
        // parabola; pop parabolas it dominates.
        double s;
        for (;;) {
            int p = apex[k];
            double xp = p * step;
            s = ((f[q] + xq * xq) - (f[p] + xp * xp)) / (2.0 * (xq - xp));
            if (s > boundary[k]) break;
            --k;
            if (k < 0) break;
        }
        ++k;
        apex[k] = q;
        boundary[k] = s;
        boundary[k + 1] = kInf;
    }

    if (k < 0) {
        for (int q = 0; q < n; ++q) out[q] = kInf;
        return;
    }

    int j = 0;
    for (int q = 0; q < n; ++q) {
        double xq = q * step;
        while (boundary[j + 1] < xq) ++j;
        double dx = xq - apex[j] * step;
        out[q] = dx * dx + f[apex[j]];
    }
}

}  // namespace

std::vector<double> squared_distance_transform(const std::vector<char>& sites, Dims dims,
                                               Spacing spacing) {
    if (!dims.valid() || !spacing.valid())
        throw std::invalid_argument("distance transform needs valid dims and spacing");
    if (sites.size() != dims.voxels())
        throw std::invalid_argument("site grid length does not match dims");

    const int d = dims.d, h = dims.h, w = dims.w;
    std::vector<double> dist(dims.voxels());
    for (std::size_t i = 0; i < sites.size(); ++i) dist[i] = sites[i] ? 0.0 : kInf;

    int nmax = std::max(d, std::max(h, w));
    std::vector<double> row(nmax), rowOut(nmax);
    std::vector<int> apex;
    std::vector<double> boundary;

    auto stride_pass = [&](int n, double step, std::size_t count, std::size_t stride,
                           auto base_index) {
        for (std::size_t line = 0; line < count; ++line) {
            std::size_t base = base_index(line);
            for (int i = 0; i < n; ++i) row[i] = dist[base + i * stride];
            dt1d(row.data(), rowOut.data(), n, step, apex, boundary);
            for (int i = 0; i < n; ++i) dist[base + i * stride] = rowOut[i];
        }
    };

    // Along x, then y, then z; each pass folds one axis into the squared
    // distance field, which keeps the transform exact.
    stride_pass(w, spacing.dx, static_cast<std::size_t>(d) * h, 1,
                [&](std::size_t line) { return line * w; });
    stride_pass(h, spacing.dy, static_cast<std::size_t>(d) * w, w, [&](std::size_t line) {
        std::size_t z = line / w, x = line % w;
        return z * static_cast<std::size_t>(h) * w + x;
    });
    stride_pass(d, spacing.dz, static_cast<std::size_t>(h) * w,
                static_cast<std::size_t>(h) * w, [&](std::size_t line) { return line; });

    return dist;
}

}  // namespace ctseg
