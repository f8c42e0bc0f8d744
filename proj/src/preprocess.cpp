#include "ctseg/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ctseg {
namespace {

// Balanced contiguous split of n samples into k tiles.
int tile_begin(int t, int k, int n) { return static_cast<int>(static_cast<long long>(t) * n / k); }

struct TileGrid {
    std::vector<double> centers_y, centers_x;
    std::vector<std::vector<double>> mapping;  // [tile][bin] -> normalized cdf in (0,1]
};

}  // namespace

void ClaheParams::validate() const {
    if (!(clip_limit > 0)) throw std::invalid_argument("clahe clip_limit must be positive");
    if (tiles_y < 1 || tiles_x < 1) throw std::invalid_argument("clahe tiles must be >= 1");
    if (bins < 2) throw std::invalid_argument("clahe bins must be >= 2");
}

std::vector<float> clahe_slice(const std::vector<float>& slice, int h, int w,
                               const ClaheParams& params) {
    params.validate();
    if (h <= 0 || w <= 0 || slice.size() != static_cast<std::size_t>(h) * w)
        throw std::invalid_argument("clahe: slice size does not match h*w");
    if (params.tiles_y > h || params.tiles_x > w)
        throw std::invalid_argument("clahe: slice smaller than the tile grid");

    const auto [min_it, max_it] = std::minmax_element(slice.begin(), slice.end());
    const double lo = *min_it, hi = *max_it;
    if (lo == hi) return slice;  // degenerate histogram, nothing to equalize

    const int bins = params.bins;
    const double range = hi - lo;
    auto bin_of = [&](float v) {
        int b = static_cast<int>(std::lround((v - lo) / range * (bins - 1)));
        return std::clamp(b, 0, bins - 1);
    };

    const int ty = params.tiles_y, tx = params.tiles_x;
    TileGrid grid;
    grid.centers_y.resize(ty);
    grid.centers_x.resize(tx);
    grid.mapping.assign(static_cast<std::size_t>(ty) * tx, std::vector<double>(bins, 0.0));

    for (int t = 0; t < ty; ++t)
        grid.centers_y[t] = (tile_begin(t, ty, h) + tile_begin(t + 1, ty, h) - 1) / 2.0;
    for (int t = 0; t < tx; ++t)
        grid.centers_x[t] = (tile_begin(t, tx, w) + tile_begin(t + 1, tx, w) - 1) / 2.0;

    std::vector<double> hist(bins);
    for (int tyi = 0; tyi < ty; ++tyi) {
        int y0 = tile_begin(tyi, ty, h), y1 = tile_begin(tyi + 1, ty, h);
        for (int txi = 0; txi < tx; ++txi) {
            int x0 = tile_begin(txi, tx, w), x1 = tile_begin(txi + 1, tx, w);
            double area = static_cast<double>(y1 - y0) * (x1 - x0);

            std::fill(hist.begin(), hist.end(), 0.0);
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) hist[bin_of(slice[static_cast<std::size_t>(y) * w + x])] += 1.0;

            // Clip each bin at clip_limit times the uniform level and hand
            // the excess back equally to all bins.
            double clip = std::max(1.0, params.clip_limit * area / bins);
            double excess = 0.0;
            for (double& b : hist) {
                if (b > clip) {
                    excess += b - clip;
                    b = clip;
                }
            }
            double bonus = excess / bins;
            for (double& b : hist) b += bonus;

            std::vector<double>& map = grid.mapping[static_cast<std::size_t>(tyi) * tx + txi];
            double cdf = 0.0;
            for (int b = 0; b < bins; ++b) {
                cdf += hist[b];
                map[b] = cdf / area;
            }
        }
    }

    // Interpolation weights relative to the neighboring tile centers; pixels
    // outside the outer centers stick to the border tile's mapping.
    auto locate = [](const std::vector<double>& centers, double pos, int& t0, int& t1, double& u) {
        int n = static_cast<int>(centers.size());
        if (n == 1 || pos <= centers.front()) {
            t0 = t1 = 0;
            u = 0.0;
            return;
        }
        if (pos >= centers.back()) {
            t0 = t1 = n - 1;
            u = 0.0;
            return;
        }
        int t = 0;
        while (pos > centers[t + 1]) ++t;
        t0 = t;
        t1 = t + 1;
        u = (pos - centers[t]) / (centers[t + 1] - centers[t]);
    };

    std::vector<float> out(slice.size());
    for (int y = 0; y < h; ++y) {
        int ty0, ty1;
        double uy;
        locate(grid.centers_y, y, ty0, ty1, uy);
        for (int x = 0; x < w; ++x) {
            int tx0, tx1;
            double ux;
            locate(grid.centers_x, x, tx0, tx1, ux);
            int b = bin_of(slice[static_cast<std::size_t>(y) * w + x]);
            double m00 = grid.mapping[static_cast<std::size_t>(ty0) * tx + tx0][b];
            double m01 = grid.mapping[static_cast<std::size_t>(ty0) * tx + tx1][b];
            double m10 = grid.mapping[static_cast<std::size_t>(ty1) * tx + tx0][b];
            double m11 = grid.mapping[static_cast<std::size_t>(ty1) * tx + tx1][b];
            double m = (1 - uy) * ((1 - ux) * m00 + ux * m01) + uy * ((1 - ux) * m10 + ux * m11);
            out[static_cast<std::size_t>(y) * w + x] = static_cast<float>(lo + m * range);
        }
    }
    return out;
}

Volume clahe_volume(const Volume& v, const ClaheParams& params) {
    if (v.kind != VolumeKind::Intensity)
        throw std::invalid_argument("clahe expects an intensity volume");
    Volume out = v;
    std::vector<float> slice(static_cast<std::size_t>(v.dims.h) * v.dims.w);
    for (int z = 0; z < v.dims.d; ++z) {
        std::size_t base = static_cast<std::size_t>(z) * slice.size();
        std::copy_n(v.data.begin() + base, slice.size(), slice.begin());
        std::vector<float> eq = clahe_slice(slice, v.dims.h, v.dims.w, params);
        std::copy(eq.begin(), eq.end(), out.data.begin() + base);
    }
    return out;
}

Volume normalize_volume(const Volume& v) {
    if (v.kind != VolumeKind::Intensity)
        throw std::invalid_argument("normalize expects an intensity volume");
    const auto [min_it, max_it] = std::minmax_element(v.data.begin(), v.data.end());
    Volume out = v;
    if (*min_it == *max_it) {
        std::fill(out.data.begin(), out.data.end(), 0.0f);
        return out;
    }
    const double lo = *min_it;
    const double range = static_cast<double>(*max_it) - lo;
    for (float& x : out.data) x = static_cast<float>((x - lo) / range);
    return out;
}

Volume resize_axial(const Volume& v, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("resize: output dims must be positive");
    if (v.dims.h < 2 || v.dims.w < 2)
        throw std::invalid_argument("resize: input slices must be at least 2x2");

    const int h = v.dims.h, w = v.dims.w;
    Volume out;
    out.dims = {v.dims.d, out_h, out_w};
    out.spacing = {v.spacing.dz, v.spacing.dy * h / out_h, v.spacing.dx * w / out_w};
    out.kind = v.kind;
    out.data.resize(out.dims.voxels());

    // Align-corners sampling: output corner pixels coincide with input
    // corners, which makes same-size resampling the exact identity.
    auto src_coord = [](int i, int n_out, int n_in) {
        if (n_out == 1) return 0.0;
        return static_cast<double>(i) * (n_in - 1) / (n_out - 1);
    };

    for (int z = 0; z < v.dims.d; ++z) {
        for (int yo = 0; yo < out_h; ++yo) {
            double sy = src_coord(yo, out_h, h);
            int y0 = static_cast<int>(sy);
            int y1 = std::min(y0 + 1, h - 1);
            double fy = sy - y0;
            for (int xo = 0; xo < out_w; ++xo) {
                double sx = src_coord(xo, out_w, w);
                int x0 = static_cast<int>(sx);
                int x1 = std::min(x0 + 1, w - 1);
                double fx = sx - x0;
                double v00 = v.at(z, y0, x0), v01 = v.at(z, y0, x1);
                double v10 = v.at(z, y1, x0), v11 = v.at(z, y1, x1);
                double val = (1 - fy) * ((1 - fx) * v00 + fx * v01) +
                             fy * ((1 - fx) * v10 + fx * v11);
                out.at(z, yo, xo) = static_cast<float>(val);
            }
        }
    }
    return out;
}

}  // namespace ctseg
