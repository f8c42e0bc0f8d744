#pragma once

#include <cstddef>
#include <vector>

namespace ctseg {

// Rank-5 feature map (batch, channel, depth, height, width), row-major with
// W fastest. Float storage; kernels accumulate in double.
struct Tensor5 {
    int b = 0, c = 0, d = 0, h = 0, w = 0;
    std::vector<float> data;

    Tensor5() = default;
    Tensor5(int b_, int c_, int d_, int h_, int w_, float fill = 0.0f)
        : b(b_), c(c_), d(d_), h(h_), w(w_),
          data(static_cast<std::size_t>(b_) * c_ * d_ * h_ * w_, fill) {}

    std::size_t size() const { return data.size(); }
    std::size_t spatial() const { return static_cast<std::size_t>(d) * h * w; }

    std::size_t index(int ib, int ic, int iz, int iy, int ix) const {
        return (((static_cast<std::size_t>(ib) * c + ic) * d + iz) * h + iy) * w + ix;
    }
    float at(int ib, int ic, int iz, int iy, int ix) const {
        return data[index(ib, ic, iz, iy, ix)];
    }
    float& at(int ib, int ic, int iz, int iy, int ix) {
        return data[index(ib, ic, iz, iy, ix)];
    }

    bool same_shape(const Tensor5& o) const {
        return b == o.b && c == o.c && d == o.d && h == o.h && w == o.w;
    }
};

}  // namespace ctseg
