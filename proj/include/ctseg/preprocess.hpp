#pragma once

#include <vector>

#include "ctseg/volume.hpp"

namespace ctseg {

struct ClaheParams {
    double clip_limit = 2.0;  // histogram clip factor relative to the uniform level
    int tiles_y = 8;
    int tiles_x = 8;
    int bins = 256;

    void validate() const;
};

// Contrast limited adaptive histogram equalization of one axial slice.
// Per-tile clipped-histogram equalization with bilinear interpolation
// between tile mappings; output values stay inside the slice's input range.
// A constant slice is returned unchanged.
std::vector<float> clahe_slice(const std::vector<float>& slice, int h, int w,
                               const ClaheParams& params);

// Applies clahe_slice to every axial slice of an intensity volume.
Volume clahe_volume(const Volume& v, const ClaheParams& params);

// Affine rescale to [0,1]: (x - min) / (max - min); a constant volume maps
// to all zeros.
Volume normalize_volume(const Volume& v);

// Bilinear per-slice resampling (align-corners) of the axial plane to
// out_h x out_w. Depth is unchanged; dy/dx are rescaled by H/out_h and
// W/out_w. Resampling to the input size is the bitwise identity.
Volume resize_axial(const Volume& v, int out_h, int out_w);

}  // namespace ctseg
