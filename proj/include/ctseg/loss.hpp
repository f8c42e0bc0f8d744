#pragma once

#include "ctseg/volume.hpp"

namespace ctseg {

struct LossConfig {
    double w1 = 0.1;
    double w2 = 0.9;
    double epsilon = 1e-6;

    void validate() const;
};

// The two ratio terms of the element-wise dice: foreground agreement and
// background agreement, each stabilized by epsilon in numerator and
// denominator.
struct ElementwiseDsc {
    double fg_dice = 0.0;
    double bg_dice = 0.0;
    double sum = 0.0;  // fg + bg, in [0,2]
};

struct LossValue {
    double total = 0.0;
    double fg_dice = 0.0;
    double bg_dice = 0.0;
};

ElementwiseDsc elementwise_dsc(const Volume& pred, const Volume& ref, double epsilon);

// total = 1 - w1*fg_dice - w2*bg_dice, so a perfect prediction scores ~0.
LossValue weighted_dice_loss(const Volume& pred, const Volume& ref, const LossConfig& cfg);

// Closed-form d(total)/d(p_n) for every voxel; computed in double precision.
Volume loss_gradient(const Volume& pred, const Volume& ref, const LossConfig& cfg);

}  // namespace ctseg
