#include "ctseg/loss.hpp"

#include <cmath>
#include <stdexcept>

namespace ctseg {
namespace {

void check_pair(const Volume& pred, const Volume& ref) {
    if (pred.dims != ref.dims)
        throw std::invalid_argument("loss: prediction and reference dims differ");
    if (pred.kind != VolumeKind::Probability)
        throw std::invalid_argument("loss: prediction must be a probability volume");
    if (ref.kind != VolumeKind::Label)
        throw std::invalid_argument("loss: reference must be a label volume");
}

struct Sums {
    double pr = 0.0;       // sum p*r
    double p_plus_r = 0.0; // sum (p + r)
    double qc = 0.0;       // sum (1-p)(1-r)
    double q_plus = 0.0;   // sum (2 - p - r)
};

Sums accumulate(const Volume& pred, const Volume& ref) {
    Sums s;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        double p = pred.data[i];
        double r = ref.data[i];
        s.pr += p * r;
        s.p_plus_r += p + r;
        s.qc += (1.0 - p) * (1.0 - r);
        s.q_plus += 2.0 - p - r;
    }
    return s;
}

}  // namespace

void LossConfig::validate() const {
    if (w1 < 0 || w2 < 0 || std::abs(w1 + w2 - 1.0) > 1e-9)
        throw std::invalid_argument("loss weights must be nonnegative with w1 + w2 = 1");
    if (!(epsilon >= 0) || !std::isfinite(epsilon))
        throw std::invalid_argument("epsilon must be a nonnegative finite value");
}

ElementwiseDsc elementwise_dsc(const Volume& pred, const Volume& ref, double epsilon) {
    check_pair(pred, ref);
    Sums s = accumulate(pred, ref);
    ElementwiseDsc d;
    d.fg_dice = (2.0 * s.pr + epsilon) / (s.p_plus_r + epsilon);
    d.bg_dice = (2.0 * s.qc + epsilon) / (s.q_plus + epsilon);
    d.sum = d.fg_dice + d.bg_dice;
    return d;
}

LossValue weighted_dice_loss(const Volume& pred, const Volume& ref, const LossConfig& cfg) {
    cfg.validate();
    ElementwiseDsc d = elementwise_dsc(pred, ref, cfg.epsilon);
    LossValue v;
    v.fg_dice = d.fg_dice;
    v.bg_dice = d.bg_dice;
    v.total = 1.0 - cfg.w1 * d.fg_dice - cfg.w2 * d.bg_dice;
    return v;
}

Volume loss_gradient(const Volume& pred, const Volume& ref, const LossConfig& cfg) {
    cfg.validate();
    check_pair(pred, ref);
    Sums s = accumulate(pred, ref);

    const double fg_num = 2.0 * s.pr + cfg.epsilon;
    const double fg_den = s.p_plus_r + cfg.epsilon;
    const double bg_num = 2.0 * s.qc + cfg.epsilon;
    const double bg_den = s.q_plus + cfg.epsilon;

    Volume grad = Volume::create(pred.dims, pred.spacing, VolumeKind::Intensity);
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        double r = ref.data[i];
        // Quotient rule on each term; d(num)/dp = 2r resp. -2(1-r) and
        // d(den)/dp = 1 resp. -1.
        double dfg = (2.0 * r * fg_den - fg_num) / (fg_den * fg_den);
        double dbg = (-2.0 * (1.0 - r) * bg_den + bg_num) / (bg_den * bg_den);
        grad.data[i] = static_cast<float>(-cfg.w1 * dfg - cfg.w2 * dbg);
    }
    return grad;
}

}  // namespace ctseg
