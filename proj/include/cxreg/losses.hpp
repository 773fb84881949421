// losses.hpp - anatomy penalised registration loss and its analytic gradient.
//
//   L(M, F, T) = -ncc(M o T, F) + lambda_r * tv(T) + lambda_seg * ce(S_M o T, S_F)
//
// ncc is the global zero-mean normalised cross correlation, tv the mean squared
// forward difference of the displacement and ce the pixel-mean categorical cross
// entropy of the softly warped moving mask against the fixed labels.

#pragma once

#include <optional>

#include "cxreg/grid.hpp"

namespace cxreg {

inline constexpr double kNccEpsilon = 1e-8;
inline constexpr double kCeEpsilon = 1e-7;

struct LossWeights {
    double lambda_r = 0.0;
    double lambda_seg = 0.0;
};

struct LossBreakdown {
    double ncc_term = 0.0;  // +ncc; the total uses its negative
    double tv_term = 0.0;
    double ce_term = 0.0;
    double total = 0.0;
    bool degenerate = false;  // a constant image made the ncc denominator vanish

    friend bool operator==(const LossBreakdown &, const LossBreakdown &) = default;
};

// Moving/fixed images and, in supervised modes, their label masks. All grids share
// one resolution; masks are either both present or both absent.
class ImagePair {
public:
    ImagePair(Image moving, Image fixed);
    ImagePair(Image moving, Image fixed, LabelMask moving_mask, LabelMask fixed_mask);

    const Image &moving() const noexcept { return moving_; }
    const Image &fixed() const noexcept { return fixed_; }
    bool has_masks() const noexcept { return moving_mask_.has_value(); }
    const LabelMask &moving_mask() const { return *moving_mask_; }
    const LabelMask &fixed_mask() const { return *fixed_mask_; }
    int width() const noexcept { return fixed_.width(); }
    int height() const noexcept { return fixed_.height(); }

private:
    Image moving_;
    Image fixed_;
    std::optional<LabelMask> moving_mask_;
    std::optional<LabelMask> fixed_mask_;
};

double ncc(const Image &a, const Image &b);
double total_variation(const DisplacementField &field);
double cross_entropy(const OccupancyStack &warped, const LabelMask &fixed);

LossBreakdown combined_loss(const ImagePair &pair, const DisplacementField &field, const LossWeights &w);

// d(total)/du at every pixel.
DisplacementField loss_gradient(const ImagePair &pair, const DisplacementField &field, const LossWeights &w);

struct LossEvaluation {
    LossBreakdown loss;
    DisplacementField gradient;
};

// Loss and gradient in a single pass over the grid.
LossEvaluation evaluate_loss(const ImagePair &pair, const DisplacementField &field, const LossWeights &w);

}  // namespace cxreg
