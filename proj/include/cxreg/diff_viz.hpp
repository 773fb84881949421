// diff_viz.hpp - difference images between a fixed image and a registered moving image.
//
// Pipeline: a region of interest from the rib-cage convex hull, histogram transfer of
// the warped image onto the fixed one through Gaussian-mixture means, subtraction,
// clipping at mean +- 4 std, re-centring and rendering on a diverging colormap
// (negative dark blue, zero white, positive yellow).

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "cxreg/grid.hpp"
#include "cxreg/metrics.hpp"

namespace cxreg {

struct BinaryGrid {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    BinaryView view() const { return BinaryView{width, height, pixels}; }
    std::size_t count() const;
    friend bool operator==(const BinaryGrid &, const BinaryGrid &) = default;
};

// Convex hull of the foreground pixel centres grown by a Euclidean margin: a pixel is
// inside when its centre lies within `margin` of the hull polygon. Throws
// InvalidInput("EmptyMask") for an empty mask.
BinaryGrid rib_hull_roi(const BinaryView &ribcage, double margin = 20.0);
BinaryGrid rib_hull_roi(const LabelMask &ribcage, double margin = 20.0);

// Hull vertices of a point set in counter-clockwise order (image axes), collinear
// points removed.
std::vector<std::array<double, 2>> convex_hull(std::vector<std::array<double, 2>> points);

inline constexpr double kGmmVarianceFloor = 1e-6;
inline constexpr double kGmmTolerance = 1e-6;
inline constexpr int kGmmMaxIterations = 300;

struct Gmm1D {
    std::vector<double> weights;
    std::vector<double> means;  // ascending
    std::vector<double> variances;
    std::vector<double> log_likelihood;  // mean per-sample value after each EM step
    int requested_k = 0;

    int k() const { return static_cast<int>(means.size()); }
};

// EM for a one-dimensional mixture. Means start at the (i + 0.5) / k quantiles,
// variances at the sample variance, weights uniform. Stops when the mean
// log-likelihood gains less than 1e-6 or after 300 iterations. With fewer than k
// distinct values the model falls back to one component per distinct value.
Gmm1D fit_gmm_1d(std::span<const double> values, int k = 10);

// Values of `img` where `roi` is set.
std::vector<double> roi_values(const Image &img, const BinaryView &roi);

// Piecewise-linear intensity map taking source control points [min, means..., max]
// onto the matching target control points, both computed inside the roi. The target
// mixture is fitted here with the source model's component count. Output is clamped
// to the target control range.
Image histogram_transfer(const Image &source, const Image &target, const BinaryView &roi, const Gmm1D &source_gmm);

// Piecewise-linear map through sorted knots, clamped at the ends.
double piecewise_linear(double v, std::span<const double> from, std::span<const double> to);

struct DifferenceImage {
    int width = 0;
    int height = 0;
    std::vector<double> values;  // signed, zero outside the roi
    BinaryGrid roi;
    double raw_mean = 0.0;  // statistics of fixed - matched inside the roi before clipping
    double raw_std = 0.0;
    double clip_low = 0.0;
    double clip_high = 0.0;
    double range = 0.0;  // symmetric render range, values map to [-range, range]
    std::vector<std::uint8_t> index;  // colormap index per pixel, 127 outside the roi
    std::vector<std::uint8_t> rgb;    // interleaved, 3 bytes per pixel
};

using Rgb = std::array<std::uint8_t, 3>;
const std::array<Rgb, 256> &diverging_colormap();
inline constexpr std::uint8_t kNeutralIndex = 127;
// Render ranges below this (far under one 16-bit level) count as zero.
inline constexpr double kDifferenceRangeFloor = 1e-9;

DifferenceImage difference_image(const Image &fixed, const Image &matched_warped, const BinaryGrid &roi);

// Full pipeline: roi from the rib cage, GMM histogram transfer, difference.
DifferenceImage difference_pipeline(const Image &fixed, const Image &warped, const LabelMask &ribcage,
                                    double margin = 20.0, int gmm_components = 10);

}  // namespace cxreg
