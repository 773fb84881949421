// metrics.hpp - overlap, boundary distance, folding and intensity metrics.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cxreg/grid.hpp"

namespace cxreg {

// Binary masks are plain byte grids, non-zero meaning foreground.
struct BinaryView {
    int width = 0;
    int height = 0;
    std::span<const std::uint8_t> pixels;
};

enum class DiceFlag { None, BothEmpty, OneEmpty };

struct DiceResult {
    double value = 0.0;
    DiceFlag flag = DiceFlag::None;
};

DiceResult dice(const BinaryView &x, const BinaryView &y);

// Foreground pixels with at least one 4-neighbour in the background (or off-grid).
std::vector<std::pair<int, int>> boundary_points(const BinaryView &m);

// Symmetric 95th percentile boundary distance (linear-interpolated percentile of
// each directed distance list, then the max of the two). nullopt when either mask
// is empty.
std::optional<double> hausdorff95(const BinaryView &x, const BinaryView &y);
std::optional<double> hausdorff(const BinaryView &x, const BinaryView &y);

// Linear-interpolated percentile, q in [0,100]. `values` must be non-empty.
double percentile(std::vector<double> values, double q);

struct LabelScore {
    std::uint8_t label = 0;
    double dice = 0.0;
    DiceFlag dice_flag = DiceFlag::None;
    std::optional<double> h95;

    friend bool operator==(const LabelScore &, const LabelScore &) = default;
};

struct StructureScores {
    double mean_dice = 0.0;
    std::optional<double> mean_h95;
    std::vector<LabelScore> per_label;  // labels present in either mask
    std::vector<std::uint8_t> excluded;  // labels absent from both masks
};

// Per-label dice/h95 over the structure labels of the semantics (2..10 for rib pairs,
// 1..2 for lungs), averaged over labels present in either mask.
StructureScores structure_scores(const LabelMask &a, const LabelMask &b);

double dcr(const LabelMask &a, const LabelMask &b);
std::optional<double> h95r(const LabelMask &a, const LabelMask &b);
double dcl(const LabelMask &a, const LabelMask &b);
std::optional<double> h95l(const LabelMask &a, const LabelMask &b);

// det(I + du/dx) per pixel. Derivatives are central differences with replicated
// borders, so the outermost row/column uses half the one-sided difference.
std::vector<double> jacobian_determinant(const DisplacementField &field);
double neg_jacobian_fraction(const DisplacementField &field);

double mse(const Image &a, const Image &b);

inline constexpr int kSsimWindow = 7;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;
inline constexpr double kSsimDataRange = 1.0;

// Mean SSIM over all fully contained 7x7 uniform windows, sample covariance.
double ssim(const Image &a, const Image &b);

struct MetricsReport {
    std::optional<double> dcr;
    std::optional<double> h95r;
    std::optional<double> dcl;
    std::optional<double> h95l;
    double mse = 0.0;
    double ssim = 0.0;
    double negjac = 0.0;
    std::vector<LabelScore> rib_labels;
    std::vector<LabelScore> lung_labels;
    std::map<std::string, std::string> provenance;

    // Value of a named metric (dcr, h95r, dcl, h95l, mse, ssim, negjac).
    std::optional<double> metric(const std::string &name) const;

    friend bool operator==(const MetricsReport &, const MetricsReport &) = default;
};

// Whether a larger value of the named metric is better.
bool higher_is_better(const std::string &metric);

struct MaskSet {
    std::optional<LabelMask> ribs;
    std::optional<LabelMask> lungs;
};

MetricsReport full_report(const Image &warped, const Image &fixed, const MaskSet &warped_masks,
                          const MaskSet &fixed_masks, const DisplacementField &field);

}  // namespace cxreg
