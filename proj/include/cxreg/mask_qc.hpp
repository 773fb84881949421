// mask_qc.hpp - rule-based quality control of rib-pair masks.
//
// Every rib pair label should hold exactly two sizable connected components (the left
// and right rib) of similar size whose topmost rows are close. Components smaller
// than t_q1 are treated as tolerated stray patches and ignored by all rules.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cxreg/grid.hpp"
#include "cxreg/metrics.hpp"

namespace cxreg {

struct Component {
    std::vector<std::size_t> pixels;  // raster indices, ascending
    std::size_t size = 0;
    int min_x = 0, min_y = 0, max_x = 0, max_y = 0;
    double centroid_x = 0.0;
    double centroid_y = 0.0;
};

// 8-connected foreground components, ordered by their first pixel in raster order.
std::vector<Component> connected_components(const BinaryView &mask);

struct QcThresholds {
    int t_q1 = 300;      // smallest component size that counts as a rib
    double t_q3 = 30.0;  // allowed size excess of the larger rib, percent
    int t_q4 = 50;       // allowed difference of the topmost rows, pixels

    void validate() const;
    friend bool operator==(const QcThresholds &, const QcThresholds &) = default;
};

// Components of one rib pair after the stray-patch tolerance. `ribs` holds the two
// largest sizable components ordered left to right (fewer when not available).
struct PairComponents {
    std::size_t component_count = 0;  // all components, including stray patches
    std::size_t sizable_count = 0;
    std::vector<Component> ribs;
};

PairComponents pair_components(const BinaryView &pair, const QcThresholds &t);

bool rule_q1(const PairComponents &pc);
bool rule_q2(const PairComponents &pc);
bool rule_q3(const PairComponents &pc, const QcThresholds &t);
bool rule_q4(const PairComponents &pc, const QcThresholds &t);

bool rule_q1(const BinaryView &pair, const QcThresholds &t);
bool rule_q2(const BinaryView &pair, const QcThresholds &t);
bool rule_q3(const BinaryView &pair, const QcThresholds &t);
bool rule_q4(const BinaryView &pair, const QcThresholds &t);

struct PairQc {
    std::uint8_t label = 0;
    bool q1 = true, q2 = true, q3 = true, q4 = true;
    std::size_t component_count = 0;
    std::size_t sizable_count = 0;
    std::vector<std::size_t> rib_sizes;  // left, right
    std::vector<int> rib_tops;           // topmost row of left, right
    std::optional<std::string> diagnostic;

    bool passed() const { return q1 && q2 && q3 && q4; }
    friend bool operator==(const PairQc &, const PairQc &) = default;
};

struct QcReport {
    std::vector<PairQc> pairs;  // labels 2..10 in order
    bool passed = true;
    std::optional<std::uint8_t> first_failing;

    friend bool operator==(const QcReport &, const QcReport &) = default;
};

// Requires a RibPairs mask.
QcReport qc_mask(const LabelMask &mask, const QcThresholds &t = {});

// Thresholds from ground-truth masks. t_q1 = round(mean - 2.5 std) of the label-2 pixel
// counts (population std, at least 1); t_q3 and t_q4 are the largest size excess and
// top-row distance observed between the two largest components of each pair. Throws
// InvalidInput("EmptyCorpus") for fewer than two masks.
QcThresholds calibrate_thresholds(const std::vector<LabelMask> &gt_masks);

}  // namespace cxreg
