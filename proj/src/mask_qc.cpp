// mask_qc.cpp - connected components and the four rib-pair rules.

#include "cxreg/mask_qc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cxreg {

std::vector<Component> connected_components(const BinaryView &mask) {
    const int w = mask.width;
    const int h = mask.height;
    if (mask.pixels.size() != static_cast<std::size_t>(w) * static_cast<std::size_t>(h)) {
        throw DimensionMismatch("connected_components: pixel count does not match the dimensions");
    }
    std::vector<int> seen(mask.pixels.size(), 0);
    std::vector<Component> out;
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < mask.pixels.size(); ++start) {
        if (!mask.pixels[start] || seen[start]) continue;
        Component c;
        c.min_x = w;
        c.min_y = h;
        double sx = 0.0, sy = 0.0;
        seen[start] = 1;
        stack.push_back(start);
        while (!stack.empty()) {
            const std::size_t p = stack.back();
            stack.pop_back();
            c.pixels.push_back(p);
            const int x = static_cast<int>(p % w);
            const int y = static_cast<int>(p / w);
            c.min_x = std::min(c.min_x, x);
            c.max_x = std::max(c.max_x, x);
            c.min_y = std::min(c.min_y, y);
            c.max_y = std::max(c.max_y, y);
            sx += x;
            sy += y;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int nx = x + dx, ny = y + dy;
                    if ((dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                    const std::size_t q = static_cast<std::size_t>(ny) * w + nx;
                    if (mask.pixels[q] && !seen[q]) {
                        seen[q] = 1;
                        stack.push_back(q);
                    }
                }
            }
        }
        std::sort(c.pixels.begin(), c.pixels.end());
        c.size = c.pixels.size();
        c.centroid_x = sx / static_cast<double>(c.size);
        c.centroid_y = sy / static_cast<double>(c.size);
        out.push_back(std::move(c));
    }
    return out;
}

void QcThresholds::validate() const {
    if (t_q1 < 1) throw InvalidInput("InvalidThresholds", "t_q1 must be positive");
    if (!(std::isfinite(t_q3) && t_q3 >= 0.0)) throw InvalidInput("InvalidThresholds", "t_q3 must be non-negative");
    if (t_q4 < 0) throw InvalidInput("InvalidThresholds", "t_q4 must be non-negative");
}

PairComponents pair_components(const BinaryView &pair, const QcThresholds &t) {
    t.validate();
    auto comps = connected_components(pair);
    PairComponents pc;
    pc.component_count = comps.size();
    std::vector<Component> sizable;
    for (auto &c : comps) {
        if (c.size >= static_cast<std::size_t>(t.t_q1)) sizable.push_back(std::move(c));
    }
    pc.sizable_count = sizable.size();
    // Largest first; ties keep raster order.
    std::stable_sort(sizable.begin(), sizable.end(), [](const Component &a, const Component &b) { return a.size > b.size; });
    if (sizable.size() > 2) sizable.resize(2);
    std::sort(sizable.begin(), sizable.end(),
              [](const Component &a, const Component &b) { return a.centroid_x < b.centroid_x; });
    pc.ribs = std::move(sizable);
    return pc;
}

bool rule_q1(const PairComponents &pc) { return pc.sizable_count <= 2; }

bool rule_q2(const PairComponents &pc) { return pc.sizable_count >= 2; }

bool rule_q3(const PairComponents &pc, const QcThresholds &t) {
    if (pc.ribs.size() < 2) return true;
    const double a = static_cast<double>(pc.ribs[0].size);
    const double b = static_cast<double>(pc.ribs[1].size);
    const double excess = (std::max(a, b) - std::min(a, b)) / std::min(a, b) * 100.0;
    return !(excess > t.t_q3);
}

bool rule_q4(const PairComponents &pc, const QcThresholds &t) {
    if (pc.ribs.size() < 2) return true;
    return !(std::abs(pc.ribs[0].min_y - pc.ribs[1].min_y) > t.t_q4);
}

bool rule_q1(const BinaryView &pair, const QcThresholds &t) { return rule_q1(pair_components(pair, t)); }
bool rule_q2(const BinaryView &pair, const QcThresholds &t) { return rule_q2(pair_components(pair, t)); }
bool rule_q3(const BinaryView &pair, const QcThresholds &t) { return rule_q3(pair_components(pair, t), t); }
bool rule_q4(const BinaryView &pair, const QcThresholds &t) { return rule_q4(pair_components(pair, t), t); }

QcReport qc_mask(const LabelMask &mask, const QcThresholds &t) {
    if (mask.semantics() != LabelSemantics::RibPairs) {
        throw InvalidInput("LabelSetMismatch", "quality control needs a rib-pairs mask");
    }
    t.validate();
    QcReport report;
    for (std::uint8_t label : label_set(LabelSemantics::RibPairs)) {
        if (label == 0) continue;
        const auto ind = mask.indicator(label);
        const PairComponents pc = pair_components(BinaryView{mask.width(), mask.height(), ind}, t);
        PairQc q;
        q.label = label;
        q.q1 = rule_q1(pc);
        q.q2 = rule_q2(pc);
        q.q3 = rule_q3(pc, t);
        q.q4 = rule_q4(pc, t);
        q.component_count = pc.component_count;
        q.sizable_count = pc.sizable_count;
        for (const auto &c : pc.ribs) {
            q.rib_sizes.push_back(c.size);
            q.rib_tops.push_back(c.min_y);
        }
        if (pc.sizable_count == 0) q.diagnostic = "EmptyPair";
        if (!q.passed() && report.passed) {
            report.passed = false;
            report.first_failing = label;
        }
        report.pairs.push_back(std::move(q));
    }
    return report;
}

QcThresholds calibrate_thresholds(const std::vector<LabelMask> &gt_masks) {
    if (gt_masks.size() < 2) throw InvalidInput("EmptyCorpus", "calibration needs at least two masks");
    std::vector<double> counts;
    for (const auto &m : gt_masks) {
        if (m.semantics() != LabelSemantics::RibPairs) {
            throw InvalidInput("LabelSetMismatch", "calibration needs rib-pairs masks");
        }
        counts.push_back(static_cast<double>(m.count(2)));
    }
    const double n = static_cast<double>(counts.size());
    const double mean = std::accumulate(counts.begin(), counts.end(), 0.0) / n;
    double var = 0.0;
    for (double c : counts) var += (c - mean) * (c - mean);
    const double sd = std::sqrt(var / n);

    QcThresholds t;
    t.t_q1 = std::max(1, static_cast<int>(std::lround(mean - 2.5 * sd)));
    double max_excess = 0.0;
    int max_top = 0;
    for (const auto &m : gt_masks) {
        for (std::uint8_t label : label_set(LabelSemantics::RibPairs)) {
            if (label == 0) continue;
            const auto ind = m.indicator(label);
            // Ground truth has no stray patches; t_q1 counts both ribs of a pair and would
            // be too strict here, so the two largest components are taken as they are.
            const PairComponents pc = pair_components(BinaryView{m.width(), m.height(), ind}, QcThresholds{1, 0.0, 0});
            if (pc.ribs.size() < 2) continue;
            const double a = static_cast<double>(pc.ribs[0].size);
            const double b = static_cast<double>(pc.ribs[1].size);
            max_excess = std::max(max_excess, (std::max(a, b) - std::min(a, b)) / std::min(a, b) * 100.0);
            max_top = std::max(max_top, std::abs(pc.ribs[0].min_y - pc.ribs[1].min_y));
        }
    }
    t.t_q3 = max_excess;
    t.t_q4 = max_top;
    return t;
}

}  // namespace cxreg
