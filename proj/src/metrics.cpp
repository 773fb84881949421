// metrics.cpp - evaluation metrics.

#include "cxreg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cxreg {

namespace {

void require_same(const BinaryView &x, const BinaryView &y, const char *what) {
    if (x.width != y.width || x.height != y.height) {
        throw DimensionMismatch(std::string(what) + ": masks differ in size");
    }
}

template <class A, class B>
void require_same_dims(const A &a, const B &b, const char *what) {
    if (a.width() != b.width() || a.height() != b.height()) {
        throw DimensionMismatch(std::string(what) + ": grids differ in size");
    }
}

// Directed list: for every boundary point of `from`, distance to the nearest
// boundary point of `to`.
std::vector<double> directed_distances(const std::vector<std::pair<int, int>> &from,
                                       const std::vector<std::pair<int, int>> &to) {
    std::vector<double> out;
    out.reserve(from.size());
    for (const auto &[fx, fy] : from) {
        long best = std::numeric_limits<long>::max();
        for (const auto &[tx, ty] : to) {
            const long dx = fx - tx;
            const long dy = fy - ty;
            best = std::min(best, dx * dx + dy * dy);
            if (best == 0) break;
        }
        out.push_back(std::sqrt(static_cast<double>(best)));
    }
    return out;
}

std::vector<std::uint8_t> structure_labels(LabelSemantics s) {
    auto all = label_set(s);
    all.erase(all.begin());  // background
    return all;
}

}  // namespace

DiceResult dice(const BinaryView &x, const BinaryView &y) {
    require_same(x, y, "dice");
    std::size_t nx = 0, ny = 0, both = 0;
    for (std::size_t i = 0; i < x.pixels.size(); ++i) {
        const bool a = x.pixels[i] != 0;
        const bool b = y.pixels[i] != 0;
        nx += a;
        ny += b;
        both += a && b;
    }
    if (nx + ny == 0) return {1.0, DiceFlag::BothEmpty};
    if (nx == 0 || ny == 0) return {0.0, DiceFlag::OneEmpty};
    return {2.0 * static_cast<double>(both) / static_cast<double>(nx + ny), DiceFlag::None};
}

std::vector<std::pair<int, int>> boundary_points(const BinaryView &m) {
    std::vector<std::pair<int, int>> pts;
    auto fg = [&](int x, int y) {
        if (x < 0 || y < 0 || x >= m.width || y >= m.height) return false;
        return m.pixels[static_cast<std::size_t>(y) * m.width + x] != 0;
    };
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            if (!fg(x, y)) continue;
            if (!fg(x - 1, y) || !fg(x + 1, y) || !fg(x, y - 1) || !fg(x, y + 1)) pts.emplace_back(x, y);
        }
    }
    return pts;
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw InvalidInput("EmptyInput", "percentile of an empty list");
    std::sort(values.begin(), values.end());
    const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + (values[hi] - values[lo]) * frac;
}

std::optional<double> hausdorff95(const BinaryView &x, const BinaryView &y) {
    require_same(x, y, "hausdorff95");
    const auto bx = boundary_points(x);
    const auto by = boundary_points(y);
    if (bx.empty() || by.empty()) return std::nullopt;
    return std::max(percentile(directed_distances(bx, by), 95.0), percentile(directed_distances(by, bx), 95.0));
}

std::optional<double> hausdorff(const BinaryView &x, const BinaryView &y) {
    require_same(x, y, "hausdorff");
    const auto bx = boundary_points(x);
    const auto by = boundary_points(y);
    if (bx.empty() || by.empty()) return std::nullopt;
    const auto dxy = directed_distances(bx, by);
    const auto dyx = directed_distances(by, bx);
    return std::max(*std::max_element(dxy.begin(), dxy.end()), *std::max_element(dyx.begin(), dyx.end()));
}

StructureScores structure_scores(const LabelMask &a, const LabelMask &b) {
    require_same_dims(a, b, "structure_scores");
    if (a.semantics() != b.semantics()) {
        throw InvalidInput("LabelSetMismatch", "structure_scores: masks use different label semantics");
    }
    StructureScores out;
    double dice_sum = 0.0;
    double h_sum = 0.0;
    std::size_t h_count = 0;
    for (std::uint8_t label : structure_labels(a.semantics())) {
        const auto ia = a.indicator(label);
        const auto ib = b.indicator(label);
        const BinaryView va{a.width(), a.height(), ia};
        const BinaryView vb{b.width(), b.height(), ib};
        const DiceResult d = dice(va, vb);
        if (d.flag == DiceFlag::BothEmpty) {
            out.excluded.push_back(label);
            continue;
        }
        LabelScore s;
        s.label = label;
        s.dice = d.value;
        s.dice_flag = d.flag;
        s.h95 = hausdorff95(va, vb);
        dice_sum += s.dice;
        if (s.h95) {
            h_sum += *s.h95;
            ++h_count;
        }
        out.per_label.push_back(s);
    }
    out.mean_dice = out.per_label.empty() ? 1.0 : dice_sum / static_cast<double>(out.per_label.size());
    if (h_count > 0) out.mean_h95 = h_sum / static_cast<double>(h_count);
    return out;
}

namespace {

void require_semantics(const LabelMask &m, LabelSemantics s, const char *what) {
    if (m.semantics() != s) throw InvalidInput("LabelSetMismatch", std::string(what) + ": wrong mask semantics");
}

}  // namespace

double dcr(const LabelMask &a, const LabelMask &b) {
    require_semantics(a, LabelSemantics::RibPairs, "dcr");
    return structure_scores(a, b).mean_dice;
}

std::optional<double> h95r(const LabelMask &a, const LabelMask &b) {
    require_semantics(a, LabelSemantics::RibPairs, "h95r");
    return structure_scores(a, b).mean_h95;
}

double dcl(const LabelMask &a, const LabelMask &b) {
    require_semantics(a, LabelSemantics::LungPair, "dcl");
    return structure_scores(a, b).mean_dice;
}

std::optional<double> h95l(const LabelMask &a, const LabelMask &b) {
    require_semantics(a, LabelSemantics::LungPair, "h95l");
    return structure_scores(a, b).mean_h95;
}

std::vector<double> jacobian_determinant(const DisplacementField &field) {
    const int w = field.width();
    const int h = field.height();
    std::vector<double> det(field.size());
    for (int y = 0; y < h; ++y) {
        const int ym = std::max(y - 1, 0), yp = std::min(y + 1, h - 1);
        for (int x = 0; x < w; ++x) {
            const int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
            const Vec2 &l = field.at(xm, y), &r = field.at(xp, y);
            const Vec2 &u = field.at(x, ym), &d = field.at(x, yp);
            const double dux_dx = 0.5 * (r.x - l.x);
            const double duy_dx = 0.5 * (r.y - l.y);
            const double dux_dy = 0.5 * (d.x - u.x);
            const double duy_dy = 0.5 * (d.y - u.y);
            det[field.index(x, y)] = (1.0 + dux_dx) * (1.0 + duy_dy) - dux_dy * duy_dx;
        }
    }
    return det;
}

double neg_jacobian_fraction(const DisplacementField &field) {
    const auto det = jacobian_determinant(field);
    const auto neg = std::count_if(det.begin(), det.end(), [](double v) { return v < 0.0; });
    return static_cast<double>(neg) / static_cast<double>(det.size());
}

double mse(const Image &a, const Image &b) {
    require_same_dims(a, b, "mse");
    const auto da = a.data();
    const auto db = b.data();
    double s = 0.0;
    for (std::size_t i = 0; i < da.size(); ++i) s += (da[i] - db[i]) * (da[i] - db[i]);
    return s / static_cast<double>(da.size());
}

double ssim(const Image &a, const Image &b) {
    require_same_dims(a, b, "ssim");
    const int w = a.width();
    const int h = a.height();
    if (w < kSsimWindow || h < kSsimWindow) {
        throw InvalidInput("TooSmall", "ssim needs images of at least 7x7");
    }
    // Summed-area tables of x, y, x^2, y^2, xy with a zero border row/column.
    const std::size_t sw = static_cast<std::size_t>(w) + 1;
    std::vector<double> sx(sw * (h + 1)), sy(sx.size()), sxx(sx.size()), syy(sx.size()), sxy(sx.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double va = a.at(x, y);
            const double vb = b.at(x, y);
            const std::size_t i = (y + 1) * sw + (x + 1);
            const std::size_t up = y * sw + (x + 1), left = (y + 1) * sw + x, diag = y * sw + x;
            sx[i] = va + sx[up] + sx[left] - sx[diag];
            sy[i] = vb + sy[up] + sy[left] - sy[diag];
            sxx[i] = va * va + sxx[up] + sxx[left] - sxx[diag];
            syy[i] = vb * vb + syy[up] + syy[left] - syy[diag];
            sxy[i] = va * vb + sxy[up] + sxy[left] - sxy[diag];
        }
    }
    auto box = [&](const std::vector<double> &t, int x0, int y0) {
        const int x1 = x0 + kSsimWindow, y1 = y0 + kSsimWindow;
        return t[y1 * sw + x1] - t[y0 * sw + x1] - t[y1 * sw + x0] + t[y0 * sw + x0];
    };
    const double np = kSsimWindow * kSsimWindow;
    const double cov_norm = np / (np - 1.0);
    const double c1 = (kSsimK1 * kSsimDataRange) * (kSsimK1 * kSsimDataRange);
    const double c2 = (kSsimK2 * kSsimDataRange) * (kSsimK2 * kSsimDataRange);
    double total = 0.0;
    std::size_t count = 0;
    for (int y0 = 0; y0 + kSsimWindow <= h; ++y0) {
        for (int x0 = 0; x0 + kSsimWindow <= w; ++x0) {
            const double mx = box(sx, x0, y0) / np;
            const double my = box(sy, x0, y0) / np;
            const double vx = cov_norm * (box(sxx, x0, y0) / np - mx * mx);
            const double vy = cov_norm * (box(syy, x0, y0) / np - my * my);
            const double vxy = cov_norm * (box(sxy, x0, y0) / np - mx * my);
            total += ((2 * mx * my + c1) * (2 * vxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

std::optional<double> MetricsReport::metric(const std::string &name) const {
    if (name == "dcr") return dcr;
    if (name == "h95r") return h95r;
    if (name == "dcl") return dcl;
    if (name == "h95l") return h95l;
    if (name == "mse") return mse;
    if (name == "ssim") return ssim;
    if (name == "negjac") return negjac;
    throw InvalidInput("UnknownMetric", "unknown metric '" + name + "'");
}

bool higher_is_better(const std::string &metric) {
    if (metric == "dcr" || metric == "dcl" || metric == "ssim") return true;
    if (metric == "h95r" || metric == "h95l" || metric == "mse" || metric == "negjac") return false;
    throw InvalidInput("UnknownMetric", "unknown metric '" + metric + "'");
}

MetricsReport full_report(const Image &warped, const Image &fixed, const MaskSet &warped_masks,
                          const MaskSet &fixed_masks, const DisplacementField &field) {
    MetricsReport r;
    r.mse = mse(warped, fixed);
    r.ssim = ssim(warped, fixed);
    r.negjac = neg_jacobian_fraction(field);
    if (warped_masks.ribs && fixed_masks.ribs) {
        require_semantics(*warped_masks.ribs, LabelSemantics::RibPairs, "full_report ribs");
        auto s = structure_scores(*warped_masks.ribs, *fixed_masks.ribs);
        r.dcr = s.mean_dice;
        r.h95r = s.mean_h95;
        r.rib_labels = std::move(s.per_label);
    }
    if (warped_masks.lungs && fixed_masks.lungs) {
        require_semantics(*warped_masks.lungs, LabelSemantics::LungPair, "full_report lungs");
        auto s = structure_scores(*warped_masks.lungs, *fixed_masks.lungs);
        r.dcl = s.mean_dice;
        r.h95l = s.mean_h95;
        r.lung_labels = std::move(s.per_label);
    }
    return r;
}

}  // namespace cxreg
