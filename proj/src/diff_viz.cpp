// diff_viz.cpp - rib hull roi, 1D mixture fitting, histogram transfer and rendering.

#include "cxreg/diff_viz.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace cxreg {

std::size_t BinaryGrid::count() const {
    return static_cast<std::size_t>(std::count_if(pixels.begin(), pixels.end(), [](std::uint8_t v) { return v != 0; }));
}

namespace {

using Pt = std::array<double, 2>;

double cross(const Pt &o, const Pt &a, const Pt &b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

double segment_distance(const Pt &p, const Pt &a, const Pt &b) {
    const double vx = b[0] - a[0], vy = b[1] - a[1];
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0.0 ? ((p[0] - a[0]) * vx + (p[1] - a[1]) * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(p[0] - (a[0] + t * vx), p[1] - (a[1] + t * vy));
}

double hull_distance(const Pt &p, const std::vector<Pt> &hull) {
    if (hull.size() == 1) return std::hypot(p[0] - hull[0][0], p[1] - hull[0][1]);
    if (hull.size() >= 3) {
        bool inside = true;
        for (std::size_t i = 0; i < hull.size() && inside; ++i) {
            if (cross(hull[i], hull[(i + 1) % hull.size()], p) < 0.0) inside = false;
        }
        if (inside) return 0.0;
    }
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < hull.size(); ++i) d = std::min(d, segment_distance(p, hull[i], hull[(i + 1) % hull.size()]));
    return d;
}

}  // namespace

std::vector<std::array<double, 2>> convex_hull(std::vector<std::array<double, 2>> pts) {
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() <= 2) return pts;
    std::vector<Pt> hull(2 * pts.size());
    std::size_t k = 0;
    for (const Pt &p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

BinaryGrid rib_hull_roi(const BinaryView &ribcage, double margin) {
    if (!(margin >= 0.0) || !std::isfinite(margin)) throw InvalidInput("InvalidMargin", "margin must be non-negative");
    const int w = ribcage.width, h = ribcage.height;
    if (ribcage.pixels.size() != static_cast<std::size_t>(w) * static_cast<std::size_t>(h)) {
        throw DimensionMismatch("rib_hull_roi: pixel count does not match the dimensions");
    }
    std::vector<Pt> pts;
    // Only the extreme pixels of each row can be hull vertices.
    for (int y = 0; y < h; ++y) {
        int lo = -1, hi = -1;
        for (int x = 0; x < w; ++x) {
            if (!ribcage.pixels[static_cast<std::size_t>(y) * w + x]) continue;
            if (lo < 0) lo = x;
            hi = x;
        }
        if (lo < 0) continue;
        pts.push_back({static_cast<double>(lo), static_cast<double>(y)});
        pts.push_back({static_cast<double>(hi), static_cast<double>(y)});
    }
    if (pts.empty()) throw InvalidInput("EmptyMask", "rib cage mask is empty");
    const auto hull = convex_hull(std::move(pts));
    BinaryGrid roi{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h, 0)};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (hull_distance({static_cast<double>(x), static_cast<double>(y)}, hull) <= margin + 1e-9) {
                roi.pixels[static_cast<std::size_t>(y) * w + x] = 1;
            }
        }
    }
    return roi;
}

BinaryGrid rib_hull_roi(const LabelMask &ribcage, double margin) {
    std::vector<std::uint8_t> fg(ribcage.labels().begin(), ribcage.labels().end());
    for (auto &v : fg) v = v ? 1 : 0;
    return rib_hull_roi(BinaryView{ribcage.width(), ribcage.height(), fg}, margin);
}

namespace {

struct Weighted {
    double value;
    double count;
};

// Mean per-sample log-likelihood; fills responsibilities (row-major, point x component).
double e_step(const std::vector<Weighted> &pts, double total, const Gmm1D &g, std::vector<double> &resp) {
    const std::size_t k = g.means.size();
    resp.assign(pts.size() * k, 0.0);
    std::vector<double> logp(k);
    double ll = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < k; ++j) {
            if (g.weights[j] <= 0.0) {
                logp[j] = -std::numeric_limits<double>::infinity();
                continue;
            }
            const double d = pts[i].value - g.means[j];
            logp[j] = std::log(g.weights[j]) - 0.5 * std::log(2.0 * std::numbers::pi * g.variances[j]) - 0.5 * d * d / g.variances[j];
            mx = std::max(mx, logp[j]);
        }
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) s += std::exp(logp[j] - mx);
        const double lse = mx + std::log(s);
        for (std::size_t j = 0; j < k; ++j) resp[i * k + j] = std::exp(logp[j] - lse);
        ll += pts[i].count * lse;
    }
    return ll / total;
}

void m_step(const std::vector<Weighted> &pts, double total, const std::vector<double> &resp, Gmm1D &g) {
    const std::size_t k = g.means.size();
    for (std::size_t j = 0; j < k; ++j) {
        double nj = 0.0, sx = 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const double r = pts[i].count * resp[i * k + j];
            nj += r;
            sx += r * pts[i].value;
        }
        if (nj <= 1e-300) {
            g.weights[j] = 0.0;
            continue;
        }
        const double mu = sx / nj;
        double sv = 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const double d = pts[i].value - mu;
            sv += pts[i].count * resp[i * k + j] * d * d;
        }
        g.weights[j] = nj / total;
        g.means[j] = mu;
        g.variances[j] = std::max(kGmmVarianceFloor, sv / nj);
    }
}

}  // namespace

Gmm1D fit_gmm_1d(std::span<const double> values, int k) {
    if (k < 1) throw InvalidInput("InvalidComponentCount", "mixture needs at least one component");
    if (values.empty()) throw InvalidInput("TooFewValues", "no values to fit");
    for (double v : values) {
        if (!std::isfinite(v)) throw InvalidInput("NonFiniteValue", "mixture input must be finite");
    }
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<Weighted> pts;
    for (double v : sorted) {
        if (!pts.empty() && pts.back().value == v) pts.back().count += 1.0;
        else pts.push_back({v, 1.0});
    }
    const double total = static_cast<double>(sorted.size());

    Gmm1D g;
    g.requested_k = k;
    const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / total;
    double var = 0.0;
    for (double v : sorted) var += (v - mean) * (v - mean);
    var = std::max(kGmmVarianceFloor, var / total);

    if (pts.size() < static_cast<std::size_t>(k)) {
        // Too few distinct values: one component per value.
        for (const auto &p : pts) {
            g.means.push_back(p.value);
            g.weights.push_back(p.count / total);
            g.variances.push_back(var);
        }
    } else {
        for (int i = 0; i < k; ++i) {
            g.means.push_back(percentile(sorted, 100.0 * (i + 0.5) / k));
            g.weights.push_back(1.0 / k);
            g.variances.push_back(var);
        }
    }

    std::vector<double> resp;
    double ll = e_step(pts, total, g, resp);
    for (int it = 0; it < kGmmMaxIterations; ++it) {
        m_step(pts, total, resp, g);
        const double next = e_step(pts, total, g, resp);
        g.log_likelihood.push_back(next);
        const double gain = next - ll;
        ll = next;
        if (gain < kGmmTolerance) break;
    }

    std::vector<std::size_t> order(g.means.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return g.means[a] < g.means[b]; });
    Gmm1D out = g;
    for (std::size_t i = 0; i < order.size(); ++i) {
        out.weights[i] = g.weights[order[i]];
        out.means[i] = g.means[order[i]];
        out.variances[i] = g.variances[order[i]];
    }
    return out;
}

std::vector<double> roi_values(const Image &img, const BinaryView &roi) {
    if (roi.width != img.width() || roi.height != img.height() || roi.pixels.size() != img.size()) {
        throw DimensionMismatch("roi does not match the image");
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < img.size(); ++i) {
        if (roi.pixels[i]) out.push_back(img.data()[i]);
    }
    return out;
}

double piecewise_linear(double v, std::span<const double> from, std::span<const double> to) {
    if (v <= from.front()) return to.front();
    if (v >= from.back()) return to.back();
    const std::size_t i = static_cast<std::size_t>(std::upper_bound(from.begin(), from.end(), v) - from.begin()) - 1;
    const double t = (v - from[i]) / (from[i + 1] - from[i]);
    return to[i] + t * (to[i + 1] - to[i]);
}

namespace {

std::vector<double> control_points(const std::vector<double> &vals, const Gmm1D &g) {
    std::vector<double> cp;
    cp.push_back(*std::min_element(vals.begin(), vals.end()));
    cp.insert(cp.end(), g.means.begin(), g.means.end());
    cp.push_back(*std::max_element(vals.begin(), vals.end()));
    if (!std::is_sorted(cp.begin(), cp.end())) {
        throw NumericalFailure("NonMonotoneControlPoints", "mixture means are not ordered inside the value range");
    }
    return cp;
}

}  // namespace

Image histogram_transfer(const Image &source, const Image &target, const BinaryView &roi, const Gmm1D &source_gmm) {
    if (source.width() != target.width() || source.height() != target.height()) {
        throw DimensionMismatch("histogram_transfer: image sizes differ");
    }
    const auto sv = roi_values(source, roi);
    const auto tv = roi_values(target, roi);
    if (sv.empty()) throw InvalidInput("EmptyMask", "histogram transfer roi is empty");
    Gmm1D sg = source_gmm;
    Gmm1D tg = fit_gmm_1d(tv, sg.k());
    if (tg.k() < sg.k()) sg = fit_gmm_1d(sv, tg.k());
    if (sg.k() < tg.k()) tg = fit_gmm_1d(tv, sg.k());
    const auto from = control_points(sv, sg);
    const auto to = control_points(tv, tg);

    std::vector<double> out(source.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = std::clamp(piecewise_linear(source.data()[i], from, to), 0.0, 1.0);
    }
    return Image(source.width(), source.height(), std::move(out));
}

const std::array<Rgb, 256> &diverging_colormap() {
    static const std::array<Rgb, 256> table = {{
#include "colormap_bwy256.inc"
    }};
    return table;
}

DifferenceImage difference_image(const Image &fixed, const Image &matched_warped, const BinaryGrid &roi) {
    if (fixed.width() != matched_warped.width() || fixed.height() != matched_warped.height() ||
        roi.width != fixed.width() || roi.height != fixed.height()) {
        throw DimensionMismatch("difference_image: input sizes differ");
    }
    const std::size_t n = fixed.size();
    DifferenceImage d;
    d.width = fixed.width();
    d.height = fixed.height();
    d.roi = roi;
    d.values.assign(n, 0.0);
    d.index.assign(n, kNeutralIndex);
    d.rgb.resize(3 * n);

    std::size_t count = 0;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!roi.pixels[i]) continue;
        d.values[i] = fixed.data()[i] - matched_warped.data()[i];
        sum += d.values[i];
        ++count;
    }
    if (count == 0) throw InvalidInput("EmptyMask", "difference roi is empty");
    d.raw_mean = sum / static_cast<double>(count);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (roi.pixels[i]) var += (d.values[i] - d.raw_mean) * (d.values[i] - d.raw_mean);
    }
    d.raw_std = std::sqrt(var / static_cast<double>(count));
    d.clip_low = d.raw_mean - 4.0 * d.raw_std;
    d.clip_high = d.raw_mean + 4.0 * d.raw_std;

    double clipped_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!roi.pixels[i]) continue;
        d.values[i] = std::clamp(d.values[i], d.clip_low, d.clip_high);
        clipped_sum += d.values[i];
    }
    const double centre = clipped_sum / static_cast<double>(count);
    for (std::size_t i = 0; i < n; ++i) {
        if (roi.pixels[i]) d.values[i] -= centre;
    }
    d.range = std::max(d.clip_high - centre, centre - d.clip_low);
    if (d.range < kDifferenceRangeFloor) {
        // Rounding residue only; render neutral.
        std::fill(d.values.begin(), d.values.end(), 0.0);
        d.range = 0.0;
    }

    const auto &cmap = diverging_colormap();
    for (std::size_t i = 0; i < n; ++i) {
        if (roi.pixels[i] && d.range > 0.0) {
            const long idx = std::lround(127.5 + 127.5 * d.values[i] / d.range);
            d.index[i] = static_cast<std::uint8_t>(std::clamp(idx, 0L, 255L));
        }
        const Rgb &c = cmap[d.index[i]];
        d.rgb[3 * i] = c[0];
        d.rgb[3 * i + 1] = c[1];
        d.rgb[3 * i + 2] = c[2];
    }
    return d;
}

DifferenceImage difference_pipeline(const Image &fixed, const Image &warped, const LabelMask &ribcage, double margin,
                                    int gmm_components) {
    if (ribcage.width() != fixed.width() || ribcage.height() != fixed.height()) {
        throw DimensionMismatch("difference_pipeline: rib cage mask does not match the image");
    }
    const BinaryGrid roi = rib_hull_roi(ribcage, margin);
    const Gmm1D g = fit_gmm_1d(roi_values(warped, roi.view()), gmm_components);
    const Image matched = histogram_transfer(warped, fixed, roi.view(), g);
    return difference_image(fixed, matched, roi);
}

}  // namespace cxreg
