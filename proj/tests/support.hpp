// Shared fixtures for the unit and acceptance tests.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cxreg/diff_viz.hpp"
#include "cxreg/grid.hpp"
#include "cxreg/losses.hpp"
#include "cxreg/metrics.hpp"
#include "cxreg/phantom.hpp"
#include "cxreg/registration.hpp"

namespace cxtest {

using namespace cxreg;

inline double uniform(std::mt19937_64 &rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Image random_image(int w, int h, std::mt19937_64 &rng) {
    std::vector<double> v(static_cast<std::size_t>(w) * h);
    for (auto &x : v) x = uniform(rng, 0.0, 1.0);
    return Image(w, h, std::move(v));
}

// Smooth random image: a few Gaussian bumps over a ramp, so that ncc is well posed.
inline Image smooth_image(int w, int h, std::mt19937_64 &rng, int bumps = 4) {
    std::vector<double> v(static_cast<std::size_t>(w) * h, 0.0);
    std::vector<std::array<double, 4>> b;
    for (int i = 0; i < bumps; ++i) {
        b.push_back({uniform(rng, 0, w - 1), uniform(rng, 0, h - 1), uniform(rng, 1.5, 4.0), uniform(rng, -0.4, 0.4)});
    }
    const double gx = uniform(rng, -0.02, 0.02), gy = uniform(rng, -0.02, 0.02);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double s = 0.5 + gx * (x - w / 2.0) + gy * (y - h / 2.0);
            for (const auto &q : b) {
                const double d2 = (x - q[0]) * (x - q[0]) + (y - q[1]) * (y - q[1]);
                s += q[3] * std::exp(-0.5 * d2 / (q[2] * q[2]));
            }
            v[static_cast<std::size_t>(y) * w + x] = s;
        }
    }
    // Rescale into [0.05, 0.95].
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    const double a = *lo, span = std::max(*hi - *lo, 1e-12);
    for (double &x : v) x = 0.05 + 0.9 * (x - a) / span;
    return Image(w, h, std::move(v));
}

inline DisplacementField random_field(int w, int h, std::mt19937_64 &rng, double amplitude) {
    std::vector<Vec2> u(static_cast<std::size_t>(w) * h);
    for (auto &p : u) p = Vec2{uniform(rng, -amplitude, amplitude), uniform(rng, -amplitude, amplitude)};
    return DisplacementField(w, h, std::move(u));
}

// Blocky random label mask so that labels form regions rather than salt noise.
inline LabelMask random_mask(int w, int h, LabelSemantics s, std::mt19937_64 &rng, int block = 4) {
    const auto set = label_set(s);
    LabelMask m(w, h, s);
    const int bw = (w + block - 1) / block, bh = (h + block - 1) / block;
    std::vector<std::uint8_t> cells(static_cast<std::size_t>(bw) * bh);
    std::uniform_int_distribution<std::size_t> pick(0, set.size() - 1);
    for (auto &c : cells) c = set[pick(rng)];
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) m.set(x, y, cells[static_cast<std::size_t>(y / block) * bw + x / block]);
    }
    return m;
}

inline std::vector<std::uint8_t> random_binary(int w, int h, std::mt19937_64 &rng, double p) {
    std::vector<std::uint8_t> v(static_cast<std::size_t>(w) * h);
    for (auto &x : v) x = uniform(rng, 0.0, 1.0) < p ? 1 : 0;
    return v;
}

inline const char *mode_name(PenalizationMode m) {
    switch (m) {
        case PenalizationMode::Unsupervised: return "unsup";
        case PenalizationMode::Lung: return "lung";
        case PenalizationMode::RibCage: return "ribcage";
        case PenalizationMode::RibPairs: return "ribpairs";
    }
    return "?";
}

inline constexpr PenalizationMode kAllModes[] = {PenalizationMode::Unsupervised, PenalizationMode::Lung,
                                                 PenalizationMode::RibCage, PenalizationMode::RibPairs};

// A moving phantom and a fixed phantom of the same subject at a later time: fainter
// ribs, an enlarged heart, a lower diaphragm edge, breathing motion and a small shift.
struct SuitePair {
    Phantom moving;
    DeformedPhantom fixed;
};

inline SuitePair suite_pair(std::uint64_t seed) {
    std::mt19937_64 rng(seed * 7919 + 13);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto u = [&](double a, double b) { return a + (b - a) * unit(rng); };
    PhantomParams p;
    p.seed = seed;
    p.rib_spacing = u(0.058, 0.066);
    p.rib_drop = u(0.26, 0.34);
    p.lung_rx = u(0.155, 0.175);
    p.heart_rx = u(0.12, 0.14);
    p.rib_contrast = 0.12;
    PhantomParams q = p;
    q.rib_contrast = p.rib_contrast * 0.7;
    const double f = u(1.15, 1.3);
    q.heart_rx *= f;
    q.heart_ry *= f;
    q.diaphragm -= u(0.02, 0.04);
    q.noise = 0.0;

    SuitePair out{generate_phantom(p), {}};
    const Phantom later = generate_phantom(q);
    const double dx = u(-3, 3), dy = u(-3, 3);
    const std::vector<DeformationSpec> ds{Translation{dx, dy}, SmoothRandomField{3.0, 64.0, seed + 1000},
                                          DiaphragmRaise{u(0.5, 1.0) * 10.0}};
    out.fixed = deform_phantom(later, ds);
    out.fixed.image = add_noise(out.fixed.image, p.noise, seed + 5000);
    return out;
}

inline ImagePair pair_for_mode(const Phantom &mov, const LabelMask &fr, const LabelMask &fl, const LabelMask &fc,
                               const Image &fixed, PenalizationMode m) {
    switch (m) {
        case PenalizationMode::Unsupervised: return ImagePair(mov.image, fixed);
        case PenalizationMode::Lung: return ImagePair(mov.image, fixed, mov.lungs, fl);
        case PenalizationMode::RibCage: return ImagePair(mov.image, fixed, mov.ribcage, fc);
        case PenalizationMode::RibPairs: return ImagePair(mov.image, fixed, mov.ribs, fr);
    }
    return ImagePair(mov.image, fixed);
}

inline ImagePair pair_for_mode(const SuitePair &s, PenalizationMode m) {
    return pair_for_mode(s.moving, s.fixed.ribs, s.fixed.lungs, s.fixed.ribcage, s.fixed.image, m);
}

inline void fill_rect(LabelMask &m, int x0, int y0, int w, int h, std::uint8_t label) {
    for (int y = y0; y < y0 + h; ++y) {
        for (int x = x0; x < x0 + w; ++x) m.set(x, y, label);
    }
}

// Nine well-formed rib pairs of 400 px ribs with aligned tops, optionally with one
// defect from the failure taxonomy: a third large component (label 2), a missing right
// rib (label 2), a right rib 40% larger (label 2) or a right rib 60 rows lower (label 10).
enum class QcDefect { None, ExtraComponent, SingleRib, SizeMismatch, HeightMismatch };

inline LabelMask qc_fixture(QcDefect defect) {
    LabelMask m(300, 300, LabelSemantics::RibPairs);
    for (int i = 0; i < 9; ++i) {
        const auto label = static_cast<std::uint8_t>(i + 2);
        const int top = 10 + 25 * i;
        fill_rect(m, 20, top, 40, 10, label);
        int right_w = 40, right_top = top;
        if (label == 2 && defect == QcDefect::SizeMismatch) right_w = 56;
        if (label == 10 && defect == QcDefect::HeightMismatch) right_top = top + 60;
        if (!(label == 2 && defect == QcDefect::SingleRib)) fill_rect(m, 200, right_top, right_w, 10, label);
        if (label == 2 && defect == QcDefect::ExtraComponent) fill_rect(m, 110, top, 40, 10, label);
    }
    return m;
}

// Median endpoint error between two fields over the pixels of `roi`.
inline double median_endpoint_error(const DisplacementField &a, const DisplacementField &b, const BinaryGrid &roi) {
    std::vector<double> e;
    for (std::size_t i = 0; i < roi.pixels.size(); ++i) {
        if (!roi.pixels[i]) continue;
        const Vec2 p = a.data()[i], q = b.data()[i];
        e.push_back(std::hypot(p.x - q.x, p.y - q.y));
    }
    std::nth_element(e.begin(), e.begin() + e.size() / 2, e.end());
    if (e.size() % 2) return e[e.size() / 2];
    const double hi = e[e.size() / 2];
    return 0.5 * (hi + *std::max_element(e.begin(), e.begin() + e.size() / 2));
}

}  // namespace cxtest
