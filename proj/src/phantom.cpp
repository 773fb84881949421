// phantom.cpp - synthetic chest phantom generator.

#include "cxreg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace cxreg {

namespace {

double coverage(double signed_distance) { return std::clamp(0.5 - signed_distance, 0.0, 1.0); }

// Approximate signed distance (pixels) to an axis-aligned ellipse, negative inside.
double ellipse_sd(double x, double y, double cx, double cy, double rx, double ry) {
    const double dx = x - cx;
    const double dy = y - cy;
    const double rho = std::sqrt((dx / rx) * (dx / rx) + (dy / ry) * (dy / ry));
    if (rho < 1e-12) return -std::min(rx, ry);
    const double gx = dx / (rx * rx) / rho;
    const double gy = dy / (ry * ry) / rho;
    return (rho - 1.0) / std::sqrt(gx * gx + gy * gy);
}

struct RibGeometry {
    double centre_x;
    double inner;
    double outer;
    double half_thickness;
    double rise;
    double drop;
    double top;
    double spacing;

    double tau(double t) const { return (t - inner) / (outer - inner); }
    // Centreline height of rib `i` at lateral distance t from the midline.
    double centre_y(int i, double t) const {
        const double s = tau(t);
        return top + i * spacing + (outer - inner) * (-rise * s + drop * s * s) / 0.335;
    }
    double slope(double t) const {
        const double s = tau(t);
        return (-rise + 2.0 * drop * s) / 0.335;
    }
};

RibGeometry rib_geometry(const PhantomParams &p) {
    const double S = p.size;
    return RibGeometry{0.5 * (S - 1), p.rib_inner * S, p.rib_outer * S, 0.5 * p.rib_thickness * S,
                       p.rib_rise,    p.rib_drop,      p.rib_top * S,   p.rib_spacing * S};
}

void check_geometry(const PhantomParams &p) {
    auto fail = [](const std::string &what) { throw InvalidInput("GeometryOverflow", what); };
    if (p.size < 16) fail("phantom size must be at least 16");
    if (p.rib_pairs < 1 || p.rib_pairs > 9) fail("rib pair count must be within 1..9");
    if (p.rib_thickness <= 0 || p.rib_spacing <= p.rib_thickness) fail("ribs must be thinner than their spacing");
    if (p.rib_inner < 0 || p.rib_outer <= p.rib_inner || p.rib_outer >= 0.5) fail("rib lateral extent outside the grid");
    const RibGeometry g = rib_geometry(p);
    const double S = p.size;
    double lo = S, hi = 0;
    for (int i = 0; i < p.rib_pairs; ++i) {
        for (int k = 0; k <= 20; ++k) {
            const double t = g.inner + (g.outer - g.inner) * k / 20.0;
            lo = std::min(lo, g.centre_y(i, t) - 2 * g.half_thickness);
            hi = std::max(hi, g.centre_y(i, t) + 2 * g.half_thickness);
        }
    }
    if (lo < 1 || hi > S - 2) fail("rib cage does not fit vertically");
    const double lung_left = 0.5 - p.lung_offset - p.lung_rx;
    const double lung_right = 0.5 + p.lung_offset + p.lung_rx;
    if (lung_left <= 0.0 || lung_right >= 1.0) fail("lungs do not fit horizontally");
    if (p.lung_center_y - p.lung_ry <= 0.0 || p.lung_center_y + p.lung_ry >= 1.0) fail("lungs do not fit vertically");
    if (p.body_rx <= 0 || p.body_rx > 0.5 || p.body_ry <= 0 || p.body_ry > 0.5) fail("body ellipse outside the grid");
    if (p.heart_rx <= 0 || p.heart_ry <= 0) fail("heart radii must be positive");
    if (p.diaphragm <= 0 || p.diaphragm >= 1) fail("diaphragm level outside the grid");
}

double quantize_level(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 65535.0) / 65535.0; }

}  // namespace

Image quantize16(const Image &img) {
    std::vector<double> out(img.data().begin(), img.data().end());
    for (double &v : out) v = quantize_level(v);
    return Image(img.width(), img.height(), std::move(out));
}

Image add_noise(const Image &img, double sigma, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01(0.0, 1.0);
    std::vector<double> out(img.data().begin(), img.data().end());
    for (double &v : out) v = quantize_level(v + sigma * n01(rng));
    return Image(img.width(), img.height(), std::move(out));
}

Phantom generate_phantom(const PhantomParams &p) {
    check_geometry(p);
    const int S = p.size;
    const double Sd = S;
    const double cx = 0.5 * (Sd - 1);
    const RibGeometry g = rib_geometry(p);

    Phantom ph{p, Image(S, S), LabelMask(S, S, LabelSemantics::RibPairs), LabelMask(S, S, LabelSemantics::LungPair),
               LabelMask(S, S, LabelSemantics::Binary)};

    const double lung_cx[2] = {cx - p.lung_offset * Sd, cx + p.lung_offset * Sd};
    std::vector<double> value(static_cast<std::size_t>(S) * S);

    for (int y = 0; y < S; ++y) {
        for (int x = 0; x < S; ++x) {
            const double body = coverage(ellipse_sd(x, y, cx, 0.5 * (Sd - 1), p.body_rx * Sd, p.body_ry * Sd));
            const double heart = coverage(ellipse_sd(x, y, p.heart_cx * Sd, p.heart_cy * Sd, p.heart_rx * Sd, p.heart_ry * Sd));

            double lung = 0.0;
            std::uint8_t lung_label = 0;
            for (int k = 0; k < 2; ++k) {
                const double in_ellipse =
                    coverage(ellipse_sd(x, y, lung_cx[k], p.lung_center_y * Sd, p.lung_rx * Sd, p.lung_ry * Sd));
                const double q = (x - lung_cx[k]) / (p.lung_rx * Sd);
                const double dome_y = p.diaphragm * Sd - p.diaphragm_dome * Sd * std::max(0.0, 1.0 - q * q);
                const double above = coverage(y - dome_y);
                const double c = std::min({in_ellipse, 1.0 - heart, above});
                if (c > lung) lung = c;
                if (c >= 0.5) lung_label = static_cast<std::uint8_t>(k + 1);
            }

            // Rib bands.
            double rib = 0.0;
            std::uint8_t rib_label = 0;
            const double t = std::abs(x - cx);
            const double along = std::min(t - g.inner, g.outer - t);
            if (along > -1.0) {
                const double cos_theta = 1.0 / std::sqrt(1.0 + g.slope(t) * g.slope(t));
                for (int i = 0; i < p.rib_pairs; ++i) {
                    const double d = std::abs(y - g.centre_y(i, t)) * cos_theta - g.half_thickness;
                    const double c = std::min(coverage(d), std::clamp(along + 0.5, 0.0, 1.0));
                    rib = std::max(rib, c);
                    if (d <= 0.0 && along >= 0.0) rib_label = static_cast<std::uint8_t>(i + 2);
                }
            }

            double v = p.background_level + body * (p.tissue_level - p.background_level);
            v += lung * (p.lung_level - p.tissue_level);
            v += rib * body * p.rib_contrast;
            value[static_cast<std::size_t>(y) * S + x] = v;

            ph.lungs.set(x, y, lung_label);
            ph.ribs.set(x, y, rib_label);
            ph.ribcage.set(x, y, rib_label ? 1 : 0);
        }
    }

    std::mt19937_64 rng(p.seed);
    std::normal_distribution<double> n01(0.0, 1.0);
    for (double &v : value) v = quantize_level(v + (p.noise > 0.0 ? p.noise * n01(rng) : 0.0));
    ph.image = Image(S, S, std::move(value));
    return ph;
}

namespace {

struct FieldBuilder {
    const Phantom &ph;
    int S;

    DisplacementField operator()(const Translation &t) const { return DisplacementField(S, S, Vec2{t.dx, t.dy}); }

    DisplacementField operator()(const AffineScaleRotate &a) const {
        if (!(a.scale > 0.0)) throw InvalidInput("InvalidDeformation", "scale must be positive");
        DisplacementField f(S, S);
        const double c = 0.5 * (S - 1);
        const double th = -a.angle_deg * std::numbers::pi / 180.0;
        const double cs = std::cos(th), sn = std::sin(th);
        for (int y = 0; y < S; ++y) {
            for (int x = 0; x < S; ++x) {
                const double dx = (x - c) / a.scale;
                const double dy = (y - c) / a.scale;
                f.at(x, y) = Vec2{c + cs * dx - sn * dy - x, c + sn * dx + cs * dy - y};
            }
        }
        return f;
    }

    DisplacementField operator()(const SmoothRandomField &r) const {
        if (!(r.spacing >= 1.0) || !(r.amplitude >= 0.0)) throw InvalidInput("InvalidDeformation", "bad smooth field");
        const int nodes = static_cast<int>(std::ceil((S - 1) / r.spacing)) + 2;
        std::mt19937_64 rng(r.seed);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        std::vector<Vec2> lattice(static_cast<std::size_t>(nodes) * nodes);
        for (Vec2 &v : lattice) {
            v.x = u(rng);
            v.y = u(rng);
        }
        DisplacementField f(S, S);
        double peak = 0.0;
        for (int y = 0; y < S; ++y) {
            const double gy = y / r.spacing;
            const int iy = std::min(static_cast<int>(gy), nodes - 2);
            const double fy = gy - iy;
            for (int x = 0; x < S; ++x) {
                const double gx = x / r.spacing;
                const int ix = std::min(static_cast<int>(gx), nodes - 2);
                const double fx = gx - ix;
                const Vec2 &a = lattice[static_cast<std::size_t>(iy) * nodes + ix];
                const Vec2 &b = lattice[static_cast<std::size_t>(iy) * nodes + ix + 1];
                const Vec2 &c = lattice[static_cast<std::size_t>(iy + 1) * nodes + ix];
                const Vec2 &d = lattice[static_cast<std::size_t>(iy + 1) * nodes + ix + 1];
                Vec2 v{(1 - fx) * (1 - fy) * a.x + fx * (1 - fy) * b.x + (1 - fx) * fy * c.x + fx * fy * d.x,
                       (1 - fx) * (1 - fy) * a.y + fx * (1 - fy) * b.y + (1 - fx) * fy * c.y + fx * fy * d.y};
                f.at(x, y) = v;
                peak = std::max(peak, std::hypot(v.x, v.y));
            }
        }
        const double k = peak > 0.0 ? r.amplitude / peak : 0.0;
        for (Vec2 &v : f.data()) {
            v.x *= k;
            v.y *= k;
        }
        return f;
    }

    DisplacementField operator()(const HeartEnlargement &h) const {
        if (!(h.factor > 0.0)) throw InvalidInput("InvalidDeformation", "heart factor must be positive");
        const auto &p = ph.params;
        const double hx = p.heart_cx * S, hy = p.heart_cy * S, rx = p.heart_rx * S, ry = p.heart_ry * S;
        const double phi0 = 1.0 - 1.0 / h.factor;
        DisplacementField f(S, S);
        for (int y = 0; y < S; ++y) {
            for (int x = 0; x < S; ++x) {
                const double dx = x - hx, dy = y - hy;
                const double rho = std::sqrt((dx / rx) * (dx / rx) + (dy / ry) * (dy / ry));
                double phi = 0.0;
                if (rho <= 1.0) phi = phi0;
                else if (rho < 2.0) phi = phi0 * (2.0 - rho);
                f.at(x, y) = Vec2{-dx * phi, -dy * phi};
            }
        }
        return f;
    }

    DisplacementField operator()(const DiaphragmRaise &d) const {
        const double ya = 0.45 * S;
        const double yd = ph.params.diaphragm * S;
        DisplacementField f(S, S);
        for (int y = 0; y < S; ++y) {
            const double s = std::clamp((y - ya) / (yd - ya), 0.0, 1.0);
            const double shift = d.pixels * s * s * (3.0 - 2.0 * s);
            for (int x = 0; x < S; ++x) f.at(x, y) = Vec2{0.0, shift};
        }
        return f;
    }

    DisplacementField operator()(const OpacityBlob &) const { return DisplacementField(S, S); }
};

void add_blob(Image &img, const OpacityBlob &b) {
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const double d = std::hypot(x - b.cx, y - b.cy) - b.radius;
            const double c = coverage(d);
            if (c > 0.0) img.at(x, y) = quantize_level(img.at(x, y) + b.intensity * c);
        }
    }
}

}  // namespace

DisplacementField deformation_field(const Phantom &ph, const DeformationSpec &d) {
    return std::visit(FieldBuilder{ph, ph.params.size}, d);
}

DeformedPhantom deform_phantom(const Phantom &ph, const DeformationSpec &d) {
    return deform_phantom(ph, std::vector<DeformationSpec>{d});
}

DeformedPhantom deform_phantom(const Phantom &ph, const std::vector<DeformationSpec> &ds) {
    const int S = ph.params.size;
    DisplacementField total(S, S);
    for (const auto &d : ds) total = compose_fields(total, deformation_field(ph, d));
    DeformedPhantom out{quantize16(warp_image(ph.image, total)), warp_mask_hard(ph.ribs, total),
                        warp_mask_hard(ph.lungs, total), warp_mask_hard(ph.ribcage, total), total};
    for (const auto &d : ds) {
        if (const auto *b = std::get_if<OpacityBlob>(&d)) add_blob(out.image, *b);
    }
    return out;
}

}  // namespace cxreg
