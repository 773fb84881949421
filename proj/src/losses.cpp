// losses.cpp - registration loss terms and gradients.

#include "cxreg/losses.hpp"

#include <algorithm>
#include <cmath>

namespace cxreg {

namespace {

template <class A, class B>
void require_same_dims(const A &a, const B &b, const char *what) {
    if (a.width() != b.width() || a.height() != b.height()) {
        throw DimensionMismatch(std::string(what) + ": grids differ in size");
    }
}

double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

struct NccParts {
    double value = 0.0;
    double a_mean = 0.0;
    double b_mean = 0.0;
    double cross = 0.0;  // sum (a - a_mean)(b - b_mean)
    double a_ss = 0.0;   // sum (a - a_mean)^2
    double b_ss = 0.0;
    double denom = 0.0;
    bool degenerate = false;
};

NccParts ncc_parts(std::span<const double> a, std::span<const double> b) {
    NccParts p;
    p.a_mean = mean_of(a);
    p.b_mean = mean_of(b);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - p.a_mean;
        const double db = b[i] - p.b_mean;
        p.cross += da * db;
        p.a_ss += da * da;
        p.b_ss += db * db;
    }
    p.denom = std::sqrt(p.a_ss * p.b_ss + kNccEpsilon);
    p.value = p.cross / p.denom;
    p.degenerate = p.a_ss == 0.0 || p.b_ss == 0.0;
    return p;
}

// Horizontal and vertical pair weights of the tv term; see total_variation().
struct TvWeights {
    double kx = 0.0;
    double ky = 0.0;
};

TvWeights tv_weights(int w, int h) {
    // Half of (mean over x-pairs and both components + mean over y-pairs and both components).
    return TvWeights{0.5 / (2.0 * (w - 1) * h), 0.5 / (2.0 * w * (h - 1))};
}

}  // namespace

ImagePair::ImagePair(Image moving, Image fixed) : moving_(std::move(moving)), fixed_(std::move(fixed)) {
    require_same_dims(moving_, fixed_, "ImagePair");
}

ImagePair::ImagePair(Image moving, Image fixed, LabelMask moving_mask, LabelMask fixed_mask)
    : moving_(std::move(moving)), fixed_(std::move(fixed)), moving_mask_(std::move(moving_mask)),
      fixed_mask_(std::move(fixed_mask)) {
    require_same_dims(moving_, fixed_, "ImagePair");
    require_same_dims(moving_, *moving_mask_, "ImagePair moving mask");
    require_same_dims(moving_, *fixed_mask_, "ImagePair fixed mask");
    if (moving_mask_->semantics() != fixed_mask_->semantics()) {
        throw InvalidInput("LabelSetMismatch", "moving and fixed masks use different label semantics");
    }
}

double ncc(const Image &a, const Image &b) {
    require_same_dims(a, b, "ncc");
    return ncc_parts(a.data(), b.data()).value;
}

double total_variation(const DisplacementField &field) {
    const int w = field.width();
    const int h = field.height();
    const TvWeights k = tv_weights(w, h);
    double sx = 0.0;
    double sy = 0.0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Vec2 &u = field.at(x, y);
            if (x + 1 < w) {
                const Vec2 &r = field.at(x + 1, y);
                sx += (r.x - u.x) * (r.x - u.x) + (r.y - u.y) * (r.y - u.y);
            }
            if (y + 1 < h) {
                const Vec2 &d = field.at(x, y + 1);
                sy += (d.x - u.x) * (d.x - u.x) + (d.y - u.y) * (d.y - u.y);
            }
        }
    }
    return k.kx * sx + k.ky * sy;
}

double cross_entropy(const OccupancyStack &warped, const LabelMask &fixed) {
    if (warped.width != fixed.width() || warped.height != fixed.height()) {
        throw DimensionMismatch("cross_entropy: occupancy and fixed mask differ in size");
    }
    if (warped.semantics != fixed.semantics()) {
        throw InvalidInput("LabelSetMismatch", "cross_entropy: occupancy and fixed mask label sets differ");
    }
    const auto labels = fixed.labels();
    double s = 0.0;
    for (std::size_t p = 0; p < labels.size(); ++p) {
        const double occ = warped.grid_for(labels[p])[p];
        s -= std::log(std::clamp(occ, kCeEpsilon, 1.0));
    }
    return s / static_cast<double>(labels.size());
}

LossEvaluation evaluate_loss(const ImagePair &pair, const DisplacementField &field, const LossWeights &weights) {
    require_same_dims(pair.fixed(), field, "evaluate_loss");
    const int w = pair.width();
    const int h = pair.height();
    const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    const auto moving = pair.moving().data();
    const auto fixed = pair.fixed().data();

    LossEvaluation out{LossBreakdown{}, DisplacementField(w, h)};
    auto grad = out.gradient.data();

    // Warp with image gradients at the sample points.
    std::vector<double> warped(n);
    std::vector<double> wgx(n);
    std::vector<double> wgy(n);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t p = field.index(x, y);
            const Vec2 &u = field.data()[p];
            const auto s = bilinear_stencil(w, h, x + u.x, y + u.y);
            double v = 0.0, gx = 0.0, gy = 0.0;
            for (int k = 0; k < 4; ++k) {
                v += s.w[k] * moving[s.idx[k]];
                gx += s.wdx[k] * moving[s.idx[k]];
                gy += s.wdy[k] * moving[s.idx[k]];
            }
            warped[p] = v;
            wgx[p] = gx;
            wgy[p] = gy;
        }
    }

    const NccParts nc = ncc_parts(warped, fixed);
    out.loss.ncc_term = nc.value;
    out.loss.degenerate = nc.degenerate;
    {
        const double inv_d = 1.0 / nc.denom;
        const double k2 = nc.cross * nc.b_ss * inv_d * inv_d * inv_d;
        for (std::size_t p = 0; p < n; ++p) {
            const double dncc = (fixed[p] - nc.b_mean) * inv_d - k2 * (warped[p] - nc.a_mean);
            grad[p].x = -dncc * wgx[p];
            grad[p].y = -dncc * wgy[p];
        }
    }

    // Smoothness.
    out.loss.tv_term = total_variation(field);
    if (weights.lambda_r != 0.0) {
        const TvWeights k = tv_weights(w, h);
        const double cx = 2.0 * k.kx * weights.lambda_r;
        const double cy = 2.0 * k.ky * weights.lambda_r;
        const auto u = field.data();
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const std::size_t p = field.index(x, y);
                if (x + 1 < w) {
                    const std::size_t q = p + 1;
                    const double dx = u[q].x - u[p].x;
                    const double dy = u[q].y - u[p].y;
                    grad[q].x += cx * dx;
                    grad[q].y += cx * dy;
                    grad[p].x -= cx * dx;
                    grad[p].y -= cx * dy;
                }
                if (y + 1 < h) {
                    const std::size_t q = p + static_cast<std::size_t>(w);
                    const double dx = u[q].x - u[p].x;
                    const double dy = u[q].y - u[p].y;
                    grad[q].x += cy * dx;
                    grad[q].y += cy * dy;
                    grad[p].x -= cy * dx;
                    grad[p].y -= cy * dy;
                }
            }
        }
    }

    // Anatomy penalty: only the occupancy of each pixel's fixed label is needed.
    if (pair.has_masks()) {
        const auto ml = pair.moving_mask().labels();
        const auto fl = pair.fixed_mask().labels();
        const double inv_n = 1.0 / static_cast<double>(n);
        double ce = 0.0;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const std::size_t p = field.index(x, y);
                const Vec2 &u = field.data()[p];
                const auto s = bilinear_stencil(w, h, x + u.x, y + u.y);
                const std::uint8_t target = fl[p];
                double occ = 0.0, ox = 0.0, oy = 0.0;
                for (int k = 0; k < 4; ++k) {
                    if (ml[s.idx[k]] == target) {
                        occ += s.w[k];
                        ox += s.wdx[k];
                        oy += s.wdy[k];
                    }
                }
                const double clipped = std::clamp(occ, kCeEpsilon, 1.0);
                ce -= std::log(clipped);
                if (occ > kCeEpsilon && weights.lambda_seg != 0.0) {
                    const double c = -weights.lambda_seg * inv_n / clipped;
                    grad[p].x += c * ox;
                    grad[p].y += c * oy;
                }
            }
        }
        out.loss.ce_term = ce * inv_n;
    }

    out.loss.total = -out.loss.ncc_term + weights.lambda_r * out.loss.tv_term +
                     weights.lambda_seg * out.loss.ce_term;
    return out;
}

LossBreakdown combined_loss(const ImagePair &pair, const DisplacementField &field, const LossWeights &w) {
    return evaluate_loss(pair, field, w).loss;
}

DisplacementField loss_gradient(const ImagePair &pair, const DisplacementField &field, const LossWeights &w) {
    return evaluate_loss(pair, field, w).gradient;
}

}  // namespace cxreg
