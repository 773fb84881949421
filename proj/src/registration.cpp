// registration.cpp - coarse-to-fine minimisation of the registration loss.

#include "cxreg/registration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cxreg {

std::string to_string(PenalizationMode m) {
    switch (m) {
        case PenalizationMode::Unsupervised: return "unsup";
        case PenalizationMode::Lung: return "lung";
        case PenalizationMode::RibCage: return "ribcage";
        case PenalizationMode::RibPairs: return "ribpairs";
    }
    return "unsup";
}

PenalizationMode penalization_mode_from_string(const std::string &s) {
    if (s == "unsup") return PenalizationMode::Unsupervised;
    if (s == "lung") return PenalizationMode::Lung;
    if (s == "ribcage") return PenalizationMode::RibCage;
    if (s == "ribpairs") return PenalizationMode::RibPairs;
    throw InvalidInput("UnknownMode", "unknown penalization mode '" + s + "'");
}

std::optional<LabelSemantics> required_semantics(PenalizationMode m) {
    switch (m) {
        case PenalizationMode::Unsupervised: return std::nullopt;
        case PenalizationMode::Lung: return LabelSemantics::LungPair;
        case PenalizationMode::RibCage: return LabelSemantics::Binary;
        case PenalizationMode::RibPairs: return LabelSemantics::RibPairs;
    }
    return std::nullopt;
}

std::string to_string(OptimizerKind k) { return k == OptimizerKind::Adam ? "adam" : "gd"; }

OptimizerKind optimizer_kind_from_string(const std::string &s) {
    if (s == "adam") return OptimizerKind::Adam;
    if (s == "gd") return OptimizerKind::GradientDescent;
    throw InvalidInput("UnknownOptimizer", "unknown optimizer '" + s + "'");
}

void RegistrationConfig::validate() const {
    auto fail = [](const std::string &what) { throw InvalidInput("InvalidConfig", what); };
    if (stage1_size < 2) fail("stage1_size must be at least 2");
    if (stage2_size < stage1_size) fail("stage2_size must not be smaller than stage1_size");
    if (!(std::isfinite(lr) && lr > 0.0)) fail("lr must be finite and positive");
    if (!(std::isfinite(lambda_seg) && lambda_seg >= 0.0)) fail("lambda_seg must be finite and non-negative");
    if (!(std::isfinite(lambda_r_stage1) && lambda_r_stage1 >= 0.0)) fail("lambda_r_stage1 must be finite and non-negative");
    if (!(std::isfinite(lambda_r_stage2) && lambda_r_stage2 >= 0.0)) fail("lambda_r_stage2 must be finite and non-negative");
    if (iters_stage1 < 1 || iters_stage2 < 1) fail("iteration budgets must be positive");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) fail("Adam betas must lie in [0,1)");
    if (!(std::isfinite(adam_epsilon) && adam_epsilon > 0.0)) fail("adam_epsilon must be positive");
    if (!(std::isfinite(gradient_sigma) && gradient_sigma >= 0.0)) fail("gradient_sigma must be finite and non-negative");
    if (!(std::isfinite(update_sigma) && update_sigma >= 0.0)) fail("update_sigma must be finite and non-negative");
}

namespace {

std::vector<double> gaussian_kernel(double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double s = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
        k[static_cast<std::size_t>(i + radius)] = v;
        s += v;
    }
    for (double &v : k) v /= s;
    return k;
}

// Separable Gaussian blur of both components with replicated borders.
void smooth_in_place(std::vector<Vec2> &g, int w, int h, double sigma) {
    if (sigma <= 0.0) return;
    const auto k = gaussian_kernel(sigma);
    const int r = static_cast<int>(k.size() / 2);
    std::vector<Vec2> tmp(g.size());
    for (int y = 0; y < h; ++y) {
        const std::size_t row = static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            Vec2 acc;
            for (int i = -r; i <= r; ++i) {
                const int xx = std::clamp(x + i, 0, w - 1);
                const double c = k[static_cast<std::size_t>(i + r)];
                acc.x += c * g[row + xx].x;
                acc.y += c * g[row + xx].y;
            }
            tmp[row + x] = acc;
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            Vec2 acc;
            for (int i = -r; i <= r; ++i) {
                const int yy = std::clamp(y + i, 0, h - 1);
                const double c = k[static_cast<std::size_t>(i + r)];
                acc.x += c * tmp[static_cast<std::size_t>(yy) * w + x].x;
                acc.y += c * tmp[static_cast<std::size_t>(yy) * w + x].y;
            }
            g[static_cast<std::size_t>(y) * w + x] = acc;
        }
    }
}

DisplacementField round_to_single(const DisplacementField &f) {
    DisplacementField out = f;
    for (Vec2 &v : out.data()) {
        v.x = static_cast<double>(static_cast<float>(v.x));
        v.y = static_cast<double>(static_cast<float>(v.y));
    }
    return out;
}

ImagePair resample_pair(const ImagePair &p, int w, int h) {
    if (p.has_masks()) {
        return ImagePair(resample_image(p.moving(), w, h), resample_image(p.fixed(), w, h),
                         resample_mask(p.moving_mask(), w, h), resample_mask(p.fixed_mask(), w, h));
    }
    return ImagePair(resample_image(p.moving(), w, h), resample_image(p.fixed(), w, h));
}

}  // namespace

StageResult register_stage(const ImagePair &pair, const DisplacementField &init, const LossWeights &weights,
                           const RegistrationConfig &cfg, int iters, double stage_scale) {
    cfg.validate();
    if (init.width() != pair.width() || init.height() != pair.height()) {
        throw DimensionMismatch("register_stage: initial field does not match the stage resolution");
    }
    if (iters < 0) throw InvalidInput("InvalidConfig", "iteration budget must be non-negative");

    const int w = pair.width();
    const int h = pair.height();
    const std::size_t n = init.size();
    // The optimiser works on displacements expressed as fractions of the grid extent.
    const double sx = static_cast<double>(w);
    const double sy = static_cast<double>(h);

    DisplacementField current = init;
    StageResult result{init, {}, 0, std::nullopt};
    double best = std::numeric_limits<double>::infinity();

    std::vector<Vec2> m1(n), m2(n), step(n);
    double b1t = 1.0, b2t = 1.0;

    for (int t = 0; t <= iters; ++t) {
        LossEvaluation ev = evaluate_loss(pair, current, weights);
        result.trace.push_back(ev.loss);
        if (!std::isfinite(ev.loss.total) || !ev.gradient.all_finite()) {
            result.diagnostic = "non-finite loss at iteration " + std::to_string(t);
            break;
        }
        if (ev.loss.total < best) {
            best = ev.loss.total;
            result.field = current;
            result.best_iteration = t;
        }
        if (t == iters) break;

        auto g = ev.gradient.data();
        for (std::size_t p = 0; p < n; ++p) step[p] = Vec2{g[p].x * sx, g[p].y * sy};
        if (cfg.gradient_sigma > 0.0) smooth_in_place(step, w, h, cfg.gradient_sigma * stage_scale);

        if (cfg.optimizer == OptimizerKind::Adam) {
            b1t *= cfg.adam_beta1;
            b2t *= cfg.adam_beta2;
            for (std::size_t p = 0; p < n; ++p) {
                m1[p].x = cfg.adam_beta1 * m1[p].x + (1.0 - cfg.adam_beta1) * step[p].x;
                m1[p].y = cfg.adam_beta1 * m1[p].y + (1.0 - cfg.adam_beta1) * step[p].y;
                m2[p].x = cfg.adam_beta2 * m2[p].x + (1.0 - cfg.adam_beta2) * step[p].x * step[p].x;
                m2[p].y = cfg.adam_beta2 * m2[p].y + (1.0 - cfg.adam_beta2) * step[p].y * step[p].y;
                step[p].x = (m1[p].x / (1.0 - b1t)) / (std::sqrt(m2[p].x / (1.0 - b2t)) + cfg.adam_epsilon);
                step[p].y = (m1[p].y / (1.0 - b1t)) / (std::sqrt(m2[p].y / (1.0 - b2t)) + cfg.adam_epsilon);
            }
        }
        if (cfg.update_sigma > 0.0) smooth_in_place(step, w, h, cfg.update_sigma * stage_scale);
        if (cfg.compose_updates) {
            DisplacementField sf(w, h);
            auto sd = sf.data();
            for (std::size_t p = 0; p < n; ++p) sd[p] = Vec2{-cfg.lr * step[p].x * sx, -cfg.lr * step[p].y * sy};
            current = compose_fields(current, sf);
        } else {
            auto u = current.data();
            for (std::size_t p = 0; p < n; ++p) {
                u[p].x -= cfg.lr * step[p].x * sx;
                u[p].y -= cfg.lr * step[p].y * sy;
            }
        }
    }
    return result;
}

RegistrationResult register_multistage(const ImagePair &native, const RegistrationConfig &cfg) {
    cfg.validate();
    const auto need = required_semantics(cfg.mode);
    if (need.has_value() != native.has_masks()) {
        throw InvalidInput("ModeMaskMismatch", need ? "mode " + to_string(cfg.mode) + " requires masks"
                                                    : "unsupervised mode takes no masks");
    }
    if (need && native.moving_mask().semantics() != *need) {
        throw InvalidInput("ModeMaskMismatch", "mode " + to_string(cfg.mode) + " requires " + to_string(*need) +
                                                   " masks, got " + to_string(native.moving_mask().semantics()));
    }
    const int nw = native.width();
    const int nh = native.height();
    if (nw < cfg.stage2_size || nh < cfg.stage2_size) {
        throw InvalidInput("InvalidDimensions", "input must be at least the stage-2 size");
    }

    RegistrationResult out;
    const ImagePair p1 = resample_pair(native, cfg.stage1_size, cfg.stage1_size);
    StageResult s1 = register_stage(p1, DisplacementField(cfg.stage1_size, cfg.stage1_size),
                                    LossWeights{cfg.lambda_r_stage1, cfg.lambda_seg}, cfg, cfg.iters_stage1, 1.0);

    const ImagePair p2 = resample_pair(native, cfg.stage2_size, cfg.stage2_size);
    const DisplacementField init2 = upsample_field(s1.field, cfg.stage2_size, cfg.stage2_size);
    const double scale = static_cast<double>(cfg.stage2_size) / cfg.stage1_size;
    StageResult s2 = register_stage(p2, init2, LossWeights{cfg.lambda_r_stage2, cfg.lambda_seg}, cfg,
                                    cfg.iters_stage2, scale);

    out.field_stage1 = std::move(s1.field);
    out.field_stage2 = std::move(s2.field);
    out.loss_trace = std::move(s1.trace);
    out.stage1_trace_length = out.loss_trace.size();
    out.loss_trace.insert(out.loss_trace.end(), s2.trace.begin(), s2.trace.end());
    if (s1.diagnostic) out.diagnostic = "stage 1: " + *s1.diagnostic;
    if (s2.diagnostic) out.diagnostic = "stage 2: " + *s2.diagnostic;

    // Single precision so the field is exactly representable on disk.
    out.field_native = round_to_single(upsample_field(out.field_stage2, nw, nh));
    out.warped = warp_image(native.moving(), out.field_native);
    return out;
}

DisplacementField stage1_native_field(const RegistrationResult &result, int native_width, int native_height) {
    return round_to_single(upsample_field(result.field_stage1, native_width, native_height));
}

Image apply_registration(const Image &moving_native, const RegistrationResult &result) {
    return warp_image(moving_native, result.field_native);
}

}  // namespace cxreg
