// registration.hpp - two-stage coarse-to-fine displacement field optimisation.
//
// The displacement field at the stage resolution is the optimisation variable. Stage 1
// runs at 64x64 from the zero field, its result is bilinearly upsampled to 128x128 to
// start stage 2, and the refined field is upsampled to the input resolution.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cxreg/grid.hpp"
#include "cxreg/losses.hpp"

namespace cxreg {

enum class PenalizationMode { Unsupervised, Lung, RibCage, RibPairs };

std::string to_string(PenalizationMode m);
PenalizationMode penalization_mode_from_string(const std::string &s);

// Mask semantics a mode requires, or nullopt for Unsupervised.
std::optional<LabelSemantics> required_semantics(PenalizationMode m);

enum class OptimizerKind { GradientDescent, Adam };

std::string to_string(OptimizerKind k);
OptimizerKind optimizer_kind_from_string(const std::string &s);

struct RegistrationConfig {
    PenalizationMode mode = PenalizationMode::Unsupervised;
    int stage1_size = 64;
    int stage2_size = 128;
    double lr = 1e-3;
    double lambda_seg = 3.0;
    double lambda_r_stage1 = 6e-5;
    double lambda_r_stage2 = 3e-5;
    int iters_stage1 = 400;
    int iters_stage2 = 400;
    OptimizerKind optimizer = OptimizerKind::Adam;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    // Gaussian smoothing, in stage-1 pixels, of the gradient before the optimiser and of
    // the optimiser step after it. Later stages use the same physical width. Zero
    // disables either.
    double gradient_sigma = 1.0;
    double update_sigma = 5.0;
    // Apply each step by composition, u <- u o (id + s), instead of adding it.
    bool compose_updates = true;
    unsigned seed = 0;

    // Throws InvalidInput on a violated invariant.
    void validate() const;

    friend bool operator==(const RegistrationConfig &, const RegistrationConfig &) = default;
};

struct StageResult {
    DisplacementField field;            // best iterate
    std::vector<LossBreakdown> trace;   // one entry per evaluated iterate, iterate 0 first
    int best_iteration = 0;
    std::optional<std::string> diagnostic;  // set when optimisation stopped on a non-finite loss
};

struct RegistrationResult {
    DisplacementField field_native;
    DisplacementField field_stage1;
    DisplacementField field_stage2;
    std::vector<LossBreakdown> loss_trace;  // stage 1 followed by stage 2
    std::size_t stage1_trace_length = 0;
    Image warped;
    std::optional<std::string> diagnostic;
};

// Minimises the loss from `init` for `iters` updates; returns the lowest-loss iterate.
// `stage_scale` is the ratio of this stage's grid to the stage-1 grid and sets the
// physical width of the update preconditioner.
StageResult register_stage(const ImagePair &pair, const DisplacementField &init, const LossWeights &weights,
                           const RegistrationConfig &cfg, int iters, double stage_scale = 1.0);

// Full pipeline at the pair's native resolution. Masks must match cfg.mode: none for
// Unsupervised, LungPair for Lung, Binary for RibCage, RibPairs for RibPairs.
RegistrationResult register_multistage(const ImagePair &native, const RegistrationConfig &cfg);

// Stage-1-only variant of the pipeline, used to measure what refinement adds.
DisplacementField stage1_native_field(const RegistrationResult &result, int native_width, int native_height);

Image apply_registration(const Image &moving_native, const RegistrationResult &result);

}  // namespace cxreg
