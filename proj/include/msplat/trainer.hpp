// SPDX-License-Identifier: Apache-2.0
//
// Adam optimization of scene parameters against target views, synthetic
// benchmark generation and the four-arm ablation harness.
#pragma once

#include "msplat/autodiff.hpp"
#include "msplat/errors.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace msplat {

/// Ablation arms: baseline renders 1 sample with plain L1 + D-SSIM; the others
/// add 4x MSAA, the adaptive-weight + gradient-difference constraints, or both.
enum class Arm { baseline, msaa_only, constraints_only, full };

std::string_view to_string(Arm arm);
Arm parse_arm(std::string_view s);
inline constexpr Arm kAllArms[] = {Arm::baseline, Arm::msaa_only, Arm::constraints_only, Arm::full};

struct ArmFeatures {
    int samples = 1;
    bool constraints = false;
};
ArmFeatures features_of(Arm arm);

struct LearningRates {
    /// Multiplied by the scene extent.
    double center = 1.6e-4;
    double rotation = 1e-3;
    double log_scale = 5e-3;
    double color = 2.5e-3;
    double opacity = 5e-2;
};

struct AdamConfig {
    LearningRates lr;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-15;
    /// Scales the center learning rate.
    double scene_extent = 1.0;

    double rate_for(Field f) const;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long step = 0;
};

/// One bias-corrected Adam update with per-field learning rates, followed by
/// quaternion re-normalization. Throws NumericError naming the first
/// non-finite gradient entry.
void adam_step(ParamVector& params, std::span<const double> grads, AdamState& state, const AdamConfig& cfg);

struct TrainConfig {
    int iterations = 2000;
    AdamConfig adam;
    /// 0 derives the extent from the initial scene.
    double scene_extent = 0.0;
    LossWeights lambdas;
    double alpha_floor = 0.2;
    double epsilon = 1e-8;
    /// Linear lambda3 ramp from 0 over the first `ramp_fraction` of training.
    bool lambda3_ramp = false;
    double ramp_fraction = 0.5;
    /// Overrides the arm's sample pattern.
    std::optional<SampleSpec> samples;
    RenderConfig render;
    std::uint64_t seed = 7;
    Arm arm = Arm::full;
    int log_interval = 10;
    /// Checkpoints every N iterations (0: only the final one) when a directory is set.
    int checkpoint_interval = 0;
    std::filesystem::path checkpoint_dir;

    void validate() const;
    SampleSpec sample_spec() const;
    LossOptions loss_options(long iteration) const;
};

struct View {
    CameraModel camera;
    ImageBuffer target;
};

struct TrainRecord {
    long iteration = 0;
    LossBreakdown loss;
    double psnr = 0.0;
    double seconds = 0.0;
};

struct TrainLog {
    std::vector<TrainRecord> records;

    /// iteration,weighted_l1,dssim,grad,composite,psnr,seconds. Without timing
    /// the seconds column is written as 0 so logs are byte-comparable.
    std::string to_csv(bool include_timing = true) const;
};

struct TrainResult {
    Scene best_scene;
    Scene final_scene;
    double best_psnr = 0.0;
    long best_iteration = 0;
    TrainLog log;
};

class TrainingDiverged : public NumericError {
public:
    TrainingDiverged(const std::string& what, Scene last_good, long iteration)
        : NumericError(what), last_good_(std::move(last_good)), iteration_(iteration) {}
    const Scene& last_good() const noexcept { return last_good_; }
    long iteration() const noexcept { return iteration_; }

private:
    Scene last_good_;
    long iteration_;
};

/// Mean PSNR and loss of `scene` over all views.
TrainRecord evaluate_views(const Scene& scene, std::span<const View> views, const TrainConfig& cfg, long iteration);

TrainResult train(const Scene& initial, std::span<const View> views, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Synthetic data

enum class TargetKind { checkerboard, thin_lines, edge_halfplane, gaussian_blobs };

std::string_view to_string(TargetKind kind);
TargetKind parse_target_kind(std::string_view s);

struct TargetOptions {
    /// Checkerboard repeat length in pixels (two cells per period).
    int period = 8;
    int blob_count = 24;
    /// Supersampling factor per axis for analytic coverage.
    int coverage_samples = 16;
};

struct SyntheticTarget {
    ImageBuffer image;
    CameraModel camera;
    /// Generating scene, present for gaussian_blobs.
    std::optional<Scene> scene;
};

/// Standard synthetic camera: looking down +z, focal length equal to the width.
CameraModel synthetic_camera(int height, int width);
inline constexpr double kSyntheticDepth = 4.0;

SyntheticTarget make_synthetic_target(TargetKind kind, int height, int width, std::uint64_t seed,
                                      const TargetOptions& opts = {});

/// Uniform initialization inside the camera frustum around the synthetic depth:
/// isotropic scale = half the mean nearest-neighbour distance, mid-gray color,
/// opacity 0.1.
Scene initialize_scene(const CameraModel& cam, int count, std::uint64_t seed, const Vec3& background = Vec3::Zero());

/// Dense lattices of small Gaussians producing sub-pixel-sharp edges, used to
/// measure anti-aliasing. `kind` is edge_halfplane or checkerboard.
Scene make_sharp_scene(TargetKind kind, const CameraModel& cam);

struct Benchmark {
    std::string id;
    std::vector<View> views;
    Scene initial;
};

/// Registered ids: checker_edge (the default alias-prone benchmark),
/// checkerboard, edge_halfplane, thin_lines, gaussian_blobs.
std::vector<std::string> benchmark_ids();
Benchmark make_benchmark(std::string_view id, int height, int width, std::uint64_t seed, int gaussian_count);

// ---------------------------------------------------------------------------
// Ablation

struct AblationSpec {
    std::string benchmark = "checker_edge";
    int height = 64;
    int width = 64;
    int gaussian_count = 500;
    /// Shared settings; each arm overrides `arm` only.
    TrainConfig base;
};

struct AblationRow {
    Arm arm = Arm::baseline;
    double psnr = 0.0;
    double ssim = 0.0;
    LossBreakdown final_loss;
    long best_iteration = 0;
    std::uint64_t initial_hash = 0;
    double seconds = 0.0;
};

struct AblationTable {
    std::string benchmark;
    std::vector<AblationRow> rows;

    std::string to_csv() const;
    std::string to_text() const;
    const AblationRow& row(Arm arm) const;
};

/// FNV-1a over the packed parameters and background.
std::uint64_t scene_hash(const Scene& scene);

AblationTable run_ablation(const AblationSpec& spec);

}  // namespace msplat
