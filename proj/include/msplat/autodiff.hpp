// SPDX-License-Identifier: Apache-2.0
//
// Hand-written reverse pass from the composite loss back to every Gaussian
// parameter, and a central-difference checker for it.
#pragma once

#include "msplat/losses.hpp"
#include "msplat/raster.hpp"

#include <functional>
#include <string>
#include <vector>

namespace msplat {

struct GaussianGrad {
    Vec3 d_center = Vec3::Zero();
    Vec4 d_rotation = Vec4::Zero();  // (w, x, y, z), tangent to the unit sphere
    Vec3 d_log_scale = Vec3::Zero();
    Vec3 d_color_logit = Vec3::Zero();
    double d_opacity_logit = 0.0;
};

struct GradBuffer {
    std::vector<GaussianGrad> gaussians;
    ImageBuffer d_image;

    /// Flat gradient in ParamVector layout.
    std::vector<double> flatten() const;
};

/// dL/dpred of the composite objective with the weight map held constant.
/// `weights` must be the map used in the forward evaluation (ignored when
/// adaptive weighting is off).
ImageBuffer backward_loss(const ImageBuffer& pred, const ImageBuffer& gt, const LossOptions& opts,
                          const WeightMap* weights);

/// Pulls an image adjoint back through aggregation, compositing, footprint
/// weights, covariance projection and point projection. Throws TopologyError
/// if the tape does not belong to `scene`.
GradBuffer backward_render(const Tape& tape, const ImageBuffer& d_image, const Scene& scene,
                           const CameraModel& cam);

/// Everything one optimization step needs: render, loss, gradients.
struct Evaluation {
    ImageBuffer image;
    LossBreakdown loss;
    GradBuffer grads;
};

Evaluation evaluate_with_gradient(const Scene& scene, const CameraModel& cam, const ImageBuffer& target,
                                  const RenderConfig& cfg, const SampleSpec& samples, const LossOptions& opts);

struct GradCheckOptions {
    double tolerance = 1e-4;
    /// Floor on the relative-error denominator max(|a|, |b|, floor).
    double denominator_floor = 1e-8;
    /// Central-difference step is step_scale * max(1, |theta|).
    double step_scale = 1e-6;
    /// Applied to the analytic gradient before comparison (fault injection in tests).
    std::function<void(std::vector<double>&)> corrupt_analytic;
};

struct ParamClassResult {
    std::string name;
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;  // flat ParamVector index
    double analytic = 0.0;
    double numeric = 0.0;
    std::size_t checked = 0;
    bool pass = true;
};

struct GradCheckReport {
    std::vector<ParamClassResult> classes;
    /// Parameters whose perturbation changed the set of contributing splats;
    /// reported but excluded from pass/fail.
    std::vector<std::size_t> cutoff_adjacent;
    bool pass = true;

    std::string to_table() const;
};

GradCheckReport grad_check(const Scene& scene, const CameraModel& cam, const ImageBuffer& gt,
                           const RenderConfig& cfg, const SampleSpec& samples, const LossOptions& loss,
                           const GradCheckOptions& options = {});

/// The standard checker fixture: 5 Gaussians, 16x16 image, reproducible from `seed`.
struct GradCheckFixture {
    Scene scene;
    CameraModel camera;
    ImageBuffer target;
};
GradCheckFixture default_gradcheck_fixture(unsigned long long seed = 7);

}  // namespace msplat
