// SPDX-License-Identifier: Apache-2.0
//
// Reconstruction objective: error-adaptive weighted L1, D-SSIM and the
// gradient-difference term, combined with three scalar weights.
#pragma once

#include "msplat/image.hpp"

#include <atomic>
#include <cstdint>
#include <string>
#include <vector>

namespace msplat {

/// Scalar H x W grid, row-major.
struct Grid {
    int height = 0;
    int width = 0;
    std::vector<double> values;

    Grid() = default;
    Grid(int h, int w, double fill = 0.0) : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}
    double& at(int i, int j) { return values[static_cast<std::size_t>(i) * width + j]; }
    double at(int i, int j) const { return values[static_cast<std::size_t>(i) * width + j]; }
};

struct WeightMap {
    Grid weights;
    double alpha_floor = 0.2;
    double epsilon = 1e-8;
};

/// Forward differences per channel; entries are valid for i < H-1, j < W-1.
struct GradientField {
    int height = 0;  // of the source image
    int width = 0;
    std::vector<double> dx;  // (H-1) x (W-1) x 3
    std::vector<double> dy;

    double gx(int i, int j, int c) const { return dx[(static_cast<std::size_t>(i) * (width - 1) + j) * 3 + c]; }
    double gy(int i, int j, int c) const { return dy[(static_cast<std::size_t>(i) * (width - 1) + j) * 3 + c]; }
};

struct LossWeights {
    double lambda1 = 0.8;
    double lambda2 = 0.2;
    double lambda3 = 0.1;
};

struct LossBreakdown {
    double weighted_l1 = 0.0;
    double dssim = 0.0;
    double grad = 0.0;
    double composite = 0.0;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double lambda3 = 0.0;
};

/// Which terms of the objective are active.
struct LossOptions {
    LossWeights weights;
    double alpha_floor = 0.2;
    double epsilon = 1e-8;
    /// Error-adaptive weights; when off the L1 term is the plain mean L1.
    bool adaptive_weights = true;
    /// Gradient-difference term; when off it is neither evaluated nor added.
    bool gradient_difference = true;
};

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// e(i,j) = sum over channels of |pred - gt|.
Grid pixel_error(const ImageBuffer& pred, const ImageBuffer& gt);

WeightMap weight_map(const Grid& error, double alpha_floor, double epsilon);

/// (1 / HW) sum w(i,j) * ||pred(i,j) - gt(i,j)||_1.
double weighted_l1(const ImageBuffer& pred, const ImageBuffer& gt, const WeightMap& w);
double mean_l1(const ImageBuffer& pred, const ImageBuffer& gt);

/// Normalized 1-D Gaussian window of length kSsimWindow.
std::vector<double> ssim_window();

/// Mean SSIM over all fully-contained 11x11 windows and channels.
double ssim_index(const ImageBuffer& pred, const ImageBuffer& gt);
/// (1 - mean SSIM) / 2. Requires H, W >= 11.
double dssim(const ImageBuffer& pred, const ImageBuffer& gt);

GradientField gradient_field(const ImageBuffer& img);
double gdc_loss(const ImageBuffer& pred, const ImageBuffer& gt);

/// Full objective. When `frozen_weights` is given it replaces the weight map
/// computed from (pred, gt), which is how finite-difference checks hold the
/// map constant.
LossBreakdown composite_loss(const ImageBuffer& pred, const ImageBuffer& gt, const LossOptions& opts,
                             const WeightMap* frozen_weights = nullptr);

/// Convenience overload with the default weighting of both constraints on.
LossBreakdown composite_loss(const ImageBuffer& pred, const ImageBuffer& gt, double lambda1, double lambda2,
                             double lambda3, double alpha_floor, double epsilon);

std::string loss_csv_header();
std::string loss_csv_row(long iteration, const LossBreakdown& b);

/// Call counters, used to check which terms a training arm evaluates.
struct LossCounters {
    std::atomic<std::uint64_t> weight_map_calls{0};
    std::atomic<std::uint64_t> gdc_calls{0};
    void reset() {
        weight_map_calls = 0;
        gdc_calls = 0;
    }
};
LossCounters& loss_counters();

namespace detail {
void require_same_shape(const ImageBuffer& a, const ImageBuffer& b, const char* op);
}

}  // namespace msplat
