// SPDX-License-Identifier: Apache-2.0
#include "msplat/losses.hpp"

#include "msplat/errors.hpp"
#include "ssim_internal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace msplat {

namespace detail {
void require_same_shape(const ImageBuffer& a, const ImageBuffer& b, const char* op) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(op) + ": image shapes differ (" + std::to_string(a.height()) + "x" +
                         std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                         std::to_string(b.width()) + ")");
    }
}
}  // namespace detail

LossCounters& loss_counters() {
    static LossCounters counters;
    return counters;
}

Grid pixel_error(const ImageBuffer& pred, const ImageBuffer& gt) {
    detail::require_same_shape(pred, gt, "pixel_error");
    Grid e(pred.height(), pred.width());
    const auto p = pred.values();
    const auto g = gt.values();
    for (std::size_t k = 0; k < e.values.size(); ++k) {
        e.values[k] = std::abs(p[3 * k] - g[3 * k]) + std::abs(p[3 * k + 1] - g[3 * k + 1]) +
                      std::abs(p[3 * k + 2] - g[3 * k + 2]);
    }
    return e;
}

WeightMap weight_map(const Grid& error, double alpha_floor, double epsilon) {
    loss_counters().weight_map_calls.fetch_add(1, std::memory_order_relaxed);
    if (!(alpha_floor >= 0.0 && alpha_floor <= 1.0)) throw ValidationError("alpha_floor must lie in [0,1]");
    if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
    WeightMap w;
    w.alpha_floor = alpha_floor;
    w.epsilon = epsilon;
    w.weights = Grid(error.height, error.width);
    double max_e = 0.0;
    for (double e : error.values) max_e = std::max(max_e, e);
    const double denom = max_e + epsilon;
    for (std::size_t k = 0; k < error.values.size(); ++k) {
        w.weights.values[k] = alpha_floor + (1.0 - alpha_floor) * (error.values[k] / denom);
    }
    return w;
}

double weighted_l1(const ImageBuffer& pred, const ImageBuffer& gt, const WeightMap& w) {
    const Grid e = pixel_error(pred, gt);
    if (w.weights.height != e.height || w.weights.width != e.width) throw ShapeError("weighted_l1: weight map shape");
    double sum = 0.0;
    for (std::size_t k = 0; k < e.values.size(); ++k) sum += w.weights.values[k] * e.values[k];
    return sum / static_cast<double>(e.values.size());
}

double mean_l1(const ImageBuffer& pred, const ImageBuffer& gt) {
    const Grid e = pixel_error(pred, gt);
    double sum = 0.0;
    for (double v : e.values) sum += v;
    return sum / static_cast<double>(e.values.size());
}

GradientField gradient_field(const ImageBuffer& img) {
    if (img.height() < 2 || img.width() < 2) throw ShapeError("gradient_field needs an image of at least 2x2");
    GradientField f;
    f.height = img.height();
    f.width = img.width();
    const std::size_t n = static_cast<std::size_t>(img.height() - 1) * (img.width() - 1) * 3;
    f.dx.resize(n);
    f.dy.resize(n);
    std::size_t k = 0;
    for (int i = 0; i + 1 < img.height(); ++i) {
        for (int j = 0; j + 1 < img.width(); ++j) {
            for (int c = 0; c < 3; ++c, ++k) {
                f.dx[k] = img.at(i, j + 1, c) - img.at(i, j, c);
                f.dy[k] = img.at(i + 1, j, c) - img.at(i, j, c);
            }
        }
    }
    return f;
}

double gdc_loss(const ImageBuffer& pred, const ImageBuffer& gt) {
    loss_counters().gdc_calls.fetch_add(1, std::memory_order_relaxed);
    detail::require_same_shape(pred, gt, "gdc_loss");
    const GradientField fp = gradient_field(pred);
    const GradientField fg = gradient_field(gt);
    double sum = 0.0;
    for (std::size_t k = 0; k < fp.dx.size(); ++k) {
        sum += std::abs(fp.dx[k] - fg.dx[k]) + std::abs(fp.dy[k] - fg.dy[k]);
    }
    return sum / (static_cast<double>(pred.height() - 1) * (pred.width() - 1));
}

LossBreakdown composite_loss(const ImageBuffer& pred, const ImageBuffer& gt, const LossOptions& opts,
                             const WeightMap* frozen_weights) {
    detail::require_same_shape(pred, gt, "composite_loss");
    LossBreakdown b;
    b.lambda1 = opts.weights.lambda1;
    b.lambda2 = opts.weights.lambda2;
    b.lambda3 = opts.weights.lambda3;
    if (opts.adaptive_weights) {
        if (frozen_weights) {
            b.weighted_l1 = weighted_l1(pred, gt, *frozen_weights);
        } else {
            b.weighted_l1 = weighted_l1(pred, gt, weight_map(pixel_error(pred, gt), opts.alpha_floor, opts.epsilon));
        }
    } else {
        b.weighted_l1 = mean_l1(pred, gt);
    }
    b.dssim = dssim(pred, gt);
    b.grad = opts.gradient_difference ? gdc_loss(pred, gt) : 0.0;
    b.composite = b.lambda1 * b.weighted_l1 + b.lambda2 * b.dssim + b.lambda3 * b.grad;
    return b;
}

LossBreakdown composite_loss(const ImageBuffer& pred, const ImageBuffer& gt, double lambda1, double lambda2,
                             double lambda3, double alpha_floor, double epsilon) {
    LossOptions opts;
    opts.weights = {lambda1, lambda2, lambda3};
    opts.alpha_floor = alpha_floor;
    opts.epsilon = epsilon;
    return composite_loss(pred, gt, opts);
}

std::string loss_csv_header() { return "iteration,weighted_l1,dssim,grad,composite"; }

std::string loss_csv_row(long iteration, const LossBreakdown& b) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%ld,%.10g,%.10g,%.10g,%.10g", iteration, b.weighted_l1, b.dssim, b.grad,
                  b.composite);
    return buf;
}

}  // namespace msplat
