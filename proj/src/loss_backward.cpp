// SPDX-License-Identifier: Apache-2.0
#include "msplat/autodiff.hpp"
#include "msplat/errors.hpp"
#include "ssim_internal.hpp"

#include <cmath>

namespace msplat {
namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

ImageBuffer backward_loss(const ImageBuffer& pred, const ImageBuffer& gt, const LossOptions& opts,
                          const WeightMap* weights) {
    detail::require_same_shape(pred, gt, "backward_loss");
    const int h = pred.height(), w = pred.width();
    ImageBuffer d(h, w);

    const double l1_scale = opts.weights.lambda1 / static_cast<double>(pred.pixel_count());
    if (opts.adaptive_weights && !weights) throw ValidationError("backward_loss: adaptive weighting needs the weight map");
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            const double wij = opts.adaptive_weights ? weights->weights.at(i, j) : 1.0;
            for (int c = 0; c < 3; ++c) d.at(i, j, c) = l1_scale * wij * sign(pred.at(i, j, c) - gt.at(i, j, c));
        }
    }

    if (opts.weights.lambda2 != 0.0) {
        const auto s = detail::ssim_sum(pred, gt);
        detail::ssim_sum_backward(pred, gt, -0.5 * opts.weights.lambda2 / s.count, d);
    }

    if (opts.gradient_difference && opts.weights.lambda3 != 0.0) {
        const double scale = opts.weights.lambda3 / (static_cast<double>(h - 1) * (w - 1));
        for (int i = 0; i + 1 < h; ++i) {
            for (int j = 0; j + 1 < w; ++j) {
                for (int c = 0; c < 3; ++c) {
                    const double ddx = (pred.at(i, j + 1, c) - pred.at(i, j, c)) - (gt.at(i, j + 1, c) - gt.at(i, j, c));
                    const double ddy = (pred.at(i + 1, j, c) - pred.at(i, j, c)) - (gt.at(i + 1, j, c) - gt.at(i, j, c));
                    const double sx = scale * sign(ddx);
                    const double sy = scale * sign(ddy);
                    d.at(i, j + 1, c) += sx;
                    d.at(i + 1, j, c) += sy;
                    d.at(i, j, c) -= sx + sy;
                }
            }
        }
    }
    return d;
}

}  // namespace msplat
