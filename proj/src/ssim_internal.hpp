// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "msplat/image.hpp"

namespace msplat::detail {

/// Sum of the SSIM map over all valid windows and channels, and the number of
/// terms in that sum.
struct SsimSum {
    double total = 0.0;
    double count = 0.0;
};

SsimSum ssim_sum(const ImageBuffer& pred, const ImageBuffer& gt);

/// Adds d(sum of SSIM map)/d(pred) * scale into `d_pred`.
void ssim_sum_backward(const ImageBuffer& pred, const ImageBuffer& gt, double scale, ImageBuffer& d_pred);

}  // namespace msplat::detail
