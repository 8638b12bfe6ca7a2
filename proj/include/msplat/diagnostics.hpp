// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "msplat/image.hpp"
#include "msplat/losses.hpp"

#include <filesystem>

namespace msplat {

inline constexpr double kPsnrCap = 99.0;

/// 10 log10(1 / MSE) over all channels; identical images give kPsnrCap.
double psnr(const ImageBuffer& a, const ImageBuffer& b);

/// 1 - mean channel |pred - gt|, clamped to [0,1]; 1 means perfect agreement.
Grid diff_map(const ImageBuffer& pred, const ImageBuffer& gt);
/// Gray replicated into three channels, for PPM export.
ImageBuffer grid_to_image(const Grid& g);

/// Single-level orthonormal Haar decomposition. For the 2x2 block
///   a b
///   c d
/// LL = (a+b+c+d)/2, LH = (a-b+c-d)/2 (horizontal variation),
/// HL = (a+b-c-d)/2 (vertical variation), HH = (a-b-c+d)/2.
struct WaveletDecomposition {
    int height = 0;  // original extent
    int width = 0;
    bool padded = false;  // odd input was edge-replicated to even size
    ImageBuffer ll, lh, hl, hh;
};

WaveletDecomposition haar_dwt(const ImageBuffer& img);
ImageBuffer haar_idwt(const WaveletDecomposition& dec);

/// Writes LL/LH/HL/HH as min-max normalized PPMs plus wavelet_coefficients.csv.
void write_wavelet_outputs(const WaveletDecomposition& dec, const std::filesystem::path& dir,
                           const std::string& prefix = "");

}  // namespace msplat
