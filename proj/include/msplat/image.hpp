// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace msplat {

/// Row-major H x W x 3 color raster. Rendered images hold values in [0,1];
/// the same container also carries adjoints and wavelet coefficients.
class ImageBuffer {
public:
    ImageBuffer() = default;
    ImageBuffer(int height, int width, double fill = 0.0);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(height_) * width_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool same_shape(const ImageBuffer& o) const noexcept { return height_ == o.height_ && width_ == o.width_; }

    double& at(int i, int j, int c) { return data_[(static_cast<std::size_t>(i) * width_ + j) * 3 + c]; }
    double at(int i, int j, int c) const { return data_[(static_cast<std::size_t>(i) * width_ + j) * 3 + c]; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    bool operator==(const ImageBuffer&) const = default;

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<double> data_;
};

/// 8-bit quantization used by the PPM writer: round half up after clamping to [0,1].
std::uint8_t quantize(double v);

/// Binary P6 with maxval 255.
std::string encode_ppm(const ImageBuffer& img);
ImageBuffer decode_ppm(std::string_view bytes);
void write_ppm(const ImageBuffer& img, const std::filesystem::path& path);
ImageBuffer read_ppm(const std::filesystem::path& path);

}  // namespace msplat
