// SPDX-License-Identifier: Apache-2.0
#include "msplat/image.hpp"

#include "msplat/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace msplat {

ImageBuffer::ImageBuffer(int height, int width, double fill) : height_(height), width_(width) {
    if (height < 0 || width < 0) throw ShapeError("negative image dimensions");
    data_.assign(static_cast<std::size_t>(height) * width * 3, fill);
}

std::uint8_t quantize(double v) {
    const double c = std::clamp(std::isnan(v) ? 0.0 : v, 0.0, 1.0);
    return static_cast<std::uint8_t>(std::floor(c * 255.0 + 0.5));
}

std::string encode_ppm(const ImageBuffer& img) {
    std::string out = "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
    out.reserve(out.size() + img.size());
    for (double v : img.values()) out.push_back(static_cast<char>(quantize(v)));
    return out;
}

ImageBuffer decode_ppm(std::string_view bytes) {
    std::size_t pos = 0;
    auto skip_space_and_comments = [&] {
        while (pos < bytes.size()) {
            if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
                ++pos;
            } else if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else {
                break;
            }
        }
    };
    auto read_int = [&] {
        skip_space_and_comments();
        std::size_t start = pos;
        while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
        if (start == pos) throw ParseError("malformed PPM header", 0);
        return std::stoi(std::string(bytes.substr(start, pos - start)));
    };
    if (bytes.size() < 2 || bytes.substr(0, 2) != "P6") throw ParseError("not a binary PPM (P6)", 0);
    pos = 2;
    const int w = read_int();
    const int h = read_int();
    const int maxval = read_int();
    if (maxval != 255) throw ParseError("only maxval 255 is supported", 0);
    ++pos;  // single whitespace before raster
    const std::size_t need = static_cast<std::size_t>(w) * h * 3;
    if (bytes.size() < pos + need) throw ParseError("truncated PPM raster", 0);
    ImageBuffer img(h, w);
    auto vals = img.values();
    for (std::size_t k = 0; k < need; ++k) vals[k] = static_cast<unsigned char>(bytes[pos + k]) / 255.0;
    return img;
}

void write_ppm(const ImageBuffer& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << encode_ppm(img);
}

ImageBuffer read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return decode_ppm(ss.str());
}

}  // namespace msplat
