// SPDX-License-Identifier: Apache-2.0
#include "msplat/diagnostics.hpp"
#include "msplat/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace msplat {

double psnr(const ImageBuffer& a, const ImageBuffer& b) {
    detail::require_same_shape(a, b, "psnr");
    if (a.size() == 0) throw ShapeError("psnr: empty image");
    double sum = 0.0;
    const auto av = a.values();
    const auto bv = b.values();
    for (std::size_t k = 0; k < av.size(); ++k) {
        const double d = av[k] - bv[k];
        sum += d * d;
    }
    const double mse = sum / static_cast<double>(av.size());
    if (mse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

Grid diff_map(const ImageBuffer& pred, const ImageBuffer& gt) {
    detail::require_same_shape(pred, gt, "diff_map");
    Grid out(pred.height(), pred.width());
    for (int i = 0; i < pred.height(); ++i) {
        for (int j = 0; j < pred.width(); ++j) {
            double e = 0.0;
            for (int c = 0; c < 3; ++c) e += std::abs(pred.at(i, j, c) - gt.at(i, j, c));
            out.at(i, j) = std::clamp(1.0 - e / 3.0, 0.0, 1.0);
        }
    }
    return out;
}

ImageBuffer grid_to_image(const Grid& g) {
    ImageBuffer img(g.height, g.width);
    for (int i = 0; i < g.height; ++i)
        for (int j = 0; j < g.width; ++j)
            for (int c = 0; c < 3; ++c) img.at(i, j, c) = g.at(i, j);
    return img;
}

WaveletDecomposition haar_dwt(const ImageBuffer& img) {
    if (img.height() < 1 || img.width() < 1) throw ShapeError("haar_dwt: empty image");
    WaveletDecomposition dec;
    dec.height = img.height();
    dec.width = img.width();
    dec.padded = (img.height() % 2) != 0 || (img.width() % 2) != 0;
    const int h2 = (img.height() + 1) / 2;
    const int w2 = (img.width() + 1) / 2;
    dec.ll = dec.lh = dec.hl = dec.hh = ImageBuffer(h2, w2);
    auto px = [&](int i, int j, int c) {
        return img.at(std::min(i, img.height() - 1), std::min(j, img.width() - 1), c);
    };
    for (int i = 0; i < h2; ++i) {
        for (int j = 0; j < w2; ++j) {
            for (int c = 0; c < 3; ++c) {
                const double a = px(2 * i, 2 * j, c), b = px(2 * i, 2 * j + 1, c);
                const double cc = px(2 * i + 1, 2 * j, c), d = px(2 * i + 1, 2 * j + 1, c);
                dec.ll.at(i, j, c) = 0.5 * (a + b + cc + d);
                dec.lh.at(i, j, c) = 0.5 * (a - b + cc - d);
                dec.hl.at(i, j, c) = 0.5 * (a + b - cc - d);
                dec.hh.at(i, j, c) = 0.5 * (a - b - cc + d);
            }
        }
    }
    return dec;
}

ImageBuffer haar_idwt(const WaveletDecomposition& dec) {
    const int h2 = dec.ll.height(), w2 = dec.ll.width();
    if (!dec.lh.same_shape(dec.ll) || !dec.hl.same_shape(dec.ll) || !dec.hh.same_shape(dec.ll))
        throw ShapeError("haar_idwt: subband shapes differ");
    const int h = dec.height > 0 ? dec.height : 2 * h2;
    const int w = dec.width > 0 ? dec.width : 2 * w2;
    if (h > 2 * h2 || w > 2 * w2 || h < 2 * h2 - 1 || w < 2 * w2 - 1)
        throw ShapeError("haar_idwt: recorded extent does not match subbands");
    ImageBuffer out(h, w);
    for (int i = 0; i < h2; ++i) {
        for (int j = 0; j < w2; ++j) {
            for (int c = 0; c < 3; ++c) {
                const double ll = dec.ll.at(i, j, c), lh = dec.lh.at(i, j, c);
                const double hl = dec.hl.at(i, j, c), hh = dec.hh.at(i, j, c);
                const double v[2][2] = {{0.5 * (ll + lh + hl + hh), 0.5 * (ll - lh + hl - hh)},
                                        {0.5 * (ll + lh - hl - hh), 0.5 * (ll - lh - hl + hh)}};
                for (int di = 0; di < 2; ++di) {
                    for (int dj = 0; dj < 2; ++dj) {
                        const int y = 2 * i + di, x = 2 * j + dj;
                        if (y < h && x < w) out.at(y, x, c) = v[di][dj];
                    }
                }
            }
        }
    }
    return out;
}

namespace {

ImageBuffer normalized(const ImageBuffer& band) {
    const auto v = band.values();
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    ImageBuffer out(band.height(), band.width());
    const double range = *hi - *lo;
    auto ov = out.values();
    for (std::size_t k = 0; k < v.size(); ++k) ov[k] = range > 0.0 ? (v[k] - *lo) / range : 0.0;
    return out;
}

}  // namespace

void write_wavelet_outputs(const WaveletDecomposition& dec, const std::filesystem::path& dir,
                           const std::string& prefix) {
    std::filesystem::create_directories(dir);
    const std::pair<const char*, const ImageBuffer*> bands[] = {
        {"LL", &dec.ll}, {"LH", &dec.lh}, {"HL", &dec.hl}, {"HH", &dec.hh}};
    for (const auto& [name, band] : bands) write_ppm(normalized(*band), dir / (prefix + name + ".ppm"));

    std::ofstream csv(dir / (prefix + "wavelet_coefficients.csv"), std::ios::binary);
    if (!csv) throw Error("cannot write " + (dir / (prefix + "wavelet_coefficients.csv")).string());
    csv << "band,row,col,channel,value\n";
    char buf[64];
    for (const auto& [name, band] : bands) {
        for (int i = 0; i < band->height(); ++i)
            for (int j = 0; j < band->width(); ++j)
                for (int c = 0; c < 3; ++c) {
                    std::snprintf(buf, sizeof(buf), "%.17g", band->at(i, j, c));
                    csv << name << ',' << i << ',' << j << ',' << c << ',' << buf << '\n';
                }
    }
    if (!csv) throw Error("write failed for wavelet coefficients");
}

}  // namespace msplat
