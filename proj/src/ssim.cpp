// SPDX-License-Identifier: Apache-2.0
//
// SSIM with a separable 11x11 Gaussian window evaluated over fully contained
// windows only ("valid" placement), plus its adjoint.
#include "msplat/errors.hpp"
#include "msplat/losses.hpp"
#include "ssim_internal.hpp"

#include <cmath>

namespace msplat {

std::vector<double> ssim_window() {
    std::vector<double> g(kSsimWindow);
    double sum = 0.0;
    for (int t = 0; t < kSsimWindow; ++t) {
        const double d = t - kSsimWindow / 2;
        g[t] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
        sum += g[t];
    }
    for (double& v : g) v /= sum;
    return g;
}

namespace detail {
namespace {

/// Single-channel plane extracted from an image.
std::vector<double> channel(const ImageBuffer& img, int c) {
    std::vector<double> out(img.pixel_count());
    const auto v = img.values();
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = v[k * 3 + c];
    return out;
}

/// Valid-mode separable filtering: (H, W) -> (H - 10, W - 10).
std::vector<double> filter_valid(const std::vector<double>& src, int h, int w, const std::vector<double>& g) {
    const int k = kSsimWindow;
    const int ow = w - k + 1, oh = h - k + 1;
    std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
    for (int i = 0; i < h; ++i) {
        const double* row = src.data() + static_cast<std::size_t>(i) * w;
        for (int j = 0; j < ow; ++j) {
            double s = 0.0;
            for (int t = 0; t < k; ++t) s += g[t] * row[j + t];
            tmp[static_cast<std::size_t>(i) * ow + j] = s;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(oh) * ow, 0.0);
    for (int i = 0; i < oh; ++i) {
        double* dst = out.data() + static_cast<std::size_t>(i) * ow;
        for (int t = 0; t < k; ++t) {
            const double* row = tmp.data() + static_cast<std::size_t>(i + t) * ow;
            for (int j = 0; j < ow; ++j) dst[j] += g[t] * row[j];
        }
    }
    return out;
}

/// Adjoint of filter_valid: (H - 10, W - 10) -> (H, W).
std::vector<double> filter_valid_adjoint(const std::vector<double>& adj, int h, int w, const std::vector<double>& g) {
    const int k = kSsimWindow;
    const int ow = w - k + 1, oh = h - k + 1;
    std::vector<double> tmp(static_cast<std::size_t>(h) * ow, 0.0);
    for (int i = 0; i < oh; ++i) {
        const double* src = adj.data() + static_cast<std::size_t>(i) * ow;
        for (int t = 0; t < k; ++t) {
            double* row = tmp.data() + static_cast<std::size_t>(i + t) * ow;
            for (int j = 0; j < ow; ++j) row[j] += g[t] * src[j];
        }
    }
    std::vector<double> out(static_cast<std::size_t>(h) * w, 0.0);
    for (int i = 0; i < h; ++i) {
        const double* src = tmp.data() + static_cast<std::size_t>(i) * ow;
        double* row = out.data() + static_cast<std::size_t>(i) * w;
        for (int j = 0; j < ow; ++j) {
            for (int t = 0; t < k; ++t) row[j + t] += g[t] * src[j];
        }
    }
    return out;
}

struct ChannelStats {
    std::vector<double> mx, my, exx, eyy, exy;
};

ChannelStats channel_stats(const std::vector<double>& x, const std::vector<double>& y, int h, int w,
                           const std::vector<double>& g) {
    std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        xx[k] = x[k] * x[k];
        yy[k] = y[k] * y[k];
        xy[k] = x[k] * y[k];
    }
    return {filter_valid(x, h, w, g), filter_valid(y, h, w, g), filter_valid(xx, h, w, g), filter_valid(yy, h, w, g),
            filter_valid(xy, h, w, g)};
}

void require_window(const ImageBuffer& img) {
    if (img.height() < kSsimWindow || img.width() < kSsimWindow) {
        throw ShapeError("SSIM needs images of at least 11x11, got " + std::to_string(img.height()) + "x" +
                         std::to_string(img.width()));
    }
}

}  // namespace

SsimSum ssim_sum(const ImageBuffer& pred, const ImageBuffer& gt) {
    require_same_shape(pred, gt, "ssim");
    require_window(pred);
    const int h = pred.height(), w = pred.width();
    const auto g = ssim_window();
    SsimSum out;
    for (int c = 0; c < 3; ++c) {
        const ChannelStats st = channel_stats(channel(pred, c), channel(gt, c), h, w, g);
        for (std::size_t k = 0; k < st.mx.size(); ++k) {
            const double mx = st.mx[k], my = st.my[k];
            const double sxx = st.exx[k] - mx * mx;
            const double syy = st.eyy[k] - my * my;
            const double sxy = st.exy[k] - mx * my;
            out.total += ((2 * mx * my + kSsimC1) * (2 * sxy + kSsimC2)) /
                         ((mx * mx + my * my + kSsimC1) * (sxx + syy + kSsimC2));
        }
        out.count += static_cast<double>(st.mx.size());
    }
    return out;
}

void ssim_sum_backward(const ImageBuffer& pred, const ImageBuffer& gt, double scale, ImageBuffer& d_pred) {
    require_same_shape(pred, gt, "ssim");
    require_window(pred);
    // SSIM peaks at pred == gt; return the exact zero instead of roundoff.
    if (pred == gt) return;
    const int h = pred.height(), w = pred.width();
    const auto g = ssim_window();
    auto dv = d_pred.values();
    for (int c = 0; c < 3; ++c) {
        const std::vector<double> x = channel(pred, c);
        const std::vector<double> y = channel(gt, c);
        const ChannelStats st = channel_stats(x, y, h, w, g);
        const std::size_t n = st.mx.size();
        std::vector<double> d_mx(n), d_exx(n), d_exy(n);
        for (std::size_t k = 0; k < n; ++k) {
            const double mx = st.mx[k], my = st.my[k];
            const double sxx = st.exx[k] - mx * mx;
            const double syy = st.eyy[k] - my * my;
            const double sxy = st.exy[k] - mx * my;
            const double a1 = 2 * mx * my + kSsimC1;
            const double a2 = 2 * sxy + kSsimC2;
            const double b1 = mx * mx + my * my + kSsimC1;
            const double b2 = sxx + syy + kSsimC2;
            const double s = (a1 * a2) / (b1 * b2);
            // Partials with the raw moments E[x^2], E[xy] held fixed.
            d_mx[k] = scale * s * (2 * my / a1 - 2 * my / a2 - 2 * mx / b1 + 2 * mx / b2);
            d_exx[k] = scale * s * (-1.0 / b2);
            d_exy[k] = scale * s * (2.0 / a2);
        }
        const auto a_mx = filter_valid_adjoint(d_mx, h, w, g);
        const auto a_exx = filter_valid_adjoint(d_exx, h, w, g);
        const auto a_exy = filter_valid_adjoint(d_exy, h, w, g);
        for (std::size_t p = 0; p < x.size(); ++p) {
            dv[p * 3 + c] += a_mx[p] + 2.0 * x[p] * a_exx[p] + y[p] * a_exy[p];
        }
    }
}

}  // namespace detail

double ssim_index(const ImageBuffer& pred, const ImageBuffer& gt) {
    const auto s = detail::ssim_sum(pred, gt);
    return s.total / s.count;
}

double dssim(const ImageBuffer& pred, const ImageBuffer& gt) { return 0.5 * (1.0 - ssim_index(pred, gt)); }

}  // namespace msplat
