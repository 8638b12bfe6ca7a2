// SPDX-License-Identifier: Apache-2.0
#include "msplat/errors.hpp"
#include "msplat/losses.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace msplat;

namespace {

ImageBuffer constant_image(int h, int w, const Vec3& c) {
    ImageBuffer img(h, w);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            for (int k = 0; k < 3; ++k) img.at(i, j, k) = c[k];
    return img;
}

double oracle_gdc(const ImageBuffer& p, const ImageBuffer& g) {
    const int h = p.height(), w = p.width();
    double sum = 0.0;
    for (int i = 0; i + 1 < h; ++i)
        for (int j = 0; j + 1 < w; ++j)
            for (int c = 0; c < 3; ++c) {
                const double dxp = p.at(i, j + 1, c) - p.at(i, j, c), dxg = g.at(i, j + 1, c) - g.at(i, j, c);
                const double dyp = p.at(i + 1, j, c) - p.at(i, j, c), dyg = g.at(i + 1, j, c) - g.at(i, j, c);
                sum += std::abs(dxp - dxg) + std::abs(dyp - dyg);
            }
    return sum / ((h - 1.0) * (w - 1.0));
}

}  // namespace

TEST(PixelError, Examples) {
    std::mt19937_64 rng(1);
    const ImageBuffer a = oracle::random_image(8, 6, rng);
    for (double v : pixel_error(a, a).values) EXPECT_EQ(v, 0.0);

    ImageBuffer b = a;
    b.at(2, 3, 0) += 0.5;
    const Grid e = pixel_error(b, a);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 6; ++j) EXPECT_NEAR(e.at(i, j), (i == 2 && j == 3) ? 0.5 : 0.0, 1e-15);

    const ImageBuffer c = oracle::random_image(8, 6, rng);
    const Grid e2 = pixel_error(a, c);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 6; ++j) {
            double s = 0;
            for (int k = 0; k < 3; ++k) s += std::abs(a.at(i, j, k) - c.at(i, j, k));
            EXPECT_DOUBLE_EQ(e2.at(i, j), s);
        }
    EXPECT_THROW(pixel_error(a, ImageBuffer(6, 8)), ShapeError);
}

TEST(WeightMap, ZeroErrorGivesFloor) {
    const WeightMap w = weight_map(Grid(5, 7, 0.0), 0.2, 1e-8);
    for (double v : w.weights.values) EXPECT_EQ(v, 0.2);
}

TEST(WeightMap, ClosedForm) {
    Grid e(1, 2);
    e.at(0, 1) = 1.0;
    const WeightMap w = weight_map(e, 0.5, 1e-8);
    EXPECT_EQ(w.weights.at(0, 0), 0.5);
    EXPECT_NEAR(w.weights.at(0, 1), 0.5 + 0.5 / (1.0 + 1e-8), 1e-16);
    EXPECT_LT(w.weights.at(0, 1), 1.0);
}

TEST(WeightMap, RangeAndMonotonicityOnRandomGrids) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> uni(0, 3);
    for (int t = 0; t < 50; ++t) {
        Grid e(9, 11);
        for (double& v : e.values) v = uni(rng);
        e.values[t % e.values.size()] = 0.0;
        const double alpha = 0.05 * (t % 20);
        const WeightMap w = weight_map(e, alpha, 1e-8);
        for (std::size_t a = 0; a < e.values.size(); ++a) {
            ASSERT_GE(w.weights.values[a], alpha);
            ASSERT_LT(w.weights.values[a], 1.0);
            ASSERT_EQ(w.weights.values[a] == alpha, e.values[a] == 0.0 || alpha == 1.0);
            for (std::size_t b = 0; b < e.values.size(); ++b)
                if (e.values[a] > e.values[b] && alpha < 1.0) ASSERT_GT(w.weights.values[a], w.weights.values[b]);
        }
    }
}

TEST(WeightMap, InvariantToUniformErrorScaling) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> uni(0.1, 1);
    Grid e(6, 6);
    for (double& v : e.values) v = uni(rng);
    Grid scaled = e;
    for (double& v : scaled.values) v *= 7.5;
    const WeightMap a = weight_map(e, 0.2, 1e-8), b = weight_map(scaled, 0.2, 1e-8);
    for (std::size_t k = 0; k < e.values.size(); ++k) EXPECT_NEAR(a.weights.values[k], b.weights.values[k], 1e-7);
}

TEST(WeightMap, RejectsBadParameters) {
    EXPECT_THROW(weight_map(Grid(2, 2), 1.5, 1e-8), ValidationError);
    EXPECT_THROW(weight_map(Grid(2, 2), 0.2, 0.0), ValidationError);
}

TEST(WeightedL1, HandExample) {
    ImageBuffer pred(2, 1), gt(2, 1);
    pred.at(0, 0, 0) = 0.2;
    pred.at(1, 0, 0) = 0.4;
    const WeightMap w = weight_map(pixel_error(pred, gt), 0.5, 1e-15);
    EXPECT_NEAR(w.weights.at(0, 0), 0.75, 1e-12);
    EXPECT_NEAR(w.weights.at(1, 0), 1.0, 1e-12);
    EXPECT_NEAR(weighted_l1(pred, gt, w), 0.275, 1e-12);
}

TEST(WeightedL1, UnitWeightsEqualMeanL1) {
    std::mt19937_64 rng(4);
    const ImageBuffer a = oracle::random_image(13, 17, rng), b = oracle::random_image(13, 17, rng);
    WeightMap w;
    w.weights = Grid(13, 17, 1.0);
    EXPECT_EQ(weighted_l1(a, b, w), mean_l1(a, b));
    double s = 0;
    for (std::size_t k = 0; k < a.size(); ++k) s += std::abs(a.values()[k] - b.values()[k]);
    EXPECT_NEAR(mean_l1(a, b), s / (13.0 * 17.0), 1e-14);
    w.weights = Grid(13, 17, 0.3);
    EXPECT_EQ(weighted_l1(a, a, w), 0.0);
}

TEST(Ssim, MatchesDirectConvolutionOracle) {
    std::mt19937_64 rng(5);
    for (auto [h, w] : {std::pair{11, 11}, std::pair{16, 23}, std::pair{32, 32}}) {
        const ImageBuffer a = oracle::random_image(h, w, rng);
        ImageBuffer b = a;
        std::normal_distribution<double> noise(0, 0.1);
        for (double& v : b.values()) v = std::clamp(v + noise(rng), 0.0, 1.0);
        EXPECT_NEAR(ssim_index(a, b), oracle::ssim(a, b), 1e-10) << h << "x" << w;
        EXPECT_NEAR(dssim(a, b), (1.0 - oracle::ssim(a, b)) / 2.0, 1e-10);
    }
}

TEST(Ssim, IdenticalAndInvertedImages) {
    std::mt19937_64 rng(6);
    const ImageBuffer a = oracle::random_image(20, 20, rng, 0.25, 0.75);
    EXPECT_NEAR(dssim(a, a), 0.0, 1e-12);
    EXPECT_NEAR(ssim_index(a, a), 1.0, 1e-12);
    ImageBuffer inv = a;
    for (double& v : inv.values()) v = 1.0 - v;
    const double d = dssim(inv, a);
    EXPECT_GT(d, 0.0);
    EXPECT_LE(d, 1.0);
}

TEST(Ssim, TooSmallImageIsShapeError) {
    EXPECT_THROW(dssim(ImageBuffer(10, 20), ImageBuffer(10, 20)), ShapeError);
}

TEST(Ssim, WindowIsNormalizedGaussian) {
    const auto w = ssim_window();
    ASSERT_EQ(w.size(), 11u);
    double s = 0;
    for (double v : w) s += v;
    EXPECT_NEAR(s, 1.0, 1e-15);
    EXPECT_NEAR(w[5] / w[6], std::exp(1.0 / (2 * 1.5 * 1.5)), 1e-12);
}

TEST(GradientField, ConstantAndRamp) {
    const GradientField z = gradient_field(constant_image(5, 4, {0.3, 0.3, 0.3}));
    for (double v : z.dx) EXPECT_EQ(v, 0.0);
    for (double v : z.dy) EXPECT_EQ(v, 0.0);

    const int h = 6, w = 8;
    ImageBuffer ramp(h, w);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            for (int c = 0; c < 3; ++c) ramp.at(i, j, c) = static_cast<double>(j) / w;
    const GradientField g = gradient_field(ramp);
    EXPECT_EQ(g.dx.size(), static_cast<std::size_t>((h - 1) * (w - 1) * 3));
    for (int i = 0; i < h - 1; ++i)
        for (int j = 0; j < w - 1; ++j)
            for (int c = 0; c < 3; ++c) {
                EXPECT_NEAR(g.gx(i, j, c), 1.0 / w, 1e-15);
                EXPECT_EQ(g.gy(i, j, c), 0.0);
            }
}

TEST(GradientField, MatchesIndexOracle) {
    std::mt19937_64 rng(7);
    const ImageBuffer a = oracle::random_image(7, 9, rng);
    const GradientField g = gradient_field(a);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 8; ++j)
            for (int c = 0; c < 3; ++c) {
                EXPECT_EQ(g.gx(i, j, c), a.at(i, j + 1, c) - a.at(i, j, c));
                EXPECT_EQ(g.gy(i, j, c), a.at(i + 1, j, c) - a.at(i, j, c));
            }
    EXPECT_THROW(gradient_field(ImageBuffer(1, 5)), ShapeError);
}

TEST(GdcLoss, Examples) {
    std::mt19937_64 rng(8);
    const ImageBuffer a = oracle::random_image(12, 10, rng);
    EXPECT_EQ(gdc_loss(a, a), 0.0);

    ImageBuffer shifted = a;
    for (int i = 0; i < 12; ++i)
        for (int j = 0; j < 10; ++j)
            for (int c = 0; c < 3; ++c) shifted.at(i, j, c) += 0.1 * (c + 1);
    EXPECT_NEAR(gdc_loss(shifted, a), 0.0, 1e-12);

    // Single-channel hand example; other channels identical.
    ImageBuffer p(2, 2), g(2, 2);
    p.at(0, 1, 0) = 1.0;
    p.at(1, 1, 0) = 1.0;
    EXPECT_DOUBLE_EQ(gdc_loss(p, g), 1.0);

    const ImageBuffer b = oracle::random_image(12, 10, rng);
    EXPECT_NEAR(gdc_loss(a, b), oracle_gdc(a, b), 1e-12);
    EXPECT_EQ(gdc_loss(a, b), gdc_loss(b, a));
}

TEST(CompositeLoss, IdenticalImagesAreZero) {
    std::mt19937_64 rng(9);
    const ImageBuffer a = oracle::random_image(16, 16, rng);
    const LossBreakdown b = composite_loss(a, a, LossOptions{});
    EXPECT_NEAR(b.weighted_l1, 0.0, 1e-12);
    EXPECT_NEAR(b.dssim, 0.0, 1e-12);
    EXPECT_NEAR(b.grad, 0.0, 1e-12);
    EXPECT_NEAR(b.composite, 0.0, 1e-12);
}

TEST(CompositeLoss, TermSumOracle) {
    std::mt19937_64 rng(10);
    const ImageBuffer a = oracle::random_image(16, 20, rng), g = oracle::random_image(16, 20, rng);
    const LossBreakdown b = composite_loss(a, g, 0.8, 0.2, 0.1, 0.2, 1e-8);
    EXPECT_EQ(b.lambda1, 0.8);
    EXPECT_EQ(b.lambda2, 0.2);
    EXPECT_EQ(b.lambda3, 0.1);

    // Independent recompute of every term.
    const Grid e = pixel_error(a, g);
    double max_e = 0;
    for (double v : e.values) max_e = std::max(max_e, v);
    double lw = 0;
    for (std::size_t k = 0; k < e.values.size(); ++k) lw += (0.2 + 0.8 * e.values[k] / (max_e + 1e-8)) * e.values[k];
    lw /= 16.0 * 20.0;
    const double ld = (1.0 - oracle::ssim(a, g)) / 2.0;
    const double lg = oracle_gdc(a, g);
    EXPECT_NEAR(b.weighted_l1, lw, 1e-12);
    EXPECT_NEAR(b.dssim, ld, 1e-10);
    EXPECT_NEAR(b.grad, lg, 1e-12);
    EXPECT_NEAR(b.composite, 0.8 * lw + 0.2 * ld + 0.1 * lg, 1e-10);
    EXPECT_EQ(b.composite, 0.8 * b.weighted_l1 + 0.2 * b.dssim + 0.1 * b.grad);

    const LossBreakdown no_grad = composite_loss(a, g, 0.8, 0.2, 0.0, 0.2, 1e-8);
    EXPECT_EQ(no_grad.composite, 0.8 * no_grad.weighted_l1 + 0.2 * no_grad.dssim);
}

TEST(CompositeLoss, PlainOptionsSkipConstraintTerms) {
    std::mt19937_64 rng(11);
    const ImageBuffer a = oracle::random_image(16, 16, rng), g = oracle::random_image(16, 16, rng);
    LossOptions opts;
    opts.adaptive_weights = false;
    opts.gradient_difference = false;
    loss_counters().reset();
    const LossBreakdown b = composite_loss(a, g, opts);
    EXPECT_EQ(loss_counters().weight_map_calls.load(), 0u);
    EXPECT_EQ(loss_counters().gdc_calls.load(), 0u);
    EXPECT_EQ(b.weighted_l1, mean_l1(a, g));
    EXPECT_EQ(b.grad, 0.0);
    EXPECT_EQ(b.composite, 0.8 * b.weighted_l1 + 0.2 * b.dssim);
}

TEST(CompositeLoss, CsvRow) {
    EXPECT_EQ(loss_csv_header(), "iteration,weighted_l1,dssim,grad,composite");
    LossBreakdown b;
    b.weighted_l1 = 0.5;
    b.dssim = 0.25;
    b.grad = 0.125;
    b.composite = 1.0;
    EXPECT_EQ(loss_csv_row(3, b), "3,0.5,0.25,0.125,1");
}

TEST(Losses, NonNegative) {
    std::mt19937_64 rng(12);
    for (int t = 0; t < 20; ++t) {
        const ImageBuffer a = oracle::random_image(12, 12, rng), g = oracle::random_image(12, 12, rng);
        const LossBreakdown b = composite_loss(a, g, LossOptions{});
        EXPECT_GE(b.weighted_l1, 0.0);
        EXPECT_GE(b.dssim, 0.0);
        EXPECT_GE(b.grad, 0.0);
        EXPECT_TRUE(std::isfinite(b.composite));
    }
}
