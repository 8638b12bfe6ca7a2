// SPDX-License-Identifier: Apache-2.0
//
// Forward rendering: projection of Gaussians to screen-space splats, per-sample
// compositing, and multi-sample aggregation into pixel colors.
#pragma once

#include "msplat/image.hpp"
#include "msplat/scene.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace msplat {

/// Screen-space floor added to the projected covariance diagonal (px^2).
inline constexpr double kDefaultBlur = 0.3;

/// Half-open integer pixel rectangle [x0, x1) x [y0, y1).
struct PixelRect {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    bool empty() const noexcept { return x0 >= x1 || y0 >= y1; }
    bool contains(int x, int y) const noexcept { return x >= x0 && x < x1 && y >= y0 && y < y1; }
    bool intersects(const PixelRect& o) const noexcept {
        return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1;
    }
};

struct Splat2D {
    Vec2 mean2d = Vec2::Zero();
    Mat2 cov2d = Mat2::Identity();
    Mat2 cov2d_inv = Mat2::Identity();
    double depth = 0.0;
    PixelRect bbox;
    int source_index = 0;
    double opacity = 0.0;  // mapped alpha
    Vec3 color = Vec3::Zero();
};

/// Subpixel offsets relative to the pixel center, each component in [-0.5, 0.5).
struct SampleSpec {
    std::vector<Vec2> offsets;

    std::size_t count() const noexcept { return offsets.size(); }
    void validate() const;

    static SampleSpec single();
    /// 2x: the diagonal pair (-0.25,-0.25), (0.25,0.25).
    static SampleSpec two_sample();
    /// 4x rotated grid, the default MSAA pattern.
    static SampleSpec rotated_grid4();
    /// m x m ordered grid with offsets (k + 0.5)/m - 0.5.
    static SampleSpec regular_grid(int m);
    /// Default pattern for a sample count: 1, 2, 4 (rotated grid), or a perfect square.
    static SampleSpec for_count(int n);
    /// "rotated" or "grid" (the ordered 2x2 pattern for n = 4).
    static SampleSpec named(std::string_view pattern, int n);
};

enum class CompositingMode { normalized, front_to_back };

std::string_view to_string(CompositingMode m);
CompositingMode parse_compositing(std::string_view s);

struct RenderConfig {
    CompositingMode compositing = CompositingMode::normalized;
    /// Splats whose footprint weight at a sample is below this are skipped.
    double weight_cutoff = 1.0 / 255.0;
    double denom_epsilon = 1e-8;
    int tile_size = 16;
    /// Splat bounding boxes cover at least this many standard deviations, and
    /// never less than the radius at which the footprint weight reaches the cutoff.
    double extent_sigma = 3.0;
    double blur = kDefaultBlur;
    /// Deterministic mode merges gradient partials per tile in tile order so
    /// results are bit-identical for any thread count.
    bool deterministic = true;
    /// Worker threads; 0 selects the hardware concurrency.
    int threads = 1;

    void validate() const;
};

struct ProjectedPoint {
    Vec2 pixel = Vec2::Zero();
    double depth = 0.0;
    bool culled = false;  // depth <= near_clip
};

ProjectedPoint project_point(const Vec3& x, const CameraModel& cam);

/// First-order (EWA) footprint: (J W) Sigma (J W)^T + blur * I.
Mat2 project_covariance(const Gaussian3D& g, const CameraModel& cam, double blur = kDefaultBlur);

/// Projects one Gaussian; nullopt when culled by the near plane or the image bounds.
std::optional<Splat2D> make_splat(const Gaussian3D& g, int index, const CameraModel& cam, const RenderConfig& cfg);

/// exp(-1/2 (u - p)^T Sigma2D^{-1} (u - p)).
double gaussian_weight(const Splat2D& splat, const Vec2& u);

/// Color of a single sample point. Normalized mode sums in the given order;
/// front-to-back mode orders by (depth, source_index).
Vec3 composite_sample(std::span<const Splat2D> splats, const Vec2& u, const RenderConfig& cfg,
                      const Vec3& background);

/// Splat contribution recorded for one sample, `splat` is tile-local.
struct TapeEntry {
    std::uint32_t splat;
    double weight;
};

struct TileTape {
    PixelRect rect;
    /// Indices into Tape::splats in traversal order.
    std::vector<std::uint32_t> splats;
    /// CSR offsets into `entries`; samples are ordered pixel-major (row-major
    /// within the tile), then by subsample.
    std::vector<std::uint32_t> sample_begin;
    std::vector<TapeEntry> entries;
    /// Unclamped multi-sample average per pixel (3 values each).
    std::vector<double> pixel_raw;
};

/// Everything the backward pass needs from a forward render.
struct Tape {
    int width = 0;
    int height = 0;
    SampleSpec samples;
    RenderConfig config;
    Vec3 background = Vec3::Zero();
    std::size_t gaussian_count = 0;
    std::vector<Splat2D> splats;
    std::vector<TileTape> tiles;

    std::size_t entry_count() const;
};

struct RenderOutput {
    ImageBuffer image;
    Tape tape;
};

/// Multi-sample render; pixel (i, j) has center (j + 0.5, i + 0.5).
ImageBuffer render(const Scene& scene, const CameraModel& cam, const RenderConfig& cfg, const SampleSpec& samples);
RenderOutput render_with_tape(const Scene& scene, const CameraModel& cam, const RenderConfig& cfg,
                              const SampleSpec& samples);

/// One composite per pixel center, no aggregation.
ImageBuffer render_single_sample(const Scene& scene, const CameraModel& cam, const RenderConfig& cfg);

/// Recomputes the image from recorded weights and the splats' colors/opacities.
ImageBuffer replay_tape(const Tape& tape);

/// Screen-space splats for a scene, indexed compactly (source_index refers to the scene).
std::vector<Splat2D> project_scene(const Scene& scene, const CameraModel& cam, const RenderConfig& cfg);

}  // namespace msplat
