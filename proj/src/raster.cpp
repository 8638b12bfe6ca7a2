// SPDX-License-Identifier: Apache-2.0
#include "msplat/raster.hpp"

#include "msplat/errors.hpp"
#include "msplat/parallel.hpp"
#include "raster_internal.hpp"

#include <algorithm>
#include <cmath>

namespace msplat {

void SampleSpec::validate() const {
    if (offsets.empty()) throw ValidationError("sample spec needs at least one offset");
    for (const Vec2& d : offsets) {
        if (!(d.x() >= -0.5 && d.x() < 0.5 && d.y() >= -0.5 && d.y() < 0.5)) {
            throw ValidationError("subpixel offsets must lie in [-0.5, 0.5)");
        }
    }
}

SampleSpec SampleSpec::single() { return {{Vec2(0.0, 0.0)}}; }

SampleSpec SampleSpec::two_sample() { return {{Vec2(-0.25, -0.25), Vec2(0.25, 0.25)}}; }

SampleSpec SampleSpec::rotated_grid4() {
    return {{Vec2(-0.125, -0.375), Vec2(0.375, -0.125), Vec2(0.125, 0.375), Vec2(-0.375, 0.125)}};
}

SampleSpec SampleSpec::regular_grid(int m) {
    if (m < 1) throw ValidationError("grid size must be positive");
    SampleSpec spec;
    for (int r = 0; r < m; ++r) {
        for (int c = 0; c < m; ++c) {
            spec.offsets.emplace_back((c + 0.5) / m - 0.5, (r + 0.5) / m - 0.5);
        }
    }
    return spec;
}

SampleSpec SampleSpec::for_count(int n) {
    if (n == 1) return single();
    if (n == 2) return two_sample();
    if (n == 4) return rotated_grid4();
    const int m = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
    if (n > 0 && m * m == n) return regular_grid(m);
    throw ValidationError("no default sample pattern for n=" + std::to_string(n));
}

SampleSpec SampleSpec::named(std::string_view pattern, int n) {
    if (pattern == "rotated") return for_count(n);
    if (pattern == "grid") {
        const int m = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
        if (n > 0 && m * m == n) return regular_grid(m);
        throw ValidationError("grid pattern needs a square sample count");
    }
    throw ValidationError("unknown sample pattern '" + std::string(pattern) + "'");
}

std::string_view to_string(CompositingMode m) {
    return m == CompositingMode::normalized ? "normalized" : "front_to_back";
}

CompositingMode parse_compositing(std::string_view s) {
    if (s == "normalized") return CompositingMode::normalized;
    if (s == "front_to_back") return CompositingMode::front_to_back;
    throw ValidationError("unknown compositing mode '" + std::string(s) + "'");
}

void RenderConfig::validate() const {
    if (!(weight_cutoff >= 0.0 && weight_cutoff <= 0.1)) throw ValidationError("weight_cutoff must lie in [0, 0.1]");
    if (!(denom_epsilon > 0.0)) throw ValidationError("denom_epsilon must be positive");
    if (tile_size < 1) throw ValidationError("tile_size must be positive");
    if (!(extent_sigma > 0.0)) throw ValidationError("extent_sigma must be positive");
    if (!(blur >= 0.0)) throw ValidationError("blur must be non-negative");
}

std::size_t Tape::entry_count() const {
    std::size_t n = 0;
    for (const auto& t : tiles) n += t.entries.size();
    return n;
}

ProjectedPoint project_point(const Vec3& x, const CameraModel& cam) {
    const Vec3 t = cam.rotation * x + cam.translation;
    ProjectedPoint out;
    out.depth = t.z();
    out.culled = !(t.z() > cam.near_clip);
    out.pixel = {cam.fx * t.x() / t.z() + cam.cx, cam.fy * t.y() / t.z() + cam.cy};
    return out;
}

Mat2 project_covariance(const Gaussian3D& g, const CameraModel& cam, double blur) {
    const Vec3 t = cam.rotation * g.center + cam.translation;
    const double iz = 1.0 / t.z();
    Mat23 j;
    j << cam.fx * iz, 0.0, -cam.fx * t.x() * iz * iz, 0.0, cam.fy * iz, -cam.fy * t.y() * iz * iz;
    const Mat23 tm = j * cam.rotation;
    Mat2 cov = tm * covariance_of(g) * tm.transpose();
    cov(0, 1) = cov(1, 0) = 0.5 * (cov(0, 1) + cov(1, 0));
    cov(0, 0) += blur;
    cov(1, 1) += blur;
    return cov;
}

std::optional<Splat2D> make_splat(const Gaussian3D& g, int index, const CameraModel& cam, const RenderConfig& cfg) {
    const ProjectedPoint pp = project_point(g.center, cam);
    if (pp.culled) return std::nullopt;

    Splat2D s;
    s.mean2d = pp.pixel;
    s.depth = pp.depth;
    s.source_index = index;
    s.cov2d = project_covariance(g, cam, cfg.blur);
    const double a = s.cov2d(0, 0), b = s.cov2d(0, 1), c = s.cov2d(1, 1);
    const double det = a * c - b * b;
    if (!(det > 0.0) || !std::isfinite(det)) return std::nullopt;
    s.cov2d_inv << c / det, -b / det, -b / det, a / det;

    const double k = detail::footprint_sigmas(cfg);
    const double rx = k * std::sqrt(a);
    const double ry = k * std::sqrt(c);
    if (!std::isfinite(rx) || !std::isfinite(ry) || !s.mean2d.allFinite()) return std::nullopt;
    const double lo_x = std::max(std::floor(s.mean2d.x() - rx), 0.0);
    const double lo_y = std::max(std::floor(s.mean2d.y() - ry), 0.0);
    const double hi_x = std::min(std::floor(s.mean2d.x() + rx) + 1.0, static_cast<double>(cam.width));
    const double hi_y = std::min(std::floor(s.mean2d.y() + ry) + 1.0, static_cast<double>(cam.height));
    if (lo_x >= hi_x || lo_y >= hi_y) return std::nullopt;
    s.bbox = {static_cast<int>(lo_x), static_cast<int>(lo_y), static_cast<int>(hi_x), static_cast<int>(hi_y)};

    s.opacity = g.opacity();
    s.color = g.color();
    return s;
}

double gaussian_weight(const Splat2D& splat, const Vec2& u) {
    const double dx = u.x() - splat.mean2d.x();
    const double dy = u.y() - splat.mean2d.y();
    const Mat2& q = splat.cov2d_inv;
    const double power = -0.5 * (q(0, 0) * dx * dx + 2.0 * q(0, 1) * dx * dy + q(1, 1) * dy * dy);
    return std::exp(power);
}

Vec3 composite_sample(std::span<const Splat2D> splats, const Vec2& u, const RenderConfig& cfg,
                      const Vec3& background) {
    std::vector<std::uint32_t> order(splats.size());
    for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
    if (cfg.compositing == CompositingMode::front_to_back) {
        std::sort(order.begin(), order.end(),
                  [&](std::uint32_t a, std::uint32_t b) { return detail::depth_less(splats[a], splats[b]); });
    }
    std::vector<TapeEntry> entries;
    for (std::uint32_t i : order) {
        const double w = gaussian_weight(splats[i], u);
        if (w >= cfg.weight_cutoff) entries.push_back({i, w});
    }
    return detail::blend(
        entries, [&](std::uint32_t i) -> const Splat2D& { return splats[i]; }, cfg.compositing, background,
        cfg.denom_epsilon);
}

std::vector<Splat2D> project_scene(const Scene& scene, const CameraModel& cam, const RenderConfig& cfg) {
    std::vector<Splat2D> splats;
    splats.reserve(scene.gaussians.size());
    for (std::size_t i = 0; i < scene.gaussians.size(); ++i) {
        if (auto s = make_splat(scene.gaussians[i], static_cast<int>(i), cam, cfg)) splats.push_back(*s);
    }
    return splats;
}

namespace {

struct TileGrid {
    int tiles_x = 0;
    int tiles_y = 0;
    std::vector<PixelRect> rects;
    std::vector<std::vector<std::uint32_t>> lists;
};

TileGrid bin_splats(const std::vector<Splat2D>& splats, const CameraModel& cam, const RenderConfig& cfg) {
    TileGrid grid;
    const int ts = cfg.tile_size;
    grid.tiles_x = (cam.width + ts - 1) / ts;
    grid.tiles_y = (cam.height + ts - 1) / ts;
    const std::size_t n_tiles = static_cast<std::size_t>(grid.tiles_x) * grid.tiles_y;
    grid.rects.resize(n_tiles);
    grid.lists.resize(n_tiles);
    for (int ty = 0; ty < grid.tiles_y; ++ty) {
        for (int tx = 0; tx < grid.tiles_x; ++tx) {
            grid.rects[static_cast<std::size_t>(ty) * grid.tiles_x + tx] = {
                tx * ts, ty * ts, std::min((tx + 1) * ts, cam.width), std::min((ty + 1) * ts, cam.height)};
        }
    }
    for (std::uint32_t s = 0; s < splats.size(); ++s) {
        const PixelRect& b = splats[s].bbox;
        const int tx0 = b.x0 / ts, tx1 = (b.x1 - 1) / ts;
        const int ty0 = b.y0 / ts, ty1 = (b.y1 - 1) / ts;
        for (int ty = ty0; ty <= ty1; ++ty) {
            for (int tx = tx0; tx <= tx1; ++tx) grid.lists[static_cast<std::size_t>(ty) * grid.tiles_x + tx].push_back(s);
        }
    }
    if (cfg.compositing == CompositingMode::front_to_back) {
        for (auto& list : grid.lists) {
            std::sort(list.begin(), list.end(),
                      [&](std::uint32_t a, std::uint32_t b) { return detail::depth_less(splats[a], splats[b]); });
        }
    }
    return grid;
}

void check_inputs(const Scene& scene, const CameraModel& cam, const RenderConfig& cfg) {
    if (scene.gaussians.empty()) throw ValidationError("cannot render an empty scene");
    cam.validate();
    cfg.validate();
}

void render_tile(const std::vector<Splat2D>& splats, const std::vector<std::uint32_t>& list, const PixelRect& rect,
                 const SampleSpec& samples, const RenderConfig& cfg, const Vec3& background, ImageBuffer& image,
                 TileTape* tape) {
    const std::size_t n = samples.count();
    std::vector<std::uint32_t> candidates;
    std::vector<TapeEntry> scratch;
    auto splat_of = [&](std::uint32_t local) -> const Splat2D& { return splats[list[local]]; };
    if (tape) {
        tape->rect = rect;
        tape->splats = list;
        tape->sample_begin.clear();
        tape->sample_begin.reserve(static_cast<std::size_t>(rect.x1 - rect.x0) * (rect.y1 - rect.y0) * n + 1);
        tape->entries.clear();
        tape->pixel_raw.clear();
    }
    for (int i = rect.y0; i < rect.y1; ++i) {
        for (int j = rect.x0; j < rect.x1; ++j) {
            candidates.clear();
            for (std::uint32_t local = 0; local < list.size(); ++local) {
                if (splats[list[local]].bbox.contains(j, i)) candidates.push_back(local);
            }
            const Vec2 center(j + 0.5, i + 0.5);
            Vec3 sum = Vec3::Zero();
            for (const Vec2& delta : samples.offsets) {
                const Vec2 u = center + delta;
                scratch.clear();
                for (std::uint32_t local : candidates) {
                    const double w = gaussian_weight(splat_of(local), u);
                    if (w >= cfg.weight_cutoff) scratch.push_back({local, w});
                }
                if (tape) {
                    tape->sample_begin.push_back(static_cast<std::uint32_t>(tape->entries.size()));
                    tape->entries.insert(tape->entries.end(), scratch.begin(), scratch.end());
                }
                sum += detail::blend(scratch, splat_of, cfg.compositing, background, cfg.denom_epsilon);
            }
            const Vec3 raw = sum / static_cast<double>(n);
            for (int c = 0; c < 3; ++c) {
                image.at(i, j, c) = std::clamp(raw[c], 0.0, 1.0);
                if (tape) tape->pixel_raw.push_back(raw[c]);
            }
        }
    }
    if (tape) tape->sample_begin.push_back(static_cast<std::uint32_t>(tape->entries.size()));
}

RenderOutput render_impl(const Scene& scene, const CameraModel& cam, const RenderConfig& cfg,
                         const SampleSpec& samples, bool keep_tape) {
    check_inputs(scene, cam, cfg);
    samples.validate();
    RenderOutput out;
    out.image = ImageBuffer(cam.height, cam.width);
    Tape& tape = out.tape;
    tape.width = cam.width;
    tape.height = cam.height;
    tape.samples = samples;
    tape.config = cfg;
    tape.background = scene.background;
    tape.gaussian_count = scene.gaussians.size();
    tape.splats = project_scene(scene, cam, cfg);
    TileGrid grid = bin_splats(tape.splats, cam, cfg);
    tape.tiles.resize(grid.rects.size());
    parallel_for(grid.rects.size(), cfg.threads, [&](std::size_t t, int) {
        render_tile(tape.splats, grid.lists[t], grid.rects[t], samples, cfg, scene.background, out.image,
                    keep_tape ? &tape.tiles[t] : nullptr);
    });
    if (!keep_tape) tape.tiles.clear();
    return out;
}

}  // namespace

RenderOutput render_with_tape(const Scene& scene, const CameraModel& cam, const RenderConfig& cfg,
                              const SampleSpec& samples) {
    return render_impl(scene, cam, cfg, samples, true);
}

ImageBuffer render(const Scene& scene, const CameraModel& cam, const RenderConfig& cfg, const SampleSpec& samples) {
    return render_impl(scene, cam, cfg, samples, false).image;
}

ImageBuffer render_single_sample(const Scene& scene, const CameraModel& cam, const RenderConfig& cfg) {
    check_inputs(scene, cam, cfg);
    const std::vector<Splat2D> splats = project_scene(scene, cam, cfg);
    const TileGrid grid = bin_splats(splats, cam, cfg);
    ImageBuffer image(cam.height, cam.width);
    parallel_for(grid.rects.size(), cfg.threads, [&](std::size_t t, int) {
        const PixelRect& rect = grid.rects[t];
        std::vector<Splat2D> local;
        for (int i = rect.y0; i < rect.y1; ++i) {
            for (int j = rect.x0; j < rect.x1; ++j) {
                local.clear();
                for (std::uint32_t s : grid.lists[t]) {
                    if (splats[s].bbox.contains(j, i)) local.push_back(splats[s]);
                }
                const Vec3 c = composite_sample(local, Vec2(j + 0.5, i + 0.5), cfg, scene.background);
                for (int ch = 0; ch < 3; ++ch) image.at(i, j, ch) = std::clamp(c[ch], 0.0, 1.0);
            }
        }
    });
    return image;
}

ImageBuffer replay_tape(const Tape& tape) {
    ImageBuffer image(tape.height, tape.width);
    const std::size_t n = tape.samples.count();
    for (const TileTape& tile : tape.tiles) {
        auto splat_of = [&](std::uint32_t local) -> const Splat2D& { return tape.splats[tile.splats[local]]; };
        std::size_t sample = 0;
        for (int i = tile.rect.y0; i < tile.rect.y1; ++i) {
            for (int j = tile.rect.x0; j < tile.rect.x1; ++j) {
                Vec3 sum = Vec3::Zero();
                for (std::size_t k = 0; k < n; ++k, ++sample) {
                    const std::span<const TapeEntry> entries(tile.entries.data() + tile.sample_begin[sample],
                                                             tile.sample_begin[sample + 1] - tile.sample_begin[sample]);
                    sum += detail::blend(entries, splat_of, tape.config.compositing, tape.background,
                                         tape.config.denom_epsilon);
                }
                const Vec3 raw = sum / static_cast<double>(n);
                for (int c = 0; c < 3; ++c) image.at(i, j, c) = std::clamp(raw[c], 0.0, 1.0);
            }
        }
    }
    return image;
}

}  // namespace msplat
