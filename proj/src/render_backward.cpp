// SPDX-License-Identifier: Apache-2.0
#include "msplat/autodiff.hpp"
#include "msplat/errors.hpp"
#include "msplat/parallel.hpp"
#include "raster_internal.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace msplat {

std::vector<double> GradBuffer::flatten() const {
    std::vector<double> out(gaussians.size() * kParamsPerGaussian);
    for (std::size_t g = 0; g < gaussians.size(); ++g) {
        const GaussianGrad& gg = gaussians[g];
        double* v = out.data() + g * kParamsPerGaussian;
        v[0] = gg.d_center.x();
        v[1] = gg.d_center.y();
        v[2] = gg.d_center.z();
        for (int k = 0; k < 4; ++k) v[3 + k] = gg.d_rotation[k];
        for (int k = 0; k < 3; ++k) v[7 + k] = gg.d_log_scale[k];
        for (int k = 0; k < 3; ++k) v[10 + k] = gg.d_color_logit[k];
        v[13] = gg.d_opacity_logit;
    }
    return out;
}

namespace {

/// Adjoints with respect to one screen-space splat.
struct SplatAdjoint {
    Vec2 mean = Vec2::Zero();
    Mat2 conic = Mat2::Zero();  // w.r.t. the full inverse-covariance matrix
    double opacity = 0.0;
    Vec3 color = Vec3::Zero();

    SplatAdjoint& operator+=(const SplatAdjoint& o) {
        mean += o.mean;
        conic += o.conic;
        opacity += o.opacity;
        color += o.color;
        return *this;
    }
};

void accumulate_weight(SplatAdjoint& adj, const Splat2D& s, const Vec2& u, double weight, double d_weight) {
    const Vec2 d = u - s.mean2d;
    const double g = d_weight * weight;
    adj.mean += g * (s.cov2d_inv * d);
    adj.conic += (-0.5 * g) * (d * d.transpose());
}

void backward_tile(const Tape& tape, const TileTape& tile, const ImageBuffer& d_image,
                   std::vector<SplatAdjoint>& local) {
    const RenderConfig& cfg = tape.config;
    const std::size_t n = tape.samples.count();
    local.assign(tile.splats.size(), SplatAdjoint{});
    auto splat_of = [&](std::uint32_t l) -> const Splat2D& { return tape.splats[tile.splats[l]]; };
    std::vector<double> trans;

    std::size_t sample = 0;
    std::size_t pixel = 0;
    for (int i = tile.rect.y0; i < tile.rect.y1; ++i) {
        for (int j = tile.rect.x0; j < tile.rect.x1; ++j, ++pixel) {
            Vec3 d_pix;
            for (int c = 0; c < 3; ++c) {
                const double raw = tile.pixel_raw[pixel * 3 + c];
                d_pix[c] = (raw >= 0.0 && raw <= 1.0) ? d_image.at(i, j, c) : 0.0;
            }
            const Vec3 d_c = d_pix / static_cast<double>(n);
            const Vec2 center(j + 0.5, i + 0.5);
            for (std::size_t k = 0; k < n; ++k, ++sample) {
                const std::uint32_t b = tile.sample_begin[sample], e = tile.sample_begin[sample + 1];
                if (b == e) continue;
                const Vec2 u = center + tape.samples.offsets[k];
                if (cfg.compositing == CompositingMode::normalized) {
                    double denom = 0.0;
                    Vec3 numer = Vec3::Zero();
                    for (std::uint32_t q = b; q < e; ++q) {
                        const Splat2D& s = splat_of(tile.entries[q].splat);
                        const double a = s.opacity * tile.entries[q].weight;
                        denom += a;
                        numer += a * s.color;
                    }
                    if (denom < cfg.denom_epsilon) continue;
                    const double inv = 1.0 / (denom + cfg.denom_epsilon);
                    const Vec3 color = numer * inv;
                    for (std::uint32_t q = b; q < e; ++q) {
                        const TapeEntry& te = tile.entries[q];
                        const Splat2D& s = splat_of(te.splat);
                        SplatAdjoint& adj = local[te.splat];
                        const double a = s.opacity * te.weight;
                        const double d_a = d_c.dot(s.color - color) * inv;
                        adj.color += (a * inv) * d_c;
                        adj.opacity += d_a * te.weight;
                        accumulate_weight(adj, s, u, te.weight, d_a * s.opacity);
                    }
                } else {
                    trans.resize(e - b);
                    double t = 1.0;
                    for (std::uint32_t q = b; q < e; ++q) {
                        trans[q - b] = t;
                        const Splat2D& s = splat_of(tile.entries[q].splat);
                        t *= 1.0 - s.opacity * tile.entries[q].weight;
                    }
                    // Color contributed by everything behind the current entry.
                    Vec3 behind = t * tape.background;
                    for (std::uint32_t q = e; q-- > b;) {
                        const TapeEntry& te = tile.entries[q];
                        const Splat2D& s = splat_of(te.splat);
                        SplatAdjoint& adj = local[te.splat];
                        const double a = s.opacity * te.weight;
                        const double tn = trans[q - b];
                        const double d_a = d_c.dot(tn * s.color - behind / (1.0 - a));
                        adj.color += (a * tn) * d_c;
                        adj.opacity += d_a * te.weight;
                        accumulate_weight(adj, s, u, te.weight, d_a * s.opacity);
                        behind += (a * tn) * s.color;
                    }
                }
            }
        }
    }
}

/// d quaternion from dL/dR for R = rotation_matrix(q / |q|), projected on the sphere tangent.
Vec4 quaternion_adjoint(const Quat& q_raw, const Mat3& g) {
    const Quat q = q_raw.normalized();
    const double w = q.w, x = q.x, y = q.y, z = q.z;
    Vec4 d;
    d[0] = 2 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) + x * g(2, 1));
    d[1] = 2 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2 * x * g(1, 1) - w * g(1, 2) + z * g(2, 0) +
                w * g(2, 1) - 2 * x * g(2, 2));
    d[2] = 2 * (-2 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2) - w * g(2, 0) +
                z * g(2, 1) - 2 * y * g(2, 2));
    d[3] = 2 * (-2 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) - 2 * z * g(1, 1) + y * g(1, 2) +
                x * g(2, 0) + y * g(2, 1));
    const Vec4 qv = q.as_vector();
    return (d - qv * qv.dot(d)) / q_raw.norm();
}

GaussianGrad chain_to_gaussian(const Gaussian3D& g, const Splat2D& s, const SplatAdjoint& adj,
                               const CameraModel& cam) {
    GaussianGrad out;
    const double alpha = s.opacity;
    out.d_opacity_logit = adj.opacity * alpha * (1.0 - alpha);
    for (int c = 0; c < 3; ++c) out.d_color_logit[c] = adj.color[c] * s.color[c] * (1.0 - s.color[c]);

    // Inverse covariance -> screen covariance.
    const Mat2& q = s.cov2d_inv;
    Mat2 d_cov2d = -q * adj.conic * q;
    d_cov2d = 0.5 * (d_cov2d + d_cov2d.transpose()).eval();

    const Mat3& w = cam.rotation;
    const Vec3 t = w * g.center + cam.translation;
    const double iz = 1.0 / t.z();
    const double iz2 = iz * iz;
    Mat23 jac;
    jac << cam.fx * iz, 0.0, -cam.fx * t.x() * iz2, 0.0, cam.fy * iz, -cam.fy * t.y() * iz2;
    const Mat23 tm = jac * w;
    const Mat3 rot = rotation_matrix(g.rotation);
    const Vec3 scale = g.scale();
    const Mat3 m = rot * scale.asDiagonal();
    const Mat3 sigma = m * m.transpose();

    // Sigma2D = T Sigma T^T + blur I
    const Mat3 d_sigma = tm.transpose() * d_cov2d * tm;
    const Mat23 d_tm = 2.0 * d_cov2d * tm * sigma;
    const Mat23 d_jac = d_tm * w.transpose();

    // Camera-space point: through the mean projection and through J.
    Vec3 d_t;
    d_t.x() = adj.mean.x() * cam.fx * iz + d_jac(0, 2) * (-cam.fx * iz2);
    d_t.y() = adj.mean.y() * cam.fy * iz + d_jac(1, 2) * (-cam.fy * iz2);
    d_t.z() = -(adj.mean.x() * cam.fx * t.x() + adj.mean.y() * cam.fy * t.y()) * iz2 +
              d_jac(0, 0) * (-cam.fx * iz2) + d_jac(0, 2) * (2.0 * cam.fx * t.x() * iz2 * iz) +
              d_jac(1, 1) * (-cam.fy * iz2) + d_jac(1, 2) * (2.0 * cam.fy * t.y() * iz2 * iz);
    out.d_center = w.transpose() * d_t;

    // Sigma = M M^T, M = R S
    const Mat3 d_m = 2.0 * d_sigma * m;
    const Mat3 d_rot = d_m * scale.asDiagonal();
    for (int k = 0; k < 3; ++k) out.d_log_scale[k] = d_m.col(k).dot(rot.col(k)) * scale[k];
    out.d_rotation = quaternion_adjoint(g.rotation, d_rot);
    return out;
}

}  // namespace

GradBuffer backward_render(const Tape& tape, const ImageBuffer& d_image, const Scene& scene,
                           const CameraModel& cam) {
    if (tape.gaussian_count != scene.gaussians.size()) {
        throw TopologyError("tape was recorded for " + std::to_string(tape.gaussian_count) + " gaussians, scene has " +
                            std::to_string(scene.gaussians.size()));
    }
    if (d_image.height() != tape.height || d_image.width() != tape.width) {
        throw ShapeError("image adjoint does not match the rendered image size");
    }
    for (const Splat2D& s : tape.splats) {
        if (s.source_index < 0 || static_cast<std::size_t>(s.source_index) >= scene.gaussians.size()) {
            throw TopologyError("tape references a gaussian outside the scene");
        }
    }

    GradBuffer out;
    out.gaussians.assign(scene.gaussians.size(), GaussianGrad{});
    out.d_image = d_image;

    const std::size_t n_tiles = tape.tiles.size();
    const int workers = resolve_threads(tape.config.threads);
    std::vector<SplatAdjoint> merged(tape.splats.size());

    if (tape.config.deterministic) {
        std::vector<std::vector<SplatAdjoint>> per_tile(n_tiles);
        parallel_for(n_tiles, workers, [&](std::size_t t, int) { backward_tile(tape, tape.tiles[t], d_image, per_tile[t]); });
        for (std::size_t t = 0; t < n_tiles; ++t) {
            const auto& ids = tape.tiles[t].splats;
            for (std::size_t l = 0; l < ids.size(); ++l) merged[ids[l]] += per_tile[t][l];
        }
    } else {
        std::vector<std::vector<SplatAdjoint>> per_worker(static_cast<std::size_t>(workers),
                                                          std::vector<SplatAdjoint>(tape.splats.size()));
        parallel_for(n_tiles, workers, [&](std::size_t t, int worker) {
            std::vector<SplatAdjoint> local;
            backward_tile(tape, tape.tiles[t], d_image, local);
            const auto& ids = tape.tiles[t].splats;
            for (std::size_t l = 0; l < ids.size(); ++l) per_worker[worker][ids[l]] += local[l];
        });
        for (const auto& partial : per_worker) {
            for (std::size_t s = 0; s < merged.size(); ++s) merged[s] += partial[s];
        }
    }

    parallel_for(tape.splats.size(), workers, [&](std::size_t s, int) {
        const Splat2D& splat = tape.splats[s];
        out.gaussians[splat.source_index] =
            chain_to_gaussian(scene.gaussians[splat.source_index], splat, merged[s], cam);
    });
    return out;
}

Evaluation evaluate_with_gradient(const Scene& scene, const CameraModel& cam, const ImageBuffer& target,
                                  const RenderConfig& cfg, const SampleSpec& samples, const LossOptions& opts) {
    RenderOutput fwd = render_with_tape(scene, cam, cfg, samples);
    Evaluation ev;
    std::optional<WeightMap> wm;
    if (opts.adaptive_weights) wm = weight_map(pixel_error(fwd.image, target), opts.alpha_floor, opts.epsilon);
    ev.loss = composite_loss(fwd.image, target, opts, wm ? &*wm : nullptr);
    const ImageBuffer d_image = backward_loss(fwd.image, target, opts, wm ? &*wm : nullptr);
    ev.grads = backward_render(fwd.tape, d_image, scene, cam);
    ev.image = std::move(fwd.image);
    return ev;
}

}  // namespace msplat
