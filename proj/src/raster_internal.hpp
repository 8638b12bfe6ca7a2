// SPDX-License-Identifier: Apache-2.0
// Shared between the forward renderer, tape replay and the backward pass so
// all three walk contributions with identical arithmetic.
#pragma once

#include "msplat/raster.hpp"

#include <cmath>
#include <span>

namespace msplat::detail {

/// Blends the recorded contributions of one sample. `splat_of(local)` maps a
/// tape entry to its splat.
template <typename SplatOf>
Vec3 blend(std::span<const TapeEntry> entries, SplatOf&& splat_of, CompositingMode mode, const Vec3& background,
           double denom_epsilon) {
    if (mode == CompositingMode::normalized) {
        double denom = 0.0;
        Vec3 numer = Vec3::Zero();
        for (const TapeEntry& e : entries) {
            const Splat2D& s = splat_of(e.splat);
            const double a = s.opacity * e.weight;
            denom += a;
            numer += a * s.color;
        }
        if (denom < denom_epsilon) return background;
        return numer / (denom + denom_epsilon);
    }
    double transmittance = 1.0;
    Vec3 color = Vec3::Zero();
    for (const TapeEntry& e : entries) {
        const Splat2D& s = splat_of(e.splat);
        const double a = s.opacity * e.weight;
        color += (a * transmittance) * s.color;
        transmittance *= 1.0 - a;
    }
    return color + transmittance * background;
}

/// Radius in standard deviations that contains every sample with weight >= cutoff.
inline double footprint_sigmas(const RenderConfig& cfg) {
    double r = cfg.extent_sigma;
    if (cfg.weight_cutoff > 0.0) r = std::max(r, std::sqrt(2.0 * std::log(1.0 / cfg.weight_cutoff)));
    return r * (1.0 + 1e-9);
}

/// Depth order used by front-to-back compositing.
inline bool depth_less(const Splat2D& a, const Splat2D& b) {
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.source_index < b.source_index;
}

}  // namespace msplat::detail
