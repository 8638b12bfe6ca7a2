// SPDX-License-Identifier: Apache-2.0
#include "msplat/errors.hpp"
#include "msplat/trainer.hpp"

#include <cmath>

namespace msplat {

double AdamConfig::rate_for(Field f) const {
    switch (f) {
        case Field::center: return lr.center * scene_extent;
        case Field::rotation: return lr.rotation;
        case Field::log_scale: return lr.log_scale;
        case Field::color: return lr.color;
        case Field::opacity: return lr.opacity;
    }
    return 0.0;
}

void adam_step(ParamVector& params, std::span<const double> grads, AdamState& state, const AdamConfig& cfg) {
    const std::size_t n = params.size();
    if (grads.size() != n) {
        throw ShapeError("adam_step: gradient length " + std::to_string(grads.size()) + " != parameter length " +
                         std::to_string(n));
    }
    if (state.m.empty() && state.v.empty() && state.step == 0) {
        state.m.assign(n, 0.0);
        state.v.assign(n, 0.0);
    }
    if (state.m.size() != n || state.v.size() != n) throw ShapeError("adam_step: moment arrays do not match parameters");
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(grads[i])) {
            throw NumericError("non-finite gradient (" + std::to_string(grads[i]) + ") for " +
                               ParamVector::describe(i));
        }
    }

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    double rates[kParamsPerGaussian];
    for (std::size_t s = 0; s < kParamsPerGaussian; ++s) rates[s] = cfg.rate_for(field_of_slot(s));

    bool rotation_touched = false;
    for (std::size_t i = 0; i < n; ++i) {
        const double g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        const double delta = rates[i % kParamsPerGaussian] * m_hat / (std::sqrt(v_hat) + cfg.eps);
        if (delta != 0.0) {
            params.values[i] -= delta;
            if (field_of_slot(i % kParamsPerGaussian) == Field::rotation) rotation_touched = true;
        }
    }
    if (!rotation_touched) return;

    const std::size_t r0 = field_offset(Field::rotation);
    for (std::size_t g = 0; g < params.gaussian_count(); ++g) {
        double* q = &params.values[g * kParamsPerGaussian + r0];
        const double norm = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
        if (!(norm > 0.0)) throw NumericError("degenerate quaternion after update for gaussian " + std::to_string(g));
        if (std::abs(norm - 1.0) <= 1e-15) continue;
        for (int k = 0; k < 4; ++k) q[k] /= norm;
    }
}

}  // namespace msplat
