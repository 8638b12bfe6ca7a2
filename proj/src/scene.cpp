// SPDX-License-Identifier: Apache-2.0
#include "msplat/scene.hpp"

#include "msplat/errors.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>

namespace msplat {

double Quat::norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

Quat Quat::normalized() const {
    const double n = norm();
    if (n == 0.0) {
        return Quat{};
    }
    return {w / n, x / n, y / n, z / n};
}

Quat Quat::from_axis_angle(const Vec3& axis, double angle) {
    const Vec3 a = axis.normalized();
    const double s = std::sin(0.5 * angle);
    return {std::cos(0.5 * angle), a.x() * s, a.y() * s, a.z() * s};
}

Quat operator*(const Quat& a, const Quat& b) {
    return {
        a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
        a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
        a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
    };
}

Mat3 rotation_matrix(const Quat& q_raw) {
    const Quat q = q_raw.normalized();
    const double w = q.w, x = q.x, y = q.y, z = q.z;
    Mat3 r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

double sigmoid(double x) {
    if (x >= 0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

Vec3 Gaussian3D::color() const {
    return {sigmoid(color_logit.x()), sigmoid(color_logit.y()), sigmoid(color_logit.z())};
}

Mat3 covariance_of(const Gaussian3D& g) {
    const Mat3 m = rotation_matrix(g.rotation) * g.scale().asDiagonal();
    return m * m.transpose();
}

Gaussian3D rotated(const Gaussian3D& g, const Quat& q) {
    Gaussian3D out = g;
    out.center = rotation_matrix(q) * g.center;
    out.rotation = (q.normalized() * g.rotation).normalized();
    return out;
}

void CameraModel::validate() const {
    if (!rotation.allFinite() || !translation.allFinite()) {
        throw ValidationError("camera pose has non-finite entries");
    }
    const double orth = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (orth > 1e-9) {
        throw ValidationError("camera rotation is not orthonormal (deviation " + std::to_string(orth) + ")");
    }
    if (!(fx > 0 && fy > 0 && near_clip > 0) || !std::isfinite(cx) || !std::isfinite(cy)) {
        throw ValidationError("camera intrinsics must satisfy fx, fy, near_clip > 0");
    }
    if (width < 2 || height < 2) {
        throw ValidationError("camera image must be at least 2x2");
    }
}

CameraModel CameraModel::looking_down_z(int width, int height, double focal) {
    CameraModel cam;
    cam.fx = focal;
    cam.fy = focal;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    cam.width = width;
    cam.height = height;
    cam.near_clip = 0.1;
    return cam;
}

void Scene::validate() const {
    if (gaussians.empty()) {
        throw ValidationError("scene has no gaussians");
    }
    if (!background.allFinite() || background.minCoeff() < 0.0 || background.maxCoeff() > 1.0) {
        throw ValidationError("background must lie in [0,1]^3");
    }
    for (std::size_t i = 0; i < gaussians.size(); ++i) {
        const auto& g = gaussians[i];
        const bool finite = g.center.allFinite() && g.log_scale.allFinite() && g.color_logit.allFinite() &&
                            std::isfinite(g.opacity_logit) && std::isfinite(g.rotation.norm());
        if (!finite) {
            throw ValidationError("gaussian " + std::to_string(i) + " has non-finite fields");
        }
        if (g.rotation.norm() == 0.0) {
            throw ValidationError("gaussian " + std::to_string(i) + " has a zero quaternion");
        }
    }
}

namespace {

constexpr std::array<std::size_t, 5> kOffsets{0, 3, 7, 10, 13};
constexpr std::array<std::size_t, 5> kWidths{3, 4, 3, 3, 1};

}  // namespace

std::size_t field_offset(Field f) { return kOffsets[static_cast<std::size_t>(f)]; }
std::size_t field_width(Field f) { return kWidths[static_cast<std::size_t>(f)]; }

std::string_view field_name(Field f) {
    switch (f) {
        case Field::center: return "center";
        case Field::rotation: return "rotation";
        case Field::log_scale: return "log_scale";
        case Field::color: return "color";
        case Field::opacity: return "opacity";
    }
    return "?";
}

Field field_of_slot(std::size_t slot) {
    if (slot < 3) return Field::center;
    if (slot < 7) return Field::rotation;
    if (slot < 10) return Field::log_scale;
    if (slot < 13) return Field::color;
    return Field::opacity;
}

std::string ParamVector::describe(std::size_t flat_index) {
    const std::size_t g = flat_index / kParamsPerGaussian;
    const std::size_t slot = flat_index % kParamsPerGaussian;
    const Field f = field_of_slot(slot);
    std::string out = "gaussian " + std::to_string(g) + " " + std::string(field_name(f));
    if (field_width(f) > 1) {
        out += "[" + std::to_string(slot - field_offset(f)) + "]";
    }
    return out;
}

ParamVector pack_params(const Scene& scene) {
    ParamVector p;
    p.values.reserve(scene.gaussians.size() * kParamsPerGaussian);
    for (const auto& g : scene.gaussians) {
        p.values.insert(p.values.end(), {g.center.x(), g.center.y(), g.center.z(), g.rotation.w, g.rotation.x,
                                         g.rotation.y, g.rotation.z, g.log_scale.x(), g.log_scale.y(),
                                         g.log_scale.z(), g.color_logit.x(), g.color_logit.y(), g.color_logit.z(),
                                         g.opacity_logit});
    }
    return p;
}

Scene unpack_params(const ParamVector& params, const Scene& topology) {
    if (params.size() != topology.gaussians.size() * kParamsPerGaussian) {
        throw TopologyError("parameter vector has " + std::to_string(params.size()) + " entries, scene needs " +
                            std::to_string(topology.gaussians.size() * kParamsPerGaussian));
    }
    Scene out = topology;
    const double* v = params.values.data();
    for (auto& g : out.gaussians) {
        g.center = {v[0], v[1], v[2]};
        const Quat q{v[3], v[4], v[5], v[6]};
        // Exact unit quaternions pass through untouched so the round trip stays bit-exact.
        g.rotation = std::abs(q.norm() - 1.0) <= 1e-15 ? q : q.normalized();
        g.log_scale = {v[7], v[8], v[9]};
        g.color_logit = {v[10], v[11], v[12]};
        g.opacity_logit = v[13];
        v += kParamsPerGaussian;
    }
    return out;
}

}  // namespace msplat
