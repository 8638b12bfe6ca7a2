// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace msplat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat23 = Eigen::Matrix<double, 2, 3>;

/// Rotation quaternion stored as (w, x, y, z).
struct Quat {
    double w = 1.0;
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    double norm() const;
    Quat normalized() const;
    Vec4 as_vector() const { return {w, x, y, z}; }

    static Quat from_axis_angle(const Vec3& axis, double angle);
    friend Quat operator*(const Quat& a, const Quat& b);
    friend bool operator==(const Quat&, const Quat&) = default;
};

/// Rotation matrix of q / |q|.
Mat3 rotation_matrix(const Quat& q);

double sigmoid(double x);
double logit(double p);

/// One anisotropic scene primitive. Scale, color and opacity are stored in
/// unconstrained form and mapped on access.
struct Gaussian3D {
    Vec3 center = Vec3::Zero();
    Quat rotation;
    Vec3 log_scale = Vec3::Zero();
    Vec3 color_logit = Vec3::Zero();
    double opacity_logit = 0.0;

    Vec3 scale() const { return log_scale.array().exp(); }
    Vec3 color() const;
    double opacity() const { return sigmoid(opacity_logit); }

    bool operator==(const Gaussian3D&) const = default;
};

/// Sigma = R S S^T R^T with S = diag(exp(log_scale)).
Mat3 covariance_of(const Gaussian3D& g);

/// Rigidly rotates a Gaussian about the world origin.
Gaussian3D rotated(const Gaussian3D& g, const Quat& q);

struct CameraModel {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 2;
    int height = 2;
    double near_clip = 0.01;

    /// Throws ValidationError when the invariants do not hold.
    void validate() const;

    /// Pinhole camera at the origin looking down +z with principal point at
    /// the image center.
    static CameraModel looking_down_z(int width, int height, double focal);
};

struct Scene {
    std::vector<Gaussian3D> gaussians;
    Vec3 background = Vec3::Zero();

    void validate() const;
    bool operator==(const Scene&) const = default;
};

enum class Field { center, rotation, log_scale, color, opacity };

inline constexpr std::size_t kParamsPerGaussian = 14;

std::size_t field_offset(Field f);
std::size_t field_width(Field f);
std::string_view field_name(Field f);
/// Field that owns slot `slot` in [0, kParamsPerGaussian).
Field field_of_slot(std::size_t slot);

/// Flat trainable parameters: gaussian g occupies
/// [g * kParamsPerGaussian, (g + 1) * kParamsPerGaussian) in the order
/// center(3) rotation(4: w x y z) log_scale(3) color_logit(3) opacity_logit(1).
struct ParamVector {
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    std::size_t gaussian_count() const { return values.size() / kParamsPerGaussian; }
    static std::size_t index(std::size_t gaussian, Field f, std::size_t component = 0) {
        return gaussian * kParamsPerGaussian + field_offset(f) + component;
    }
    /// Human-readable name of a flat index, e.g. "gaussian 3 log_scale[1]".
    static std::string describe(std::size_t flat_index);
};

ParamVector pack_params(const Scene& scene);
/// Applies `params` to a copy of `topology`; quaternions are re-normalized.
/// Throws TopologyError on length mismatch.
Scene unpack_params(const ParamVector& params, const Scene& topology);

// Text formats.
std::string format_scene(const Scene& scene);
Scene parse_scene(std::string_view text);
Scene load_scene(const std::filesystem::path& path);
void save_scene(const Scene& scene, const std::filesystem::path& path);

std::string format_camera(const CameraModel& cam);
CameraModel parse_camera(std::string_view text);
CameraModel load_camera(const std::filesystem::path& path);
void save_camera(const CameraModel& cam, const std::filesystem::path& path);

}  // namespace msplat
