#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "util/errors.hpp"

namespace sg {

// One anisotropic splat primitive plus its learned instance feature.
// Scale is stored as log standard deviations and opacity as a logit so
// optimizers can work on unconstrained parameters; accessors expose the
// constrained values.
struct Gaussian {
    Eigen::Vector3f position = Eigen::Vector3f::Zero();
    Eigen::Vector3f log_scale = Eigen::Vector3f::Zero();
    Eigen::Quaternionf rotation = Eigen::Quaternionf::Identity(); // unit norm
    float opacity_logit = 0.0f;
    Eigen::Vector3f color = Eigen::Vector3f::Zero(); // RGB in [0,1]
    Eigen::VectorXf feature;                         // D-dim instance feature

    Eigen::Vector3f scale() const { return log_scale.array().exp(); }
    float opacity() const { return 1.0f / (1.0f + std::exp(-opacity_logit)); }

    void set_scale(const Eigen::Vector3f& s) { log_scale = s.array().log(); }
    void set_opacity(float o);

    // World-space covariance R S S^T R^T from (scale, rotation).
    Eigen::Matrix3f covariance() const;
};

// Pinhole camera with a world-to-camera rigid transform.
struct Camera {
    int id = 0;
    int width = 0;
    int height = 0;
    float fx = 0.0f, fy = 0.0f;
    float cx = 0.0f, cy = 0.0f;
    Eigen::Matrix4f world_to_camera = Eigen::Matrix4f::Identity();
    float z_near = 0.01f;

    Eigen::Matrix3f rotation() const { return world_to_camera.topLeftCorner<3, 3>(); }
    Eigen::Vector3f translation() const { return world_to_camera.topRightCorner<3, 1>(); }
    // Camera center in world coordinates.
    Eigen::Vector3f center() const { return -rotation().transpose() * translation(); }
    // World-space viewing direction (camera +z axis).
    Eigen::Vector3f forward() const { return rotation().row(2).transpose(); }

    // Throws ConfigError on invalid intrinsics or a non-rigid pose.
    void validate() const;
};

constexpr int kBackgroundId = 0;

struct Scene {
    std::vector<Gaussian> gaussians;
    std::vector<Camera> cameras;
    // Number of instances K after field training; 0 means untrained.
    int num_instances = 0;

    int feature_dim() const {
        return gaussians.empty() ? 0 : static_cast<int>(gaussians.front().feature.size());
    }
    const Camera& camera_by_id(int id) const;
    bool has_camera(int id) const;
};

// Binary per-pixel mask.
struct Mask2D {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> bits; // row-major, 0 or 1

    Mask2D() = default;
    Mask2D(int w, int h) : width(w), height(h), bits(static_cast<size_t>(w) * h, 0) {}

    uint8_t at(int x, int y) const { return bits[static_cast<size_t>(y) * width + x]; }
    void set(int x, int y, uint8_t v) { bits[static_cast<size_t>(y) * width + x] = v; }
    long area() const;
    bool same_shape(const Mask2D& other) const {
        return width == other.width && height == other.height;
    }
};

// Per-pixel integer instance IDs; 0 is background.
struct IdentityMap {
    int width = 0;
    int height = 0;
    std::vector<int32_t> ids; // row-major

    IdentityMap() = default;
    IdentityMap(int w, int h) : width(w), height(h), ids(static_cast<size_t>(w) * h, 0) {}

    int32_t at(int x, int y) const { return ids[static_cast<size_t>(y) * width + x]; }
    void set(int x, int y, int32_t v) { ids[static_cast<size_t>(y) * width + x] = v; }
    int32_t max_id() const;
    // Pixels carrying `id`.
    long count_id(int32_t id) const;
    Mask2D mask_for(int32_t id) const;
};

// Per-Gaussian soft membership with a hard threshold view.
struct Mask3D {
    std::vector<float> soft; // in [0,1], one entry per Gaussian
    float threshold = 0.5f;

    std::vector<uint8_t> hard() const;
    long hard_count() const;
};

} // namespace sg
