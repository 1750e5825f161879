#include "core/types.hpp"

#include <algorithm>
#include <cmath>

namespace sg {

void Gaussian::set_opacity(float o) {
    const float clamped = std::clamp(o, 1e-6f, 1.0f - 1e-6f);
    opacity_logit = std::log(clamped / (1.0f - clamped));
}

Eigen::Matrix3f Gaussian::covariance() const {
    const Eigen::Matrix3f r = rotation.toRotationMatrix();
    const Eigen::Vector3f s = scale();
    const Eigen::Matrix3f m = r * s.asDiagonal();
    return m * m.transpose();
}

void Camera::validate() const {
    if (width <= 0 || height <= 0) {
        throw ConfigError("camera " + std::to_string(id) + ": non-positive image size");
    }
    if (!(fx > 0.0f) || !(fy > 0.0f)) {
        throw ConfigError("camera " + std::to_string(id) + ": fx/fy must be positive");
    }
    if (cx < 0.0f || cx >= static_cast<float>(width) || cy < 0.0f ||
        cy >= static_cast<float>(height)) {
        throw ConfigError("camera " + std::to_string(id) + ": principal point outside image");
    }
    const Eigen::Matrix3f r = rotation();
    const float ortho = (r * r.transpose() - Eigen::Matrix3f::Identity()).cwiseAbs().maxCoeff();
    if (ortho > 1e-5f) {
        throw ConfigError("camera " + std::to_string(id) +
                          ": world_to_camera rotation not orthonormal (max deviation " +
                          std::to_string(ortho) + ")");
    }
    if (r.determinant() < 0.0f) {
        throw ConfigError("camera " + std::to_string(id) + ": rotation has negative determinant");
    }
    const Eigen::Vector4f bottom = world_to_camera.row(3).transpose();
    if ((bottom - Eigen::Vector4f(0, 0, 0, 1)).cwiseAbs().maxCoeff() > 1e-5f) {
        throw ConfigError("camera " + std::to_string(id) + ": last transform row must be 0 0 0 1");
    }
    if (!(z_near > 0.0f)) {
        throw ConfigError("camera " + std::to_string(id) + ": z_near must be positive");
    }
}

const Camera& Scene::camera_by_id(int id) const {
    for (const Camera& c : cameras) {
        if (c.id == id) {
            return c;
        }
    }
    throw InputError("no camera with id " + std::to_string(id));
}

bool Scene::has_camera(int id) const {
    return std::any_of(cameras.begin(), cameras.end(),
                       [id](const Camera& c) { return c.id == id; });
}

long Mask2D::area() const {
    long n = 0;
    for (uint8_t b : bits) {
        n += b ? 1 : 0;
    }
    return n;
}

int32_t IdentityMap::max_id() const {
    int32_t m = 0;
    for (int32_t v : ids) {
        m = std::max(m, v);
    }
    return m;
}

long IdentityMap::count_id(int32_t id) const {
    long n = 0;
    for (int32_t v : ids) {
        if (v == id) {
            ++n;
        }
    }
    return n;
}

Mask2D IdentityMap::mask_for(int32_t id) const {
    Mask2D m(width, height);
    for (size_t i = 0; i < ids.size(); ++i) {
        m.bits[i] = (ids[i] == id) ? 1 : 0;
    }
    return m;
}

std::vector<uint8_t> Mask3D::hard() const {
    std::vector<uint8_t> h(soft.size());
    for (size_t i = 0; i < soft.size(); ++i) {
        h[i] = (soft[i] >= threshold) ? 1 : 0;
    }
    return h;
}

long Mask3D::hard_count() const {
    long n = 0;
    for (float v : soft) {
        if (v >= threshold) {
            ++n;
        }
    }
    return n;
}

} // namespace sg
