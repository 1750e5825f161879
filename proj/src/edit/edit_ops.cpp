#include "edit/edit_ops.hpp"

namespace sg {

namespace {

    void check_length(const Scene& scene, const Mask3D& mask) {
        if (mask.soft.size() != scene.gaussians.size()) {
            throw DimensionError("mask length " + std::to_string(mask.soft.size()) +
                                 " does not match Gaussian count " +
                                 std::to_string(scene.gaussians.size()));
        }
    }

} // namespace

EditResult remove_object(const Scene& scene, const Mask3D& mask) {
    check_length(scene, mask);
    const std::vector<uint8_t> hard = mask.hard();
    EditResult result;
    result.scene.cameras = scene.cameras;
    result.scene.num_instances = scene.num_instances;
    result.scene.gaussians.reserve(scene.gaussians.size());
    for (size_t i = 0; i < scene.gaussians.size(); ++i) {
        if (hard[i]) {
            ++result.affected;
        } else {
            result.scene.gaussians.push_back(scene.gaussians[i]);
        }
    }
    if (result.affected == 0) {
        result.warned = true;
    }
    return result;
}

EditResult recolor_object(const Scene& scene, const Mask3D& mask, const Eigen::Matrix3f& matrix,
                          const Eigen::Vector3f& offset) {
    check_length(scene, mask);
    const std::vector<uint8_t> hard = mask.hard();
    EditResult result;
    result.scene = scene;
    for (size_t i = 0; i < scene.gaussians.size(); ++i) {
        if (!hard[i]) {
            continue;
        }
        Eigen::Vector3f c = matrix * scene.gaussians[i].color + offset;
        result.scene.gaussians[i].color = c.cwiseMax(0.0f).cwiseMin(1.0f);
        ++result.affected;
    }
    if (result.affected == 0) {
        result.warned = true;
    }
    return result;
}

} // namespace sg
