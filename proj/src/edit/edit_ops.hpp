#pragma once

#include "core/types.hpp"

namespace sg {

// Deletes the Gaussians selected by the hard mask. The camera list is kept.
// An empty hard mask is a no-op (with `warned` set on the result).
struct EditResult {
    Scene scene;
    bool warned = false; // empty-mask no-op
    long affected = 0;
};

EditResult remove_object(const Scene& scene, const Mask3D& mask);

// Affine color transform on masked Gaussians: c <- clamp(matrix*c + offset).
// Unmasked Gaussians and every non-color field stay bit-identical.
EditResult recolor_object(const Scene& scene, const Mask3D& mask, const Eigen::Matrix3f& matrix,
                          const Eigen::Vector3f& offset);

} // namespace sg
