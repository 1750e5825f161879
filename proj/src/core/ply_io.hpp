#pragma once

#include <filesystem>

#include "core/types.hpp"

namespace sg {

// Reads Gaussians from a binary little-endian PLY file. Expected vertex
// properties (all float32, in order):
//   x y z scale_0 scale_1 scale_2 rot_0 rot_1 rot_2 rot_3 opacity
//   red green blue [feat_0 ... feat_{D-1}]
// scale_* are raw standard deviations, opacity is raw in [0,1] and rot_* is
// a (w,x,y,z) quaternion. Feature properties are optional; when absent every
// Gaussian gets a zero feature vector of `default_feature_dim`.
// Quaternions are normalized on load and opacity is clamped to
// [1e-6, 1-1e-6] before logit storage. Non-finite values are rejected.
std::vector<Gaussian> load_gaussian_ply(const std::filesystem::path& file,
                                        int default_feature_dim = 16);

// Writes the inverse format, always including feature properties. Throws
// InputError for an empty Gaussian list and IoError on unwritable paths.
void save_gaussian_ply(const std::filesystem::path& file,
                       const std::vector<Gaussian>& gaussians);

// Loads cameras from JSON:
//   { "cameras": [ { "id", "width", "height", "fx", "fy", "cx", "cy",
//                    "world_to_camera": [16 row-major floats] } ] }
std::vector<Camera> load_cameras_json(const std::filesystem::path& file);
void save_cameras_json(const std::filesystem::path& file, const std::vector<Camera>& cameras);

// Convenience wrapper combining both loaders into a validated Scene.
Scene load_scene(const std::filesystem::path& gaussian_file,
                 const std::filesystem::path& camera_file,
                 int default_feature_dim = 16);

// Binary Mask3D file: uint32 count, float32 threshold, count float32 values.
Mask3D load_mask3d(const std::filesystem::path& file);
void save_mask3d(const std::filesystem::path& file, const Mask3D& mask);

} // namespace sg
