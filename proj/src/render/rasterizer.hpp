#pragma once

#include <optional>
#include <span>

#include "core/image.hpp"
#include "core/types.hpp"
#include "field/classifier.hpp"

namespace sg {

// A Gaussian projected into one camera's image plane.
struct Splat2D {
    Eigen::Vector2f mean2d;      // pixels
    Eigen::Matrix2f cov2d;       // pixels^2, blur floor included
    Eigen::Matrix2f cov2d_inv;
    float depth = 0.0f;          // camera-space z
    float alpha_base = 0.0f;     // < 1
    uint32_t source_index = 0;   // index into Scene::gaussians
    // Pixel bounding box of the 3-sigma ellipse, [x0,x1) x [y0,y1).
    int x0 = 0, x1 = 0, y0 = 0, y1 = 0;
};

// Projects all Gaussians into `camera`, culling splats with camera-space
// z <= z_near. The result is sorted by ascending depth. cov2d is the EWA
// projection J W Sigma W^T J^T plus a 0.3 px^2 blur floor on the diagonal.
std::vector<Splat2D> project(const Scene& scene, const Camera& camera);

// Per-pixel compositing weights, kept when a render is run in gradient mode.
struct PixelContrib {
    uint32_t gaussian;
    float weight; // alpha_i * prod_{j<i} (1 - alpha_j)
};

struct ContributionImage {
    int width = 0;
    int height = 0;
    std::vector<std::vector<PixelContrib>> pixels; // row-major

    const std::vector<PixelContrib>& at(int x, int y) const {
        return pixels[static_cast<size_t>(y) * width + x];
    }
};

struct RenderOptions {
    int threads = 1;
    bool keep_contributions = false;
};

// Multi-channel alpha-composited render: out[p] = sum_i payload_i * weight_i
// over depth-sorted splats. `coverage` holds sum_i weight_i per pixel.
struct ChannelRender {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<float> data;     // H*W*C
    std::vector<float> coverage; // H*W
    std::optional<ContributionImage> contribs;

    const float* at(int x, int y) const {
        return data.data() + (static_cast<size_t>(y) * width + x) * channels;
    }
};

// Composites an arbitrary per-Gaussian payload. `payload(i)` must return a
// pointer to `channels` floats for Gaussian i; it is called per contribution.
ChannelRender composite_channels(const Scene& scene, const Camera& camera, int channels,
                                 const float* payload_base, size_t payload_stride,
                                 const RenderOptions& opts = {});

// Alpha-composited feature map (uses each Gaussian's instance feature).
ChannelRender render_feature_map(const Scene& scene, const Camera& camera,
                                 const RenderOptions& opts = {});

// Alpha-composited RGB over a black background.
ImageRGB render_rgb(const Scene& scene, const Camera& camera, const RenderOptions& opts = {});

// Per-pixel argmax of classifier logits on the rendered feature map. Pixels
// whose accumulated weight is below 0.5 are forced to background 0; ties
// break to the smaller class index.
IdentityMap render_identity_map(const Scene& scene, const Camera& camera,
                                const Classifier& classifier, const RenderOptions& opts = {});

// Soft 3D-mask render: per pixel sum_i m_i * weight_i for membership values
// m in [0,1]. Contribution records are always kept so gradients can be
// computed against a 2D target.
struct SoftMaskRender {
    int width = 0;
    int height = 0;
    std::vector<float> values;   // H*W
    std::vector<float> coverage; // H*W
    ContributionImage contribs;

    float at(int x, int y) const { return values[static_cast<size_t>(y) * width + x]; }
};

SoftMaskRender render_soft_mask(const Scene& scene, const Camera& camera,
                                std::span<const float> membership,
                                const RenderOptions& opts = {});

// L1 loss between a rendered soft mask and a binary target, with the exact
// gradient with respect to per-Gaussian membership logits:
//   L        = mean_p |M(p) - target(p)|
//   dL/dm_i  = sum_p sign(M(p) - target(p)) * weight_i(p) / (H*W)
//   dL/dl_i  = dL/dm_i * m_i * (1 - m_i)        (m_i = sigmoid(l_i))
// sign(0) is 0, so converged states are stationary.
struct MaskLossGrad {
    double loss = 0.0;
    std::vector<float> d_membership; // dL/dm_i, per Gaussian
    std::vector<float> d_logit;      // dL/dl_i, per Gaussian
};

MaskLossGrad backprop_mask_l1(const SoftMaskRender& rendered, const Mask2D& target,
                              std::span<const float> logits, int threads = 1);

// Records-only render (no payload); used for mask association.
ContributionImage render_contributions(const Scene& scene, const Camera& camera,
                                       const RenderOptions& opts = {});

inline float sigmoidf(float x) { return 1.0f / (1.0f + std::exp(-x)); }

} // namespace sg
