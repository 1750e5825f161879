#include "render/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <thread>

namespace sg {

namespace {

    // Splats past this accumulated transmittance contribute below test
    // tolerances and are skipped.
    constexpr double kEarlyExitTransmittance = 1e-4;
    constexpr float kBlurFloorPx2 = 0.3f;
    constexpr double kMahalanobisCutoff = 9.0; // 3-sigma ellipse

    void run_rows(int height, int threads, const std::function<void(int, int)>& body) {
        if (threads <= 1 || height <= 1) {
            body(0, height);
            return;
        }
        const int n = std::min(threads, height);
        const int chunk = (height + n - 1) / n;
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(n));
        for (int w = 0; w < n; ++w) {
            const int r0 = w * chunk;
            const int r1 = std::min(height, r0 + chunk);
            if (r0 >= r1) {
                break;
            }
            pool.emplace_back(body, r0, r1);
        }
        for (std::thread& t : pool) {
            t.join();
        }
    }

} // namespace

std::vector<Splat2D> project(const Scene& scene, const Camera& camera) {
    const Eigen::Matrix3f rot = camera.rotation();
    const Eigen::Vector3f trans = camera.translation();

    std::vector<Splat2D> splats;
    splats.reserve(scene.gaussians.size());
    for (size_t i = 0; i < scene.gaussians.size(); ++i) {
        const Gaussian& g = scene.gaussians[i];
        const Eigen::Vector3f p = rot * g.position + trans;
        if (p.z() <= camera.z_near) {
            continue;
        }
        const float z = p.z();
        const float inv_z = 1.0f / z;

        Splat2D s;
        s.mean2d = Eigen::Vector2f(camera.fx * p.x() * inv_z + camera.cx,
                                   camera.fy * p.y() * inv_z + camera.cy);
        s.depth = z;
        s.alpha_base = g.opacity();
        s.source_index = static_cast<uint32_t>(i);

        Eigen::Matrix<float, 2, 3> jac;
        jac << camera.fx * inv_z, 0.0f, -camera.fx * p.x() * inv_z * inv_z,
            0.0f, camera.fy * inv_z, -camera.fy * p.y() * inv_z * inv_z;
        const Eigen::Matrix<float, 2, 3> m = jac * rot;
        s.cov2d = m * g.covariance() * m.transpose();
        s.cov2d(0, 0) += kBlurFloorPx2;
        s.cov2d(1, 1) += kBlurFloorPx2;

        const float det = s.cov2d(0, 0) * s.cov2d(1, 1) - s.cov2d(0, 1) * s.cov2d(1, 0);
        if (!(det > 0.0f) || !s.cov2d.allFinite()) {
            throw NumericError("singular 2D covariance for Gaussian " + std::to_string(i));
        }
        s.cov2d_inv << s.cov2d(1, 1) / det, -s.cov2d(0, 1) / det, -s.cov2d(1, 0) / det,
            s.cov2d(0, 0) / det;

        // 3-sigma bounding box from the largest eigenvalue.
        const float mid = 0.5f * (s.cov2d(0, 0) + s.cov2d(1, 1));
        const float half = 0.5f * (s.cov2d(0, 0) - s.cov2d(1, 1));
        const float disc = std::sqrt(half * half + s.cov2d(0, 1) * s.cov2d(0, 1));
        const float radius = 3.0f * std::sqrt(mid + disc);
        s.x0 = std::max(0, static_cast<int>(std::floor(s.mean2d.x() - radius)));
        s.x1 = std::min(camera.width, static_cast<int>(std::ceil(s.mean2d.x() + radius)) + 1);
        s.y0 = std::max(0, static_cast<int>(std::floor(s.mean2d.y() - radius)));
        s.y1 = std::min(camera.height, static_cast<int>(std::ceil(s.mean2d.y() + radius)) + 1);
        if (s.x0 >= s.x1 || s.y0 >= s.y1) {
            continue; // entirely off-screen
        }
        splats.push_back(s);
    }
    std::sort(splats.begin(), splats.end(), [](const Splat2D& a, const Splat2D& b) {
        if (a.depth != b.depth) {
            return a.depth < b.depth;
        }
        return a.source_index < b.source_index;
    });
    return splats;
}

ChannelRender composite_channels(const Scene& scene, const Camera& camera, int channels,
                                 const float* payload_base, size_t payload_stride,
                                 const RenderOptions& opts) {
    const std::vector<Splat2D> splats = project(scene, camera);
    const int width = camera.width;
    const int height = camera.height;
    const size_t num_px = static_cast<size_t>(width) * height;

    ChannelRender out;
    out.width = width;
    out.height = height;
    out.channels = channels;
    out.data.assign(num_px * channels, 0.0f);
    out.coverage.assign(num_px, 0.0f);
    if (opts.keep_contributions) {
        out.contribs.emplace();
        out.contribs->width = width;
        out.contribs->height = height;
        out.contribs->pixels.resize(num_px);
    }

    std::vector<double> accum(num_px * channels, 0.0);
    std::vector<double> cover(num_px, 0.0);
    std::vector<double> transmittance(num_px, 1.0);

    auto body = [&](int row_begin, int row_end) {
        for (const Splat2D& s : splats) {
            const int ya = std::max(s.y0, row_begin);
            const int yb = std::min(s.y1, row_end);
            const double ia = s.cov2d_inv(0, 0);
            const double ib = s.cov2d_inv(0, 1);
            const double ic = s.cov2d_inv(1, 1);
            const float* payload =
                channels > 0 ? payload_base + payload_stride * s.source_index : nullptr;
            for (int y = ya; y < yb; ++y) {
                const double dy = (y + 0.5) - s.mean2d.y();
                size_t idx = static_cast<size_t>(y) * width + s.x0;
                for (int x = s.x0; x < s.x1; ++x, ++idx) {
                    double& t = transmittance[idx];
                    if (t < kEarlyExitTransmittance) {
                        continue;
                    }
                    const double dx = (x + 0.5) - s.mean2d.x();
                    const double md = ia * dx * dx + 2.0 * ib * dx * dy + ic * dy * dy;
                    if (md > kMahalanobisCutoff) {
                        continue;
                    }
                    const double alpha = static_cast<double>(s.alpha_base) * std::exp(-0.5 * md);
                    const double w = alpha * t;
                    for (int c = 0; c < channels; ++c) {
                        accum[idx * channels + c] += w * payload[c];
                    }
                    cover[idx] += w;
                    t *= (1.0 - alpha);
                    if (out.contribs) {
                        out.contribs->pixels[idx].push_back(
                            {s.source_index, static_cast<float>(w)});
                    }
                }
            }
        }
    };
    run_rows(height, opts.threads, body);

    for (size_t i = 0; i < num_px; ++i) {
        out.coverage[i] = static_cast<float>(cover[i]);
        for (int c = 0; c < channels; ++c) {
            out.data[i * channels + c] = static_cast<float>(accum[i * channels + c]);
        }
    }
    return out;
}

ChannelRender render_feature_map(const Scene& scene, const Camera& camera,
                                 const RenderOptions& opts) {
    const int dim = scene.feature_dim();
    if (dim == 0) {
        throw DimensionError("scene has no instance features to render");
    }
    std::vector<float> packed(scene.gaussians.size() * static_cast<size_t>(dim));
    for (size_t i = 0; i < scene.gaussians.size(); ++i) {
        const Eigen::VectorXf& f = scene.gaussians[i].feature;
        if (static_cast<int>(f.size()) != dim) {
            throw DimensionError("Gaussian " + std::to_string(i) +
                                 " has inconsistent feature dimension");
        }
        std::copy(f.data(), f.data() + dim, packed.begin() + static_cast<long>(i) * dim);
    }
    return composite_channels(scene, camera, dim, packed.data(), static_cast<size_t>(dim), opts);
}

ImageRGB render_rgb(const Scene& scene, const Camera& camera, const RenderOptions& opts) {
    std::vector<float> packed(scene.gaussians.size() * 3);
    for (size_t i = 0; i < scene.gaussians.size(); ++i) {
        const Eigen::Vector3f& c = scene.gaussians[i].color;
        packed[i * 3 + 0] = c.x();
        packed[i * 3 + 1] = c.y();
        packed[i * 3 + 2] = c.z();
    }
    RenderOptions o = opts;
    o.keep_contributions = false;
    const ChannelRender r = composite_channels(scene, camera, 3, packed.data(), 3, o);
    ImageRGB img(camera.width, camera.height);
    img.data = r.data;
    return img;
}

IdentityMap render_identity_map(const Scene& scene, const Camera& camera,
                                const Classifier& classifier, const RenderOptions& opts) {
    if (classifier.feature_dim() != scene.feature_dim()) {
        throw DimensionError("classifier feature dimension " +
                             std::to_string(classifier.feature_dim()) +
                             " does not match scene dimension " +
                             std::to_string(scene.feature_dim()));
    }
    if (scene.num_instances > 0 && classifier.num_instances() != scene.num_instances) {
        throw DimensionError("classifier has K=" + std::to_string(classifier.num_instances()) +
                             " but scene expects K=" + std::to_string(scene.num_instances));
    }
    RenderOptions o = opts;
    o.keep_contributions = false;
    const ChannelRender fm = render_feature_map(scene, camera, o);

    IdentityMap map(camera.width, camera.height);
    const int num_classes = classifier.num_classes();
    const size_t num_px = fm.coverage.size();
    Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        features(fm.data.data(), static_cast<long>(num_px), fm.channels);
    const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> logits =
        (features * classifier.weights.transpose()).rowwise() + classifier.bias.transpose();
    for (size_t i = 0; i < num_px; ++i) {
        if (fm.coverage[i] < 0.5f) {
            map.ids[i] = kBackgroundId;
            continue;
        }
        int best = 0;
        for (int k = 1; k < num_classes; ++k) {
            if (logits(static_cast<long>(i), k) > logits(static_cast<long>(i), best)) {
                best = k;
            }
        }
        map.ids[i] = best;
    }
    return map;
}

SoftMaskRender render_soft_mask(const Scene& scene, const Camera& camera,
                                std::span<const float> membership, const RenderOptions& opts) {
    if (membership.size() != scene.gaussians.size()) {
        throw DimensionError("membership length " + std::to_string(membership.size()) +
                             " does not match Gaussian count " +
                             std::to_string(scene.gaussians.size()));
    }
    RenderOptions o = opts;
    o.keep_contributions = true;
    ChannelRender r = composite_channels(scene, camera, 1, membership.data(), 1, o);
    SoftMaskRender out;
    out.width = r.width;
    out.height = r.height;
    out.values = std::move(r.data);
    out.coverage = std::move(r.coverage);
    out.contribs = std::move(*r.contribs);
    return out;
}

MaskLossGrad backprop_mask_l1(const SoftMaskRender& rendered, const Mask2D& target,
                              std::span<const float> logits, int threads) {
    if (rendered.width != target.width || rendered.height != target.height) {
        throw DimensionError("rendered mask " + std::to_string(rendered.width) + "x" +
                             std::to_string(rendered.height) + " vs target " +
                             std::to_string(target.width) + "x" + std::to_string(target.height));
    }
    const size_t num_gaussians = logits.size();
    const size_t num_px = rendered.values.size();
    const double inv_px = 1.0 / static_cast<double>(num_px);

    const int height = rendered.height;
    const int width = rendered.width;
    const int n_workers = std::max(1, std::min(threads, height));
    std::vector<std::vector<double>> grad_parts(static_cast<size_t>(n_workers));
    std::vector<double> row_loss(static_cast<size_t>(height), 0.0);

    const int chunk = (height + n_workers - 1) / n_workers;
    auto body = [&](int worker) {
        std::vector<double>& grad = grad_parts[static_cast<size_t>(worker)];
        grad.assign(num_gaussians, 0.0);
        const int r0 = worker * chunk;
        const int r1 = std::min(height, r0 + chunk);
        for (int y = r0; y < r1; ++y) {
            double loss = 0.0;
            for (int x = 0; x < width; ++x) {
                const size_t idx = static_cast<size_t>(y) * width + x;
                const double diff =
                    static_cast<double>(rendered.values[idx]) - (target.bits[idx] ? 1.0 : 0.0);
                loss += std::abs(diff);
                if (diff == 0.0) {
                    continue; // sign(0) = 0
                }
                const double sign = diff > 0.0 ? 1.0 : -1.0;
                for (const PixelContrib& c : rendered.contribs.pixels[idx]) {
                    grad[c.gaussian] += sign * static_cast<double>(c.weight);
                }
            }
            row_loss[static_cast<size_t>(y)] = loss;
        }
    };
    if (n_workers == 1) {
        body(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(n_workers));
        for (int w = 0; w < n_workers; ++w) {
            pool.emplace_back(body, w);
        }
        for (std::thread& t : pool) {
            t.join();
        }
    }

    MaskLossGrad out;
    double loss = 0.0;
    for (double l : row_loss) {
        loss += l;
    }
    out.loss = loss * inv_px;
    out.d_membership.assign(num_gaussians, 0.0f);
    out.d_logit.assign(num_gaussians, 0.0f);
    for (size_t i = 0; i < num_gaussians; ++i) {
        double g = 0.0;
        for (const auto& part : grad_parts) {
            g += part[i];
        }
        g *= inv_px;
        out.d_membership[i] = static_cast<float>(g);
        const double m = 1.0 / (1.0 + std::exp(-static_cast<double>(logits[i])));
        out.d_logit[i] = static_cast<float>(g * m * (1.0 - m));
    }
    return out;
}

ContributionImage render_contributions(const Scene& scene, const Camera& camera,
                                       const RenderOptions& opts) {
    RenderOptions o = opts;
    o.keep_contributions = true;
    ChannelRender r = composite_channels(scene, camera, 0, nullptr, 0, o);
    return std::move(*r.contribs);
}

} // namespace sg
