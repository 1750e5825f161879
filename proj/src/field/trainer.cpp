#include "field/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "util/rng.hpp"

namespace sg {

void SupervisionSet::validate(const Scene& scene) const {
    for (const auto& [cam_id, map] : maps) {
        const Camera& cam = scene.camera_by_id(cam_id);
        if (map.width != cam.width || map.height != cam.height) {
            throw DimensionError("supervision map for camera " + std::to_string(cam_id) +
                                 " does not match camera dimensions");
        }
        if (map.max_id() > num_instances) {
            throw InputError("supervision map for camera " + std::to_string(cam_id) +
                             " contains id above K=" + std::to_string(num_instances));
        }
    }
}

namespace {

    double jaccard(const std::unordered_set<uint32_t>& a, const std::unordered_set<uint32_t>& b) {
        if (a.empty() || b.empty()) {
            return 0.0;
        }
        const auto& small = a.size() <= b.size() ? a : b;
        const auto& large = a.size() <= b.size() ? b : a;
        size_t inter = 0;
        for (uint32_t v : small) {
            inter += large.count(v);
        }
        const size_t uni = a.size() + b.size() - inter;
        return static_cast<double>(inter) / static_cast<double>(uni);
    }

} // namespace

SupervisionSet associate_masks(const Scene& scene, const std::vector<ViewMasks>& per_view,
                               const AssociateOptions& opts) {
    std::vector<const ViewMasks*> views;
    views.reserve(per_view.size());
    for (const ViewMasks& v : per_view) {
        views.push_back(&v);
    }
    std::sort(views.begin(), views.end(),
              [](const ViewMasks* a, const ViewMasks* b) { return a->camera_id < b->camera_id; });

    std::vector<std::unordered_set<uint32_t>> tracks;
    SupervisionSet out;

    for (const ViewMasks* view : views) {
        const Camera& cam = scene.camera_by_id(view->camera_id);
        // Disjointness check.
        Mask2D occupied(cam.width, cam.height);
        for (const Mask2D& m : view->masks) {
            if (m.width != cam.width || m.height != cam.height) {
                throw DimensionError("mask dimensions do not match camera " +
                                     std::to_string(view->camera_id));
            }
            for (size_t i = 0; i < m.bits.size(); ++i) {
                if (m.bits[i]) {
                    if (occupied.bits[i]) {
                        throw InputError("overlapping masks in view " +
                                         std::to_string(view->camera_id));
                    }
                    occupied.bits[i] = 1;
                }
            }
        }

        // Dominant Gaussian per pixel.
        const ContributionImage contribs =
            render_contributions(scene, cam, {.threads = opts.threads});
        const size_t num_px = contribs.pixels.size();
        std::vector<int64_t> dominant(num_px, -1);
        for (size_t i = 0; i < num_px; ++i) {
            float best_w = 0.0f;
            float total = 0.0f;
            for (const PixelContrib& c : contribs.pixels[i]) {
                total += c.weight;
                if (c.weight > best_w) {
                    best_w = c.weight;
                    dominant[i] = c.gaussian;
                }
            }
            if (total < 0.5f) {
                dominant[i] = -1;
            }
        }

        IdentityMap idmap(cam.width, cam.height);
        std::vector<bool> track_used(tracks.size(), false);
        for (const Mask2D& m : view->masks) {
            std::unordered_set<uint32_t> dominant_set;
            for (size_t i = 0; i < m.bits.size(); ++i) {
                if (m.bits[i] && dominant[i] >= 0) {
                    dominant_set.insert(static_cast<uint32_t>(dominant[i]));
                }
            }
            int assigned = -1;
            double best_j = 0.0;
            for (size_t t = 0; t < tracks.size(); ++t) {
                if (track_used[t]) {
                    continue;
                }
                const double j = jaccard(dominant_set, tracks[t]);
                if (j > best_j) {
                    best_j = j;
                    assigned = static_cast<int>(t);
                }
            }
            if (assigned >= 0 && best_j >= opts.merge_jaccard) {
                tracks[static_cast<size_t>(assigned)].insert(dominant_set.begin(),
                                                             dominant_set.end());
            } else {
                assigned = static_cast<int>(tracks.size());
                tracks.push_back(std::move(dominant_set));
                track_used.push_back(false);
            }
            track_used[static_cast<size_t>(assigned)] = true;
            const int32_t id = assigned + 1;
            for (size_t i = 0; i < m.bits.size(); ++i) {
                if (m.bits[i]) {
                    idmap.ids[i] = id;
                }
            }
        }
        out.maps.emplace(view->camera_id, std::move(idmap));
    }
    out.num_instances = static_cast<int>(tracks.size());
    return out;
}

TrainResult train_field(Scene& scene, const SupervisionSet& supervision,
                        const TrainOptions& opts) {
    if (supervision.num_instances < 1) {
        throw InputError("supervision defines no instances (K=0)");
    }
    if (supervision.maps.empty()) {
        throw InputError("supervision set is empty");
    }
    supervision.validate(scene);

    const int num_instances = supervision.num_instances;
    const int num_classes = num_instances + 1;
    const int dim = scene.feature_dim();
    if (dim == 0) {
        throw DimensionError("scene Gaussians carry no features");
    }

    TrainResult result;
    result.classifier = Classifier::zero(num_instances, dim);
    if (opts.steps == 0) {
        return result;
    }

    scene.num_instances = num_instances;
    Rng rng(opts.seed);
    for (Gaussian& g : scene.gaussians) {
        for (int d = 0; d < dim; ++d) {
            g.feature[d] = static_cast<float>(
                rng.uniform(-opts.feature_init_range, opts.feature_init_range));
        }
    }

    std::vector<int> view_order;
    view_order.reserve(supervision.maps.size());
    for (const auto& [cam_id, map] : supervision.maps) {
        view_order.push_back(cam_id);
    }
    rng.shuffle(view_order);

    const size_t num_gaussians = scene.gaussians.size();
    Eigen::MatrixXf& weights = result.classifier.weights;
    Eigen::VectorXf& bias = result.classifier.bias;
    Eigen::MatrixXf feature_grad(static_cast<long>(num_gaussians), dim);

    const RenderOptions render_opts{.threads = opts.threads, .keep_contributions = true};
    result.loss_history.reserve(static_cast<size_t>(opts.steps));
    for (int step = 0; step < opts.steps; ++step) {
        const int cam_id = view_order[static_cast<size_t>(step) % view_order.size()];
        const Camera& cam = scene.camera_by_id(cam_id);
        const IdentityMap& labels = supervision.maps.at(cam_id);

        const ChannelRender fm = render_feature_map(scene, cam, render_opts);
        const long num_px = static_cast<long>(fm.coverage.size());
        Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
            features(fm.data.data(), num_px, dim);

        // Per-pixel softmax cross-entropy, background down-weighted.
        Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> probs =
            (features * weights.transpose()).rowwise() + bias.transpose();
        double loss = 0.0;
        double weight_total = 0.0;
        for (long p = 0; p < num_px; ++p) {
            float max_logit = probs(p, 0);
            for (int k = 1; k < num_classes; ++k) {
                max_logit = std::max(max_logit, probs(p, k));
            }
            float denom = 0.0f;
            for (int k = 0; k < num_classes; ++k) {
                probs(p, k) = std::exp(probs(p, k) - max_logit);
                denom += probs(p, k);
            }
            const int label = labels.ids[static_cast<size_t>(p)];
            const float omega = label == kBackgroundId ? opts.background_weight : 1.0f;
            loss -= omega * std::log(static_cast<double>(probs(p, label)) / denom);
            weight_total += omega;
            // Convert in place to the CE gradient dL/dlogits (unnormalized).
            for (int k = 0; k < num_classes; ++k) {
                probs(p, k) = omega * (probs(p, k) / denom - (k == label ? 1.0f : 0.0f));
            }
        }
        loss /= weight_total;
        if (!std::isfinite(loss)) {
            throw NumericError("training loss diverged at step " + std::to_string(step), step);
        }
        result.loss_history.push_back(loss);
        probs *= static_cast<float>(1.0 / weight_total);

        Eigen::MatrixXf weight_grad = probs.transpose() * features; // (K+1) x D
        Eigen::VectorXf bias_grad = probs.colwise().sum().transpose();
        const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
            pixel_feature_grad = probs * weights; // num_px x D

        feature_grad.setZero();
        const ContributionImage& contribs = *fm.contribs;
        for (long p = 0; p < num_px; ++p) {
            for (const PixelContrib& c : contribs.pixels[static_cast<size_t>(p)]) {
                feature_grad.row(c.gaussian) += c.weight * pixel_feature_grad.row(p);
            }
        }

        const double norm_sq = static_cast<double>(weight_grad.squaredNorm()) +
                               static_cast<double>(bias_grad.squaredNorm()) +
                               static_cast<double>(feature_grad.squaredNorm());
        float scale = 1.0f;
        if (norm_sq > static_cast<double>(opts.grad_clip_norm) * opts.grad_clip_norm) {
            scale = static_cast<float>(opts.grad_clip_norm / std::sqrt(norm_sq));
        }
        const float step_size = opts.lr * scale;
        weights -= step_size * weight_grad;
        bias -= step_size * bias_grad;
        for (size_t i = 0; i < num_gaussians; ++i) {
            scene.gaussians[i].feature -=
                step_size * feature_grad.row(static_cast<long>(i)).transpose();
        }
        ++result.steps_run;
    }

    result.final_accuracy = identity_accuracy(scene, result.classifier, supervision, opts.threads);
    return result;
}

std::vector<int> classify_gaussians(const Scene& scene, const Classifier& classifier) {
    if (classifier.feature_dim() != scene.feature_dim()) {
        throw DimensionError("classifier feature dimension does not match scene");
    }
    std::vector<int> ids;
    ids.reserve(scene.gaussians.size());
    for (const Gaussian& g : scene.gaussians) {
        ids.push_back(classifier.predict(g.feature));
    }
    return ids;
}

double identity_accuracy(const Scene& scene, const Classifier& classifier,
                         const SupervisionSet& truth, int threads) {
    if (truth.maps.empty()) {
        return 0.0;
    }
    long correct = 0;
    long total = 0;
    for (const auto& [cam_id, gt] : truth.maps) {
        const Camera& cam = scene.camera_by_id(cam_id);
        const IdentityMap pred = render_identity_map(scene, cam, classifier, {.threads = threads});
        for (size_t i = 0; i < gt.ids.size(); ++i) {
            correct += pred.ids[i] == gt.ids[i] ? 1 : 0;
        }
        total += static_cast<long>(gt.ids.size());
    }
    return static_cast<double>(correct) / static_cast<double>(total);
}

} // namespace sg
