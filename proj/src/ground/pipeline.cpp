#include "ground/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>

#include "util/rng.hpp"

namespace sg {

namespace {

    constexpr int kPoseFeatureDim = 6;
    constexpr int kKMeansMaxIters = 50;

    using PoseMatrix = Eigen::Matrix<double, Eigen::Dynamic, kPoseFeatureDim, Eigen::RowMajor>;

    double scene_radius(const Scene& scene) {
        if (scene.gaussians.empty()) {
            return 1.0;
        }
        Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
        for (const Gaussian& g : scene.gaussians) {
            centroid += g.position.cast<double>();
        }
        centroid /= static_cast<double>(scene.gaussians.size());
        double radius = 0.0;
        for (const Gaussian& g : scene.gaussians) {
            radius = std::max(radius, (g.position.cast<double>() - centroid).norm());
        }
        return radius > 1e-9 ? radius : 1.0;
    }

    struct KMeansResult {
        std::vector<int> assignment;
        PoseMatrix centroids;
    };

    KMeansResult kmeans(const PoseMatrix& points, int k, Rng& rng) {
        const long n = points.rows();
        KMeansResult res;
        res.centroids.resize(k, kPoseFeatureDim);

        // k-means++ seeding.
        std::vector<long> chosen;
        chosen.push_back(static_cast<long>(rng.uniform_index(static_cast<uint64_t>(n))));
        res.centroids.row(0) = points.row(chosen[0]);
        std::vector<double> dist2(static_cast<size_t>(n), 0.0);
        for (int c = 1; c < k; ++c) {
            double total = 0.0;
            for (long i = 0; i < n; ++i) {
                double best = std::numeric_limits<double>::max();
                for (int j = 0; j < c; ++j) {
                    best = std::min(best,
                                    (points.row(i) - res.centroids.row(j)).squaredNorm());
                }
                dist2[static_cast<size_t>(i)] = best;
                total += best;
            }
            long pick = -1;
            if (total > 0.0) {
                const double target = rng.uniform() * total;
                double run = 0.0;
                for (long i = 0; i < n; ++i) {
                    run += dist2[static_cast<size_t>(i)];
                    if (run >= target) {
                        pick = i;
                        break;
                    }
                }
            }
            if (pick < 0) {
                pick = static_cast<long>(rng.uniform_index(static_cast<uint64_t>(n)));
            }
            res.centroids.row(c) = points.row(pick);
        }

        res.assignment.assign(static_cast<size_t>(n), 0);
        for (int iter = 0; iter < kKMeansMaxIters; ++iter) {
            bool changed = false;
            for (long i = 0; i < n; ++i) {
                int best = 0;
                double best_d = (points.row(i) - res.centroids.row(0)).squaredNorm();
                for (int c = 1; c < k; ++c) {
                    const double d = (points.row(i) - res.centroids.row(c)).squaredNorm();
                    if (d < best_d) {
                        best_d = d;
                        best = c;
                    }
                }
                if (res.assignment[static_cast<size_t>(i)] != best) {
                    res.assignment[static_cast<size_t>(i)] = best;
                    changed = true;
                }
            }
            if (!changed && iter > 0) {
                break;
            }
            PoseMatrix sums = PoseMatrix::Zero(k, kPoseFeatureDim);
            std::vector<long> counts(static_cast<size_t>(k), 0);
            for (long i = 0; i < n; ++i) {
                sums.row(res.assignment[static_cast<size_t>(i)]) += points.row(i);
                ++counts[static_cast<size_t>(res.assignment[static_cast<size_t>(i)])];
            }
            for (int c = 0; c < k; ++c) {
                if (counts[static_cast<size_t>(c)] > 0) {
                    res.centroids.row(c) =
                        sums.row(c) / static_cast<double>(counts[static_cast<size_t>(c)]);
                } else {
                    // Re-seed an empty cluster at the point farthest from its
                    // current centroid.
                    long far = 0;
                    double far_d = -1.0;
                    for (long i = 0; i < n; ++i) {
                        const int a = res.assignment[static_cast<size_t>(i)];
                        const double d = (points.row(i) - res.centroids.row(a)).squaredNorm();
                        if (d > far_d) {
                            far_d = d;
                            far = i;
                        }
                    }
                    res.centroids.row(c) = points.row(far);
                    res.assignment[static_cast<size_t>(far)] = c;
                }
            }
        }
        return res;
    }

    struct ViewRender {
        int camera_id = 0;
        ImageRGB image;
        IdentityMap idmap;
    };

    // Renders RGB + identity maps for the given cameras, one async task per
    // view, and returns them in the input order.
    std::vector<ViewRender> render_views(const Scene& scene, const Classifier& classifier,
                                         const std::vector<int>& camera_ids, int threads) {
        std::vector<std::future<ViewRender>> futures;
        futures.reserve(camera_ids.size());
        for (int cam_id : camera_ids) {
            futures.push_back(std::async(std::launch::async, [&, cam_id] {
                const Camera& cam = scene.camera_by_id(cam_id);
                ViewRender v;
                v.camera_id = cam_id;
                v.image = render_rgb(scene, cam, {.threads = threads});
                v.idmap = render_identity_map(scene, cam, classifier, {.threads = threads});
                return v;
            }));
        }
        std::vector<ViewRender> out;
        out.reserve(camera_ids.size());
        for (auto& f : futures) {
            out.push_back(f.get());
        }
        return out;
    }

    class StageTimer {
    public:
        explicit StageTimer(std::map<std::string, double>& sink) : sink_(sink) {}
        template <typename F>
        auto run(const std::string& stage, F&& f) {
            const auto start = std::chrono::steady_clock::now();
            if constexpr (std::is_void_v<decltype(f())>) {
                f();
                sink_[stage] = elapsed_ms(start);
            } else {
                auto result = f();
                sink_[stage] = elapsed_ms(start);
                return result;
            }
        }

    private:
        static double elapsed_ms(std::chrono::steady_clock::time_point start) {
            return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                             start)
                .count();
        }
        std::map<std::string, double>& sink_;
    };

} // namespace

std::vector<int> cluster_cameras(const Scene& scene, int n_cluster, uint64_t seed) {
    if (n_cluster < 1) {
        throw ConfigError("n_cluster must be >= 1");
    }
    if (static_cast<size_t>(n_cluster) > scene.cameras.size()) {
        throw ConfigError("n_cluster=" + std::to_string(n_cluster) + " exceeds camera count " +
                          std::to_string(scene.cameras.size()));
    }
    std::vector<const Camera*> cams;
    cams.reserve(scene.cameras.size());
    for (const Camera& c : scene.cameras) {
        cams.push_back(&c);
    }
    std::sort(cams.begin(), cams.end(),
              [](const Camera* a, const Camera* b) { return a->id < b->id; });

    const double radius = scene_radius(scene);
    PoseMatrix points(static_cast<long>(cams.size()), kPoseFeatureDim);
    for (size_t i = 0; i < cams.size(); ++i) {
        const Eigen::Vector3d center = cams[i]->center().cast<double>();
        const Eigen::Vector3d forward = cams[i]->forward().cast<double>().normalized() * radius;
        points.row(static_cast<long>(i)) << center.x(), center.y(), center.z(), forward.x(),
            forward.y(), forward.z();
    }

    Rng rng(seed);
    const KMeansResult km = kmeans(points, n_cluster, rng);

    std::vector<int> reps;
    reps.reserve(static_cast<size_t>(n_cluster));
    for (int c = 0; c < n_cluster; ++c) {
        long best = -1;
        double best_d = std::numeric_limits<double>::max();
        for (long i = 0; i < points.rows(); ++i) {
            if (km.assignment[static_cast<size_t>(i)] != c) {
                continue;
            }
            const double d = (points.row(i) - km.centroids.row(c)).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }
        if (best >= 0) {
            reps.push_back(cams[static_cast<size_t>(best)]->id);
        }
    }
    std::sort(reps.begin(), reps.end());
    return reps;
}

std::vector<int> select_global_views(const Scene& scene, const Classifier& classifier,
                                     const std::vector<int>& cluster_reps, int n_global,
                                     int min_visible_pixels, int threads) {
    struct Ranked {
        int camera_id;
        int distinct_ids;
    };
    std::vector<Ranked> ranked;
    ranked.reserve(cluster_reps.size());
    for (int cam_id : cluster_reps) {
        const Camera& cam = scene.camera_by_id(cam_id);
        const IdentityMap idmap = render_identity_map(scene, cam, classifier,
                                                      {.threads = threads});
        std::vector<long> counts(static_cast<size_t>(idmap.max_id()) + 1, 0);
        for (int32_t id : idmap.ids) {
            if (id > 0) {
                ++counts[static_cast<size_t>(id)];
            }
        }
        int distinct = 0;
        for (size_t id = 1; id < counts.size(); ++id) {
            if (counts[id] >= min_visible_pixels) {
                ++distinct;
            }
        }
        ranked.push_back({cam_id, distinct});
    }
    std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
        if (a.distinct_ids != b.distinct_ids) {
            return a.distinct_ids > b.distinct_ids;
        }
        return a.camera_id < b.camera_id;
    });
    std::vector<int> out;
    const size_t take = std::min<size_t>(static_cast<size_t>(std::max(0, n_global)),
                                         ranked.size());
    out.reserve(take);
    for (size_t i = 0; i < take; ++i) {
        out.push_back(ranked[i].camera_id);
    }
    return out;
}

VoteResult global_ground(const Scene& scene, const Classifier& classifier,
                         const std::string& query, const std::vector<int>& global_views,
                         GroundingBackend& backend, const PipelineOptions& opts) {
    if (global_views.empty()) {
        throw InputError("global view set is empty");
    }
    std::vector<int> ordered = global_views;
    std::sort(ordered.begin(), ordered.end());
    const std::vector<ViewRender> renders =
        render_views(scene, classifier, ordered, opts.threads);

    // Per-view grounding calls may run concurrently; the reduction below is
    // a fixed-order scan, so the vote is independent of completion order.
    std::vector<std::future<GroundingOutcome>> futures;
    futures.reserve(renders.size());
    for (const ViewRender& v : renders) {
        futures.push_back(std::async(std::launch::async, [&backend, &v, &query, &opts] {
            const ViewRequest req{v.camera_id, &v.image, query};
            return segment_view(backend, req, v.idmap, opts.tau_abstain);
        }));
    }

    VoteResult result;
    std::map<int, long> counts;
    std::map<int, double> fractions;
    for (auto& f : futures) {
        GroundingOutcome outcome = f.get();
        if (outcome.instance_id) {
            counts[*outcome.instance_id] += 1;
            fractions[*outcome.instance_id] += outcome.overlap_fraction;
        }
        result.votes.emplace(outcome.camera_id, std::move(outcome));
    }
    if (counts.empty()) {
        throw GroundingFailedError("every view abstained for query \"" + query + "\"");
    }
    int winner = 0;
    for (const auto& [id, count] : counts) {
        if (winner == 0) {
            winner = id;
            continue;
        }
        const long wc = counts[winner];
        if (count > wc || (count == wc && fractions[id] > fractions[winner])) {
            winner = id;
        }
        // Equal count and fraction keeps the smaller id (map order).
    }
    result.winner_id = winner;

    const std::vector<int> gaussian_ids = classify_gaussians(scene, classifier);
    result.coarse_mask.soft.assign(scene.gaussians.size(), 0.0f);
    for (size_t i = 0; i < gaussian_ids.size(); ++i) {
        if (gaussian_ids[i] == winner) {
            result.coarse_mask.soft[i] = 1.0f;
        }
    }
    return result;
}

std::vector<int> select_local_views(const Scene& scene, const Classifier& classifier,
                                    const std::vector<int>& cluster_reps, int winner_id,
                                    int min_visible_pixels, int threads) {
    std::vector<int> ordered = cluster_reps;
    std::sort(ordered.begin(), ordered.end());
    std::vector<int> out;
    for (int cam_id : ordered) {
        const Camera& cam = scene.camera_by_id(cam_id);
        const IdentityMap idmap = render_identity_map(scene, cam, classifier,
                                                      {.threads = threads});
        if (idmap.count_id(winner_id) >= min_visible_pixels) {
            out.push_back(cam_id);
        }
    }
    return out;
}

RefineResult local_refine(const Scene& scene, const Classifier& classifier,
                          const Mask3D& coarse, const std::vector<int>& local_views,
                          GroundingBackend& backend, int winner_id, const std::string& query,
                          const PipelineOptions& opts) {
    RefineResult result;
    if (coarse.soft.size() != scene.gaussians.size()) {
        throw DimensionError("coarse mask length does not match scene");
    }
    if (local_views.empty() || opts.refine_steps <= 0) {
        result.mask = coarse;
        result.skipped = true;
        return result;
    }

    std::vector<int> ordered = local_views;
    std::sort(ordered.begin(), ordered.end());
    const std::vector<ViewRender> renders =
        render_views(scene, classifier, ordered, opts.threads);

    std::vector<std::future<GroundingOutcome>> futures;
    futures.reserve(renders.size());
    for (const ViewRender& v : renders) {
        futures.push_back(std::async(std::launch::async, [&backend, &v, &query, &opts] {
            const ViewRequest req{v.camera_id, &v.image, query};
            return segment_view(backend, req, v.idmap, opts.tau_abstain);
        }));
    }
    std::vector<std::pair<int, Mask2D>> targets; // camera id -> 2D target mask
    for (auto& f : futures) {
        GroundingOutcome outcome = f.get();
        if (outcome.instance_id && *outcome.instance_id == winner_id) {
            result.views_used.push_back(outcome.camera_id);
            targets.emplace_back(outcome.camera_id, std::move(outcome.mask2d));
        }
    }
    if (targets.empty()) {
        result.mask = coarse;
        result.skipped = true;
        return result;
    }

    const std::vector<uint8_t> hard = coarse.hard();
    std::vector<float> logits(scene.gaussians.size());
    for (size_t i = 0; i < logits.size(); ++i) {
        logits[i] = hard[i] ? 3.0f : -3.0f;
    }

    std::vector<float> membership(logits.size());
    result.losses.reserve(static_cast<size_t>(opts.refine_steps));
    for (int step = 0; step < opts.refine_steps; ++step) {
        const auto& [cam_id, target] = targets[static_cast<size_t>(step) % targets.size()];
        const Camera& cam = scene.camera_by_id(cam_id);
        for (size_t i = 0; i < logits.size(); ++i) {
            membership[i] = sigmoidf(logits[i]);
        }
        const SoftMaskRender rendered =
            render_soft_mask(scene, cam, membership, {.threads = opts.threads});
        const MaskLossGrad grad = backprop_mask_l1(rendered, target, logits, opts.threads);
        result.losses.push_back(grad.loss);
        for (size_t i = 0; i < logits.size(); ++i) {
            logits[i] -= opts.refine_lr * grad.d_logit[i];
        }
    }

    result.mask.threshold = coarse.threshold;
    result.mask.soft.resize(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) {
        result.mask.soft[i] = sigmoidf(logits[i]);
    }
    return result;
}

GroundingResult ground(const Scene& scene, const Classifier& classifier,
                       const std::string& query, GroundingBackend& backend,
                       const PipelineOptions& opts) {
    if (scene.num_instances < 1 && classifier.num_instances() < 1) {
        throw InputError("scene has no trained instances to ground against");
    }
    GroundingResult result;
    result.query = query;
    StageTimer timer(result.timings_ms);

    result.cluster_reps = timer.run("cluster", [&] {
        return cluster_cameras(scene, std::min<int>(opts.n_cluster,
                                                    static_cast<int>(scene.cameras.size())),
                               opts.seed);
    });
    result.global_views = timer.run("select_global", [&] {
        return select_global_views(scene, classifier, result.cluster_reps, opts.n_global,
                                   opts.min_visible_pixels, opts.threads);
    });
    VoteResult vote = timer.run("global_ground", [&] {
        return global_ground(scene, classifier, query, result.global_views, backend, opts);
    });
    result.votes = std::move(vote.votes);
    result.winner_id = vote.winner_id;
    result.coarse_mask = std::move(vote.coarse_mask);

    if (!opts.skip_refine) {
        result.local_views = timer.run("select_local", [&] {
            return select_local_views(scene, classifier, result.cluster_reps, result.winner_id,
                                      opts.min_visible_pixels, opts.threads);
        });
        RefineResult refined = timer.run("local_refine", [&] {
            return local_refine(scene, classifier, result.coarse_mask, result.local_views,
                                backend, result.winner_id, query, opts);
        });
        result.refine_skipped = refined.skipped;
        result.refine_views_used = std::move(refined.views_used);
        if (!refined.skipped) {
            result.refined_mask = std::move(refined.mask);
        }
    }
    return result;
}

} // namespace sg
