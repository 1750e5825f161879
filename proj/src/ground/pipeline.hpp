#pragma once

#include <map>

#include "field/trainer.hpp"
#include "ground/view_segmenter.hpp"

namespace sg {

struct PipelineOptions {
    int n_cluster = 24;
    int n_global = 8;
    int refine_steps = 50;
    float refine_lr = 800.0f;
    float tau_abstain = 0.25f;
    // Minimum pixel count for an instance to count as visible in a view.
    int min_visible_pixels = 50;
    uint64_t seed = 17;
    int threads = 1;
    bool skip_refine = false;
};

// K-means (k-means++ init, seeded, at most 50 Lloyd iterations) over camera
// pose features [center, forward * scene_radius]; returns one representative
// camera id per cluster (the member closest to its centroid), sorted by id.
std::vector<int> cluster_cameras(const Scene& scene, int n_cluster, uint64_t seed);

// Representatives ranked by the number of distinct instances visible in
// their identity maps (>= min_visible_pixels each); top n_global, ties by
// smaller camera id.
std::vector<int> select_global_views(const Scene& scene, const Classifier& classifier,
                                     const std::vector<int>& cluster_reps, int n_global,
                                     int min_visible_pixels = 50, int threads = 1);

struct VoteResult {
    int winner_id = 0;
    std::map<int, GroundingOutcome> votes; // camera id -> outcome
    Mask3D coarse_mask;
};

// Runs the per-view segmenter on every global view and aggregates votes:
// winner = argmax over ids of non-abstaining vote count, ties broken by
// summed overlap fraction then smaller id. The coarse mask selects Gaussians
// the classifier assigns to the winner. Throws GroundingFailedError when
// every view abstains.
VoteResult global_ground(const Scene& scene, const Classifier& classifier,
                         const std::string& query, const std::vector<int>& global_views,
                         GroundingBackend& backend, const PipelineOptions& opts);

// Representatives whose identity map shows the winner with at least
// min_visible_pixels pixels.
std::vector<int> select_local_views(const Scene& scene, const Classifier& classifier,
                                    const std::vector<int>& cluster_reps, int winner_id,
                                    int min_visible_pixels = 50, int threads = 1);

struct RefineResult {
    Mask3D mask;
    std::vector<int> views_used; // local views whose 2D mask agreed with the winner
    std::vector<double> losses;  // one entry per optimization step
    bool skipped = false;
};

// Gradient refinement of the coarse mask: per-Gaussian membership logits
// (init +3 inside the coarse mask, -3 outside) are optimized with SGD
// against per-view 2D masks under an L1 loss, cycling local views
// round-robin. Geometry and features stay frozen. Views whose segmenter
// answer abstains or disagrees with the winner are dropped; if none remain
// the coarse mask is returned unchanged.
RefineResult local_refine(const Scene& scene, const Classifier& classifier,
                          const Mask3D& coarse, const std::vector<int>& local_views,
                          GroundingBackend& backend, int winner_id, const std::string& query,
                          const PipelineOptions& opts);

struct GroundingResult {
    std::string query;
    std::vector<int> cluster_reps;
    std::vector<int> global_views;
    std::vector<int> local_views;
    std::map<int, GroundingOutcome> votes;
    int winner_id = 0;
    Mask3D coarse_mask;
    std::optional<Mask3D> refined_mask;
    std::vector<int> refine_views_used;
    bool refine_skipped = false;
    std::map<std::string, double> timings_ms;

    const Mask3D& final_mask() const { return refined_mask ? *refined_mask : coarse_mask; }
};

// Full pipeline: cluster -> select global views -> vote -> select local
// views -> refine. Deterministic given the seed and a deterministic backend.
GroundingResult ground(const Scene& scene, const Classifier& classifier,
                       const std::string& query, GroundingBackend& backend,
                       const PipelineOptions& opts);

} // namespace sg
