#pragma once

#include <map>

#include "core/types.hpp"
#include "field/classifier.hpp"
#include "render/rasterizer.hpp"

namespace sg {

// Per-view ground-truth instance IDs, consistent across views.
struct SupervisionSet {
    std::map<int, IdentityMap> maps; // camera id -> id map
    int num_instances = 0;           // K

    void validate(const Scene& scene) const;
};

struct ViewMasks {
    int camera_id = 0;
    std::vector<Mask2D> masks; // disjoint within the view
};

struct AssociateOptions {
    float merge_jaccard = 0.3f;
    int threads = 1;
};

// Associates per-view instance masks into consistent cross-view IDs by
// matching the Gaussians that dominate each mask's pixels: masks whose
// dominant Gaussian index sets overlap with an existing track at Jaccard >=
// merge_jaccard join that track, otherwise they open a new ID. Views are
// processed in ascending camera-id order, masks in their given order.
SupervisionSet associate_masks(const Scene& scene, const std::vector<ViewMasks>& per_view,
                               const AssociateOptions& opts = {});

struct TrainOptions {
    int steps = 300;
    float lr = 0.05f;
    float background_weight = 0.1f; // loss weight for unlabeled pixels
    float grad_clip_norm = 10.0f;
    float feature_init_range = 0.01f; // features start i.i.d. U(-range, range)
    uint64_t seed = 17;
    int threads = 1;
};

struct TrainResult {
    Classifier classifier;
    std::vector<double> loss_history; // one entry per step
    double final_accuracy = 0.0;      // per-pixel, over the supervised views
    int steps_run = 0;
};

// Jointly optimizes per-Gaussian features and the classifier with SGD so
// rendered identity maps match the supervision. One view per step, views
// cycled in a fixed seed-shuffled order. steps == 0 leaves the scene
// untouched and returns a zero classifier.
TrainResult train_field(Scene& scene, const SupervisionSet& supervision,
                        const TrainOptions& opts = {});

// Per-Gaussian argmax of classifier logits on each instance feature.
std::vector<int> classify_gaussians(const Scene& scene, const Classifier& classifier);

// Mean per-pixel agreement between rendered identity maps and `truth`.
double identity_accuracy(const Scene& scene, const Classifier& classifier,
                         const SupervisionSet& truth, int threads = 1);

} // namespace sg
