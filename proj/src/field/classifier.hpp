#pragma once

#include <Eigen/Dense>
#include <filesystem>

#include "util/errors.hpp"

namespace sg {

// Affine instance classifier: logits = weights * feature + bias, with
// K+1 rows (background class 0 plus K instances).
struct Classifier {
    Eigen::MatrixXf weights; // (K+1) x D
    Eigen::VectorXf bias;    // K+1

    int num_classes() const { return static_cast<int>(weights.rows()); } // K+1
    int num_instances() const { return num_classes() - 1; }              // K
    int feature_dim() const { return static_cast<int>(weights.cols()); }

    static Classifier zero(int num_instances, int feature_dim) {
        Classifier c;
        c.weights = Eigen::MatrixXf::Zero(num_instances + 1, feature_dim);
        c.bias = Eigen::VectorXf::Zero(num_instances + 1);
        return c;
    }

    // Argmax class for one feature vector; ties break to the smaller index.
    int predict(const Eigen::VectorXf& feature) const;

    void validate() const;
};

// JSON form: { "K", "D", "weights": [row-major floats], "bias": [...] }.
Classifier load_classifier_json(const std::filesystem::path& file);
void save_classifier_json(const std::filesystem::path& file, const Classifier& classifier);

} // namespace sg
