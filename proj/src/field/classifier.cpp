#include "field/classifier.hpp"

#include <fstream>
#include <nlohmann/json.hpp>

namespace sg {

int Classifier::predict(const Eigen::VectorXf& feature) const {
    if (feature.size() != weights.cols()) {
        throw DimensionError("classifier expects D=" + std::to_string(weights.cols()) +
                             " features, got " + std::to_string(feature.size()));
    }
    const Eigen::VectorXf logits = weights * feature + bias;
    int best = 0;
    for (int k = 1; k < logits.size(); ++k) {
        if (logits[k] > logits[best]) {
            best = k;
        }
    }
    return best;
}

void Classifier::validate() const {
    if (weights.rows() < 2 || weights.rows() != bias.size()) {
        throw DimensionError("classifier must have K+1 >= 2 rows and a matching bias");
    }
    if (!weights.allFinite() || !bias.allFinite()) {
        throw NumericError("classifier contains non-finite entries");
    }
}

Classifier load_classifier_json(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw IoError("cannot open " + file.string());
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(file.string() + ": " + e.what());
    }
    Classifier c;
    try {
        const int k = doc.at("K").get<int>();
        const int d = doc.at("D").get<int>();
        const auto& w = doc.at("weights");
        const auto& b = doc.at("bias");
        if (static_cast<int>(w.size()) != (k + 1) * d || static_cast<int>(b.size()) != k + 1) {
            throw ParseError(file.string() + ": weights/bias sizes do not match K and D");
        }
        c.weights.resize(k + 1, d);
        for (int r = 0; r < k + 1; ++r) {
            for (int col = 0; col < d; ++col) {
                c.weights(r, col) = w[r * d + col].get<float>();
            }
        }
        c.bias.resize(k + 1);
        for (int r = 0; r < k + 1; ++r) {
            c.bias[r] = b[r].get<float>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(file.string() + ": " + e.what());
    }
    c.validate();
    return c;
}

void save_classifier_json(const std::filesystem::path& file, const Classifier& classifier) {
    nlohmann::json doc;
    doc["K"] = classifier.num_instances();
    doc["D"] = classifier.feature_dim();
    std::vector<float> w;
    w.reserve(static_cast<size_t>(classifier.weights.size()));
    for (int r = 0; r < classifier.weights.rows(); ++r) {
        for (int col = 0; col < classifier.weights.cols(); ++col) {
            w.push_back(classifier.weights(r, col));
        }
    }
    doc["weights"] = w;
    std::vector<float> b(classifier.bias.data(), classifier.bias.data() + classifier.bias.size());
    doc["bias"] = b;
    std::ofstream out(file);
    if (!out) {
        throw IoError("cannot write " + file.string());
    }
    out << doc.dump(2) << "\n";
}

} // namespace sg
