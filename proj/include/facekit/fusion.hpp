#pragma once

#include <cmath>
#include <vector>

#include "facekit/common.hpp"

namespace facekit {

struct FusionModel {
    std::vector<double> weights;
    double bias = 0.0;
};

struct FusionFitOptions {
    std::size_t epochs = 800;
    double learning_rate = 0.1;
    double l2_reg = 1e-3;
};

inline double fuse(const FusionModel& m, const std::vector<double>& scores) {
    check(scores.size() == m.weights.size(), "fusion expects ", m.weights.size(),
          " group scores, got ", scores.size());
    double acc = m.bias;
    for (std::size_t k = 0; k < scores.size(); ++k) acc += m.weights[k] * scores[k];
    return acc;
}

// Linear score fusion trained by full-batch subgradient descent on the
// regularized hinge objective. Inputs are standardized internally and the
// standardization folded back into the returned weights.
inline FusionModel fit_fusion(const std::vector<std::vector<double>>& score_vectors,
                              const std::vector<bool>& same,
                              const FusionFitOptions& opts = {}) {
    check(!score_vectors.empty(), "fusion training needs data");
    check(score_vectors.size() == same.size(), "fusion: ", score_vectors.size(),
          " score vectors vs ", same.size(), " labels");
    const std::size_t n = score_vectors.size();
    const std::size_t k = score_vectors.front().size();
    check(k >= 1, "fusion needs at least one group score");
    bool any_same = false, any_diff = false;
    for (bool s : same) (s ? any_same : any_diff) = true;
    check(any_same && any_diff, "fusion training needs both pair labels present");
    for (const auto& v : score_vectors)
        check(v.size() == k, "fusion score vectors differ in length");

    std::vector<double> mean(k, 0.0), stddev(k, 0.0);
    for (const auto& v : score_vectors)
        for (std::size_t j = 0; j < k; ++j) mean[j] += v[j];
    for (double& v : mean) v /= static_cast<double>(n);
    for (const auto& v : score_vectors)
        for (std::size_t j = 0; j < k; ++j) stddev[j] += (v[j] - mean[j]) * (v[j] - mean[j]);
    for (double& v : stddev) v = std::sqrt(v / static_cast<double>(n));
    for (double& v : stddev)
        if (v <= 0.0) v = 1.0;  // constant column: weight stays on the bias

    std::vector<std::vector<double>> z(n, std::vector<double>(k));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j)
            z[i][j] = (score_vectors[i][j] - mean[j]) / stddev[j];

    std::vector<double> w(k, 0.0);
    double b = 0.0;
    const double lr = opts.learning_rate;
    for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
        std::vector<double> gw(k, 0.0);
        double gb = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double y = same[i] ? 1.0 : -1.0;
            double margin = b;
            for (std::size_t j = 0; j < k; ++j) margin += w[j] * z[i][j];
            if (y * margin < 1.0) {
                for (std::size_t j = 0; j < k; ++j) gw[j] -= y * z[i][j];
                gb -= y;
            }
        }
        for (std::size_t j = 0; j < k; ++j) {
            gw[j] = gw[j] / static_cast<double>(n) + 2.0 * opts.l2_reg * w[j];
            w[j] -= lr * gw[j];
        }
        b -= lr * gb / static_cast<double>(n);
    }

    FusionModel m;
    m.weights.resize(k);
    m.bias = b;
    for (std::size_t j = 0; j < k; ++j) {
        m.weights[j] = w[j] / stddev[j];
        m.bias -= w[j] * mean[j] / stddev[j];
    }
    for (double v : m.weights) check(std::isfinite(v), "fusion weights diverged");
    check(std::isfinite(m.bias), "fusion bias diverged");
    return m;
}

}  // namespace facekit
