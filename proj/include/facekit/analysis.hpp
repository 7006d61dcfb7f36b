#pragma once

#include <algorithm>
#include <array>
#include <string>
#include <vector>

#include "facekit/linalg.hpp"
#include "facekit/pca.hpp"
#include "facekit/tensor.hpp"
#include "facekit/threshold.hpp"

namespace facekit {

struct ScatterPair {
    Matrix inter;  // between-identity scatter, weighted by group sizes
    Matrix intra;  // pooled within-identity scatter
    std::size_t identity_count = 0;
    std::vector<std::size_t> samples_per_identity;
    std::string warning;
};

inline ScatterPair compute_scatter(const std::vector<std::vector<double>>& features,
                                   const std::vector<std::size_t>& labels) {
    check(!features.empty(), "scatter computation needs data");
    check(features.size() == labels.size(), "scatter: ", features.size(), " features vs ",
          labels.size(), " labels");
    const std::size_t d = features.front().size();
    for (const auto& f : features)
        check(f.size() == d, "scatter feature dimensionality is not uniform");

    std::size_t c = 0;
    for (std::size_t l : labels) c = std::max(c, l + 1);

    ScatterPair sp;
    sp.identity_count = c;
    sp.samples_per_identity.assign(c, 0);
    std::vector<std::vector<double>> group_mean(c, std::vector<double>(d, 0.0));
    std::vector<double> global_mean(d, 0.0);
    for (std::size_t i = 0; i < features.size(); ++i) {
        ++sp.samples_per_identity[labels[i]];
        for (std::size_t k = 0; k < d; ++k) {
            group_mean[labels[i]][k] += features[i][k];
            global_mean[k] += features[i][k];
        }
    }
    for (std::size_t g = 0; g < c; ++g) {
        check(sp.samples_per_identity[g] > 0, "identity ", g, " has no samples");
        for (double& v : group_mean[g]) v /= static_cast<double>(sp.samples_per_identity[g]);
    }
    for (double& v : global_mean) v /= static_cast<double>(features.size());

    sp.inter = Matrix(d, d);
    sp.intra = Matrix(d, d);
    for (std::size_t g = 0; g < c; ++g) {
        const double n = static_cast<double>(sp.samples_per_identity[g]);
        for (std::size_t i = 0; i < d; ++i) {
            const double gi = group_mean[g][i] - global_mean[i];
            for (std::size_t j = 0; j < d; ++j)
                sp.inter(i, j) += n * gi * (group_mean[g][j] - global_mean[j]);
        }
    }
    for (std::size_t s = 0; s < features.size(); ++s) {
        const auto& gm = group_mean[labels[s]];
        for (std::size_t i = 0; i < d; ++i) {
            const double di = features[s][i] - gm[i];
            for (std::size_t j = 0; j < d; ++j)
                sp.intra(i, j) += di * (features[s][j] - gm[j]);
        }
    }
    if (c < 2) sp.warning = "single identity: between-identity scatter is zero";
    return sp;
}

struct SpectrumReport {
    std::vector<double> inter;  // descending eigenvalues, normalized to mean 1
    std::vector<double> intra;
};

inline std::vector<double> normalized_spectrum(const Matrix& scatter) {
    EigenResult eig = sym_eigendecompose(scatter);
    double mean = 0.0;
    for (double& v : eig.eigenvalues) {
        v = std::max(v, 0.0);  // scatter matrices are PSD; clamp solver jitter
        mean += v;
    }
    mean /= static_cast<double>(eig.eigenvalues.size());
    if (mean > 0.0)
        for (double& v : eig.eigenvalues) v /= mean;
    return eig.eigenvalues;
}

inline SpectrumReport spectrum(const ScatterPair& sp) {
    SpectrumReport r;
    r.inter = normalized_spectrum(sp.inter);
    r.intra = normalized_spectrum(sp.intra);
    return r;
}

struct RocCurve {
    std::vector<std::array<double, 2>> points;  // (false-positive rate, true-positive rate)
    double auc = 0.0;
};

struct VerificationMetrics {
    double accuracy = 0.0;   // at the best threshold
    double threshold = 0.0;
    RocCurve roc;
};

inline VerificationMetrics verification_metrics(const std::vector<double>& scores,
                                                const std::vector<bool>& same) {
    check(scores.size() == same.size(), "metrics: ", scores.size(), " scores vs ", same.size(),
          " labels");
    check(!scores.empty(), "metrics need at least one pair");
    std::size_t n_same = 0, n_diff = 0;
    for (bool s : same) (s ? n_same : n_diff) += 1;
    check(n_same > 0 && n_diff > 0, "metrics need both pair labels present");

    VerificationMetrics m;
    const ThresholdScan scan = best_threshold_higher_same(scores, same);
    m.accuracy = scan.accuracy;
    m.threshold = scan.threshold;

    // ROC: sweep thresholds downward through the distinct scores; predict
    // "same" when score > t
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    m.roc.points.push_back({0.0, 0.0});
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double v = scores[order[i]];
        while (i < order.size() && scores[order[i]] == v) {
            (same[order[i]] ? tp : fp) += 1;
            ++i;
        }
        m.roc.points.push_back({static_cast<double>(fp) / static_cast<double>(n_diff),
                                static_cast<double>(tp) / static_cast<double>(n_same)});
    }
    for (std::size_t k = 1; k < m.roc.points.size(); ++k) {
        const auto& a = m.roc.points[k - 1];
        const auto& b = m.roc.points[k];
        m.roc.auc += (b[0] - a[0]) * 0.5 * (a[1] + b[1]);
    }
    return m;
}

struct Pca2Row {
    double dim1 = 0.0, dim2 = 0.0;
    std::size_t identity = 0;
};

struct Pca2Export {
    std::vector<Pca2Row> rows;  // input order over the selected identities
    std::vector<std::size_t> identities;
    std::string warning;
};

// First two principal components of the features belonging to the top-k
// identities by sample count (ties broken toward the smaller label).
inline Pca2Export pca2_export(const std::vector<std::vector<double>>& features,
                              const std::vector<std::size_t>& labels, std::size_t top_k) {
    check(features.size() == labels.size(), "pca2: ", features.size(), " features vs ",
          labels.size(), " labels");
    check(features.size() >= 2, "pca2 needs at least two samples");
    check(top_k >= 1, "pca2 needs top_k >= 1");

    std::size_t c = 0;
    for (std::size_t l : labels) c = std::max(c, l + 1);
    std::vector<std::size_t> counts(c, 0);
    for (std::size_t l : labels) ++counts[l];
    std::vector<std::size_t> order;
    for (std::size_t id = 0; id < c; ++id)
        if (counts[id] > 0) order.push_back(id);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return counts[a] != counts[b] ? counts[a] > counts[b] : a < b;
    });

    Pca2Export out;
    if (order.size() < top_k) {
        out.warning = format_msg("only ", order.size(), " identities available, requested ",
                                 top_k);
        top_k = order.size();
    }
    out.identities.assign(order.begin(), order.begin() + top_k);

    std::vector<std::vector<double>> subset;
    std::vector<std::size_t> subset_labels;
    for (std::size_t i = 0; i < features.size(); ++i) {
        bool keep = false;
        for (std::size_t id : out.identities) keep |= (labels[i] == id);
        if (keep) {
            subset.push_back(features[i]);
            subset_labels.push_back(labels[i]);
        }
    }
    check(subset.size() >= 2, "pca2 selection left fewer than two samples");

    const std::size_t dims = std::min<std::size_t>(
        2, std::min(subset.size() - 1, subset.front().size()));
    const PcaModel pca = fit_pca(subset, dims);
    for (std::size_t i = 0; i < subset.size(); ++i) {
        const auto y = pca_project(pca, subset[i]);
        Pca2Row row;
        row.dim1 = y[0];
        row.dim2 = dims > 1 ? y[1] : 0.0;
        row.identity = subset_labels[i];
        out.rows.push_back(row);
    }
    return out;
}

}  // namespace facekit
