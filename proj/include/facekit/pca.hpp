#pragma once

#include <vector>

#include "facekit/linalg.hpp"
#include "facekit/tensor.hpp"

namespace facekit {

struct PcaModel {
    std::vector<double> mean;
    Matrix basis;  // [dim, out_dim], orthonormal columns (top eigenvectors)
    std::vector<double> eigenvalues;       // all eigenvalues, descending
    std::vector<double> explained_ratio;   // per retained component

    std::size_t in_dim() const { return mean.size(); }
    std::size_t out_dim() const { return basis.cols(); }
};

inline PcaModel fit_pca(const std::vector<std::vector<double>>& data, std::size_t out_dim) {
    check(!data.empty(), "PCA needs data");
    const std::size_t n = data.size();
    const std::size_t d = data.front().size();
    check(d >= 1, "PCA needs non-empty vectors");
    for (const auto& x : data)
        check(x.size() == d, "PCA data dimensionality is not uniform");
    check(n >= 2, "PCA needs at least two samples");
    check(out_dim >= 1 && out_dim <= std::min(n - 1, d), "PCA out_dim ", out_dim,
          " must lie in [1, min(samples-1, dim)] = [1, ", std::min(n - 1, d), "]");

    PcaModel m;
    m.mean.assign(d, 0.0);
    for (const auto& x : data)
        for (std::size_t i = 0; i < d; ++i) m.mean[i] += x[i];
    for (double& v : m.mean) v /= static_cast<double>(n);

    Matrix cov(d, d);
    for (const auto& x : data) {
        std::vector<double> c(d);
        for (std::size_t i = 0; i < d; ++i) c[i] = x[i] - m.mean[i];
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) cov(i, j) += c[i] * c[j];
    }
    cov *= 1.0 / static_cast<double>(n - 1);

    const EigenResult eig = sym_eigendecompose(cov);
    m.eigenvalues = eig.eigenvalues;
    for (double& v : m.eigenvalues) v = std::max(v, 0.0);  // clamp eigensolver jitter

    double total = 0.0;
    for (double v : m.eigenvalues) total += v;
    m.basis = Matrix(d, out_dim);
    m.explained_ratio.resize(out_dim);
    for (std::size_t k = 0; k < out_dim; ++k) {
        for (std::size_t r = 0; r < d; ++r) m.basis(r, k) = eig.eigenvectors(r, k);
        m.explained_ratio[k] = total > 0.0 ? m.eigenvalues[k] / total : 0.0;
    }
    return m;
}

inline std::vector<double> pca_project(const PcaModel& m, const std::vector<double>& x) {
    check(x.size() == m.in_dim(), "PCA projection expects ", m.in_dim(), "-dim input, got ",
          x.size());
    std::vector<double> y(m.out_dim(), 0.0);
    for (std::size_t k = 0; k < m.out_dim(); ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < m.in_dim(); ++i)
            acc += m.basis(i, k) * (x[i] - m.mean[i]);
        y[k] = acc;
    }
    return y;
}

inline std::vector<double> pca_reconstruct(const PcaModel& m, const std::vector<double>& y) {
    check(y.size() == m.out_dim(), "PCA reconstruction expects ", m.out_dim(),
          "-dim input, got ", y.size());
    std::vector<double> x = m.mean;
    for (std::size_t i = 0; i < m.in_dim(); ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < m.out_dim(); ++k) acc += m.basis(i, k) * y[k];
        x[i] += acc;
    }
    return x;
}

}  // namespace facekit
