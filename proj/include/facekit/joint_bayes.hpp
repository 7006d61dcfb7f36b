#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "facekit/linalg.hpp"
#include "facekit/tensor.hpp"
#include "facekit/threshold.hpp"

namespace facekit {

using FeatureVec = std::vector<double>;

// Generative verification model: a feature decomposes as identity component
// plus residual, both zero-mean Gaussians. Pairs are scored by the
// log-likelihood ratio of the shared-identity hypothesis against the
// independent-identity hypothesis (higher = more likely the same person).
struct JointBayesModel {
    Matrix s_identity;  // between-identity covariance
    Matrix s_residual;  // within-identity covariance
    std::vector<double> mean;

    // score(f1, f2) = q(f1) + q(f2) + 2 * f1' cross f2 + constant, with
    // q(f) = f' quad f on mean-centered features. The quadratic forms come
    // from the block inverse of the joint pair covariance.
    Matrix quad;
    Matrix cross;
    double constant = 0.0;

    std::size_t dim() const { return mean.size(); }
};

inline void compute_joint_bayes_scoring(JointBayesModel& m) {
    const std::size_t d = m.mean.size();
    check(m.s_identity.rows() == d && m.s_identity.cols() == d && m.s_residual.rows() == d &&
              m.s_residual.cols() == d,
          "joint bayes covariances must be ", d, "x", d);
    const Matrix f = m.s_identity + m.s_residual;
    const Matrix f_inv = inverse_spd(f);
    // Schur complement of the same-identity joint covariance [[F, Smu],[Smu, F]]
    const Matrix schur = f - matmul(m.s_identity, matmul(f_inv, m.s_identity));
    const Matrix schur_inv = inverse_spd(schur);

    Matrix quad = (f_inv - schur_inv) * 0.5;
    Matrix cross = matmul(f_inv, matmul(m.s_identity, schur_inv)) * 0.5;
    // both are symmetric in exact arithmetic; symmetrize to keep the scoring
    // identity f1'C f2 = f2'C f1 bit-stable
    m.quad = Matrix(d, d);
    m.cross = Matrix(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            m.quad(i, j) = 0.5 * (quad(i, j) + quad(j, i));
            m.cross(i, j) = 0.5 * (cross(i, j) + cross(j, i));
        }
    // log|Sigma_diff| - log|Sigma_same| = 2 log|F| - (log|F| + log|Schur|)
    m.constant = 0.5 * (logdet_spd(f) - logdet_spd(schur));
}

inline JointBayesModel make_joint_bayes(Matrix s_identity, Matrix s_residual,
                                        std::vector<double> mean) {
    JointBayesModel m;
    m.s_identity = std::move(s_identity);
    m.s_residual = std::move(s_residual);
    m.mean = std::move(mean);
    compute_joint_bayes_scoring(m);
    return m;
}

inline double score(const JointBayesModel& m, const FeatureVec& f1, const FeatureVec& f2) {
    const std::size_t d = m.dim();
    check(f1.size() == d && f2.size() == d, "score expects ", d, "-dim features, got ",
          f1.size(), " and ", f2.size());
    FeatureVec a(d), b(d);
    for (std::size_t i = 0; i < d; ++i) {
        a[i] = f1[i] - m.mean[i];
        b[i] = f2[i] - m.mean[i];
    }
    auto quad_form = [&](const FeatureVec& v) {
        double acc = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < d; ++j) row += m.quad(i, j) * v[j];
            acc += v[i] * row;
        }
        return acc;
    };
    // cross term accumulated over unordered index pairs so that swapping the
    // arguments reproduces the identical floating-point sum; the named
    // temporaries keep the compiler from fusing asymmetric multiply-adds
    double cross = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double diag_prod = a[i] * b[i];
        cross += m.cross(i, i) * diag_prod;
        for (std::size_t j = i + 1; j < d; ++j) {
            const double p = a[i] * b[j];
            const double q = a[j] * b[i];
            const double pair_sum = p + q;
            cross += m.cross(i, j) * pair_sum;
        }
    }
    return (quad_form(a) + quad_form(b)) + 2.0 * cross + m.constant;
}

struct EmOptions {
    std::size_t max_iters = 50;
    double tol = 1e-6;
};

struct EmTrace {
    std::vector<double> loglik;  // observed-data log-likelihood after each M-step
    std::size_t iterations = 0;
};

namespace detail {

// Observed-data log-likelihood under the current covariances. Per identity
// group the sample mean and the deviations decouple: the scaled mean is
// Gaussian with covariance n*S_mu + S_eps, the n-1 deviation contrasts are
// Gaussian with covariance S_eps.
inline double jb_observed_loglik(const std::vector<std::vector<FeatureVec>>& groups,
                                 const Matrix& s_mu, const Matrix& s_eps, std::size_t d) {
    const double log2pi = std::log(2.0 * 3.14159265358979323846);
    const Matrix eps_inv = inverse_spd(s_eps);
    const double eps_logdet = logdet_spd(s_eps);
    double total = 0.0;
    for (const auto& group : groups) {
        const double n = static_cast<double>(group.size());
        FeatureVec mean(d, 0.0);
        for (const auto& x : group)
            for (std::size_t i = 0; i < d; ++i) mean[i] += x[i];
        for (double& v : mean) v /= n;

        Matrix mean_cov = s_mu * n + s_eps;
        const Matrix mean_cov_inv = inverse_spd(mean_cov);
        FeatureVec scaled(d);
        for (std::size_t i = 0; i < d; ++i) scaled[i] = std::sqrt(n) * mean[i];
        double q_mean = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < d; ++j) row += mean_cov_inv(i, j) * scaled[j];
            q_mean += scaled[i] * row;
        }
        total += -0.5 * (d * log2pi + logdet_spd(mean_cov) + q_mean);

        double q_dev = 0.0;
        for (const auto& x : group) {
            FeatureVec dev(d);
            for (std::size_t i = 0; i < d; ++i) dev[i] = x[i] - mean[i];
            for (std::size_t i = 0; i < d; ++i) {
                double row = 0.0;
                for (std::size_t j = 0; j < d; ++j) row += eps_inv(i, j) * dev[j];
                q_dev += dev[i] * row;
            }
        }
        total += -0.5 * ((n - 1.0) * (d * log2pi + eps_logdet) + q_dev);
    }
    return total;
}

inline void add_outer(Matrix& acc, const FeatureVec& v, double weight = 1.0) {
    const std::size_t d = v.size();
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) acc(i, j) += weight * v[i] * v[j];
}

inline void regularize_residual(Matrix& s_eps, const Matrix& s_mu) {
    const std::size_t d = s_eps.rows();
    double trace = 0.0;
    for (std::size_t i = 0; i < d; ++i) trace += s_eps(i, i);
    double delta = 1e-6 * trace / static_cast<double>(d);
    if (delta <= 0.0) {
        // no within-identity evidence at all: floor the residual relative to
        // the identity-covariance scale so the model stays invertible
        double mu_trace = 0.0;
        for (std::size_t i = 0; i < d; ++i) mu_trace += s_mu(i, i);
        delta = 1e-9 * std::max(1.0, mu_trace / static_cast<double>(d));
    }
    for (std::size_t i = 0; i < d; ++i) s_eps(i, i) += delta;
}

}  // namespace detail

// EM for the two-Gaussian latent model over identity-grouped features.
// E-step: exact posterior of the identity component per group (mean and
// covariance); M-step: covariances of the posterior expectations plus the
// posterior covariance mass, with a small diagonal floor on the residual.
inline JointBayesModel fit_em(const std::vector<std::vector<FeatureVec>>& groups,
                              const EmOptions& opts = {}, EmTrace* trace = nullptr) {
    check(groups.size() >= 2, "joint bayes needs at least two identities, got ", groups.size());
    std::size_t total_n = 0;
    std::size_t d = 0;
    for (const auto& g : groups) {
        check(!g.empty(), "joint bayes identity group is empty");
        for (const auto& x : g) {
            if (d == 0) d = x.size();
            check(x.size() == d, "feature dimensionality is not uniform (", x.size(), " vs ", d,
                  ")");
            ++total_n;
        }
    }
    check(d >= 1, "features must be non-empty");

    // global mean
    std::vector<double> mean(d, 0.0);
    for (const auto& g : groups)
        for (const auto& x : g)
            for (std::size_t i = 0; i < d; ++i) mean[i] += x[i];
    for (double& v : mean) v /= static_cast<double>(total_n);

    std::vector<std::vector<FeatureVec>> centered(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        centered[g].reserve(groups[g].size());
        for (const auto& x : groups[g]) {
            FeatureVec c(d);
            for (std::size_t i = 0; i < d; ++i) c[i] = x[i] - mean[i];
            centered[g].push_back(std::move(c));
        }
    }

    // moment start: scatter of group means and pooled within-group scatter
    Matrix s_mu(d, d), s_eps(d, d);
    for (const auto& g : centered) {
        const double n = static_cast<double>(g.size());
        FeatureVec gmean(d, 0.0);
        for (const auto& x : g)
            for (std::size_t i = 0; i < d; ++i) gmean[i] += x[i];
        for (double& v : gmean) v /= n;
        detail::add_outer(s_mu, gmean);
        for (const auto& x : g) {
            FeatureVec dev(d);
            for (std::size_t i = 0; i < d; ++i) dev[i] = x[i] - gmean[i];
            detail::add_outer(s_eps, dev);
        }
    }
    s_mu *= 1.0 / static_cast<double>(centered.size());
    s_eps *= 1.0 / static_cast<double>(total_n);
    detail::regularize_residual(s_eps, s_mu);
    // a flat identity start keeps S_mu invertible when group means coincide
    for (std::size_t i = 0; i < d; ++i)
        if (s_mu(i, i) <= 0.0) s_mu(i, i) = 1e-6;

    if (trace) {
        trace->loglik.clear();
        trace->loglik.push_back(detail::jb_observed_loglik(centered, s_mu, s_eps, d));
    }

    std::size_t iter = 0;
    for (; iter < opts.max_iters; ++iter) {
        Matrix mu_inv(d, d), eps_inv(d, d);
        try {
            mu_inv = inverse_spd(s_mu);
            eps_inv = inverse_spd(s_eps);
        } catch (const Error& e) {
            fail("joint bayes covariance became singular despite regularization: ", e.what());
        }

        Matrix new_mu(d, d), new_eps(d, d);
        for (const auto& g : centered) {
            const double n = static_cast<double>(g.size());
            // posterior precision and covariance of the identity component
            Matrix lambda = mu_inv;
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j) lambda(i, j) += n * eps_inv(i, j);
            const Matrix post_cov = inverse_spd(lambda);

            FeatureVec sum(d, 0.0);
            for (const auto& x : g)
                for (std::size_t i = 0; i < d; ++i) sum[i] += x[i];
            const FeatureVec tmp = matvec(eps_inv, sum);
            const FeatureVec post_mean = matvec(post_cov, tmp);

            detail::add_outer(new_mu, post_mean);
            new_mu += post_cov;
            for (const auto& x : g) {
                FeatureVec res(d);
                for (std::size_t i = 0; i < d; ++i) res[i] = x[i] - post_mean[i];
                detail::add_outer(new_eps, res);
            }
            new_eps += post_cov * n;
        }
        new_mu *= 1.0 / static_cast<double>(centered.size());
        new_eps *= 1.0 / static_cast<double>(total_n);
        detail::regularize_residual(new_eps, new_mu);

        const double delta = (new_mu - s_mu).frobenius_norm() + (new_eps - s_eps).frobenius_norm();
        const double scale = s_mu.frobenius_norm() + s_eps.frobenius_norm();
        s_mu = std::move(new_mu);
        s_eps = std::move(new_eps);
        if (trace) trace->loglik.push_back(detail::jb_observed_loglik(centered, s_mu, s_eps, d));
        if (scale > 0.0 && delta / scale < opts.tol) {
            ++iter;
            break;
        }
    }
    if (trace) trace->iterations = iter;

    return make_joint_bayes(std::move(s_mu), std::move(s_eps), std::move(mean));
}

struct FeaturePair {
    FeatureVec a, b;
    bool same = false;
};

// Decision threshold maximizing accuracy on labelled validation pairs.
inline double calibrate_threshold(const JointBayesModel& m, const std::vector<FeaturePair>& pairs) {
    check(!pairs.empty(), "threshold calibration needs validation pairs");
    std::vector<double> scores;
    std::vector<bool> same;
    bool any_same = false, any_diff = false;
    for (const auto& p : pairs) {
        scores.push_back(score(m, p.a, p.b));
        same.push_back(p.same);
        (p.same ? any_same : any_diff) = true;
    }
    check(any_same && any_diff, "threshold calibration needs both pair labels present");
    return best_threshold_higher_same(scores, same).threshold;
}

}  // namespace facekit
