#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "facekit/tensor.hpp"
#include "facekit/threshold.hpp"

namespace facekit {

using FeatureVec = std::vector<double>;

enum class VerifKind { L2, L2Plus, L2Minus, L1, Cosine, None };

inline const char* verif_kind_name(VerifKind k) {
    switch (k) {
        case VerifKind::L2: return "l2";
        case VerifKind::L2Plus: return "l2plus";
        case VerifKind::L2Minus: return "l2minus";
        case VerifKind::L1: return "l1";
        case VerifKind::Cosine: return "cosine";
        case VerifKind::None: return "none";
    }
    return "?";
}

inline VerifKind verif_kind_from_name(const std::string& s) {
    if (s == "l2") return VerifKind::L2;
    if (s == "l2plus" || s == "l2+") return VerifKind::L2Plus;
    if (s == "l2minus" || s == "l2-") return VerifKind::L2Minus;
    if (s == "l1") return VerifKind::L1;
    if (s == "cosine") return VerifKind::Cosine;
    if (s == "none") return VerifKind::None;
    fail("unknown verification kind '", s, "'");
}

struct IdentLossResult {
    double loss = 0.0;
    FeatureVec dfeature;
    Matrix dweight;
    std::vector<double> dbias;
    std::vector<double> probabilities;
};

// Softmax cross-entropy over the identity classes: loss = -log p_target.
inline IdentLossResult ident_loss(const FeatureVec& f, std::size_t target, const Matrix& weight,
                                  const std::vector<double>& bias) {
    const std::size_t n = weight.rows();
    check(weight.cols() == f.size(), "identity head expects ", weight.cols(),
          "-dim features, got ", f.size());
    check(bias.size() == n, "identity head bias length ", bias.size(), " vs ", n, " classes");
    check(target < n, "target class ", target, " out of range [0, ", n, ")");

    std::vector<double> logits(n);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = bias[i];
        for (std::size_t j = 0; j < f.size(); ++j) acc += weight(i, j) * f[j];
        logits[i] = acc;
    }
    const double zmax = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (double& z : logits) {
        z = std::exp(z - zmax);
        denom += z;
    }

    IdentLossResult r;
    r.probabilities.resize(n);
    for (std::size_t i = 0; i < n; ++i) r.probabilities[i] = logits[i] / denom;
    r.loss = -std::log(std::max(r.probabilities[target], 1e-300));

    std::vector<double> dlogits = r.probabilities;
    dlogits[target] -= 1.0;
    r.dweight = Matrix(n, f.size());
    r.dbias = dlogits;
    r.dfeature.assign(f.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double g = dlogits[i];
        if (g == 0.0) continue;
        for (std::size_t j = 0; j < f.size(); ++j) {
            r.dweight(i, j) = g * f[j];
            r.dfeature[j] += g * weight(i, j);
        }
    }
    return r;
}

struct VerifLossResult {
    double loss = 0.0;
    FeatureVec df_i, df_j;
    double dw = 0.0;  // cosine scale gradient
    double db = 0.0;  // cosine shift gradient
};

// Contrastive loss: pull genuine pairs together, push impostor pairs beyond
// the margin. Subgradient 0 at the non-differentiable points.
inline VerifLossResult verif_loss_l2(const FeatureVec& fi, const FeatureVec& fj, int y,
                                     double margin) {
    check(fi.size() == fj.size(), "pair dimensionality mismatch: ", fi.size(), " vs ", fj.size());
    check(margin >= 0.0, "margin must be nonnegative, got ", margin);
    const std::size_t d = fi.size();
    VerifLossResult r;
    r.df_i.assign(d, 0.0);
    r.df_j.assign(d, 0.0);
    if (y == 1) {
        double acc = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            const double diff = fi[k] - fj[k];
            acc += diff * diff;
            r.df_i[k] = diff;
            r.df_j[k] = -diff;
        }
        r.loss = 0.5 * acc;
        return r;
    }
    const double dist = l2_distance(fi, fj);
    if (dist >= margin) return r;
    const double gap = margin - dist;
    r.loss = 0.5 * gap * gap;
    if (dist > 0.0) {
        const double coeff = -gap / dist;
        for (std::size_t k = 0; k < d; ++k) {
            const double diff = fi[k] - fj[k];
            r.df_i[k] = coeff * diff;
            r.df_j[k] = -coeff * diff;
        }
    }
    return r;
}

// L1 analog: |fi - fj|_1 for genuine pairs, a linear hinge for impostors.
inline VerifLossResult verif_loss_l1(const FeatureVec& fi, const FeatureVec& fj, int y,
                                     double margin) {
    check(fi.size() == fj.size(), "pair dimensionality mismatch: ", fi.size(), " vs ", fj.size());
    check(margin >= 0.0, "margin must be nonnegative, got ", margin);
    const std::size_t d = fi.size();
    VerifLossResult r;
    r.df_i.assign(d, 0.0);
    r.df_j.assign(d, 0.0);
    auto sgn = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
    double dist = 0.0;
    for (std::size_t k = 0; k < d; ++k) dist += std::abs(fi[k] - fj[k]);
    if (y == 1) {
        r.loss = dist;
        for (std::size_t k = 0; k < d; ++k) {
            const double s = sgn(fi[k] - fj[k]);
            r.df_i[k] = s;
            r.df_j[k] = -s;
        }
        return r;
    }
    if (dist >= margin) return r;
    r.loss = margin - dist;
    for (std::size_t k = 0; k < d; ++k) {
        const double s = sgn(fi[k] - fj[k]);
        r.df_i[k] = -s;
        r.df_j[k] = s;
    }
    return r;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Squared error between a sigmoid-calibrated cosine similarity and the binary
// same-identity target (same -> 1, different -> 0; the sigmoid cannot reach
// a -1 target).
inline VerifLossResult verif_loss_cosine(const FeatureVec& fi, const FeatureVec& fj, int y,
                                         double w, double b) {
    check(fi.size() == fj.size(), "pair dimensionality mismatch: ", fi.size(), " vs ", fj.size());
    const double ni = l2_norm(fi);
    const double nj = l2_norm(fj);
    check(ni > 0.0 && nj > 0.0, "cosine loss requires nonzero feature norms (", ni, ", ", nj, ")");
    const std::size_t d = fi.size();
    const double target = (y == 1) ? 1.0 : 0.0;

    const double ip = dot(fi, fj);
    const double cos_sim = ip / (ni * nj);
    const double s = sigmoid(w * cos_sim + b);

    VerifLossResult r;
    r.loss = 0.5 * (target - s) * (target - s);
    const double dpre = (s - target) * s * (1.0 - s);  // dL/d(w*d + b)
    r.dw = dpre * cos_sim;
    r.db = dpre;
    const double dcos = dpre * w;
    r.df_i.resize(d);
    r.df_j.resize(d);
    for (std::size_t k = 0; k < d; ++k) {
        r.df_i[k] = dcos * (fj[k] / (ni * nj) - cos_sim * fi[k] / (ni * ni));
        r.df_j[k] = dcos * (fi[k] / (ni * nj) - cos_sim * fj[k] / (nj * nj));
    }
    return r;
}

// Dispatcher used by the trainer. The restricted variants evaluate only one
// side of the pair label; None contributes nothing.
inline VerifLossResult verif_loss(VerifKind kind, const FeatureVec& fi, const FeatureVec& fj,
                                  int y, double margin, double cos_w, double cos_b) {
    check(y == 1 || y == -1, "pair label must be +1 or -1, got ", y);
    VerifLossResult zero;
    zero.df_i.assign(fi.size(), 0.0);
    zero.df_j.assign(fj.size(), 0.0);
    switch (kind) {
        case VerifKind::L2: return verif_loss_l2(fi, fj, y, margin);
        case VerifKind::L2Plus: return y == 1 ? verif_loss_l2(fi, fj, y, margin) : zero;
        case VerifKind::L2Minus: return y == -1 ? verif_loss_l2(fi, fj, y, margin) : zero;
        case VerifKind::L1: return verif_loss_l1(fi, fj, y, margin);
        case VerifKind::Cosine: return verif_loss_cosine(fi, fj, y, cos_w, cos_b);
        case VerifKind::None: return zero;
    }
    return zero;
}

// Sliding window of recent (distance, same-identity) observations feeding the
// adaptive margin rule: the margin is reset to the threshold with the lowest
// verification error over the window.
class MarginState {
public:
    explicit MarginState(double initial_margin = 1.0, std::size_t capacity = 1000)
        : margin_(initial_margin), capacity_(capacity) {
        check(capacity_ >= 1, "margin buffer capacity must be >= 1");
        check(initial_margin >= 0.0, "margin must be nonnegative");
    }

    void push(double distance, bool same) {
        if (buffer_.size() < capacity_) {
            buffer_.push_back({distance, same});
        } else {
            buffer_[next_] = {distance, same};
            next_ = (next_ + 1) % capacity_;
        }
    }

    // Returns false (and keeps the margin) when the buffer is empty.
    bool update() {
        if (buffer_.empty()) return false;
        std::vector<double> distances(buffer_.size());
        std::vector<bool> same(buffer_.size());
        for (std::size_t i = 0; i < buffer_.size(); ++i) {
            distances[i] = buffer_[i].first;
            same[i] = buffer_[i].second;
        }
        margin_ = best_margin_lower_same(distances, same).threshold;
        return true;
    }

    double margin() const { return margin_; }
    std::size_t buffered() const { return buffer_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool full() const { return buffer_.size() == capacity_; }

private:
    double margin_;
    std::size_t capacity_;
    std::vector<std::pair<double, bool>> buffer_;
    std::size_t next_ = 0;
};

inline bool update_margin(MarginState& state) { return state.update(); }

}  // namespace facekit
