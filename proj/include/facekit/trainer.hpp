#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "facekit/convnet.hpp"
#include "facekit/dataset.hpp"
#include "facekit/losses.hpp"
#include "facekit/threshold.hpp"

namespace facekit {

struct LearningRateSchedule {
    double initial = 0.01;
    double decay = 0.5;
    std::size_t interval_epochs = 5;

    double at_epoch(std::size_t epoch) const {
        check(initial > 0.0, "learning rate must be positive");
        if (interval_epochs == 0 || decay == 1.0) return initial;
        double rate = initial;
        for (std::size_t e = interval_epochs; e <= epoch; e += interval_epochs) rate *= decay;
        return rate;
    }
};

struct TrainConfig {
    double lambda = 0.05;
    bool lambda_infinite = false;  // verification-only mode; lambda is ignored
    VerifKind verif = VerifKind::L2;
    LearningRateSchedule lr;
    std::size_t epochs = 20;
    std::size_t pairs_per_epoch = 0;  // 0: twice the training-set size
    std::size_t batch_pairs = 64;
    double positive_fraction = 0.5;
    std::uint64_t seed = 1;
    std::size_t margin_capacity = 1000;
    std::size_t margin_update_interval = 100;
    std::size_t val_pairs = 300;
    std::size_t early_stop_patience = 5;  // 0 disables early stopping
    std::size_t ident_subset = 0;  // identification restricted to the first k identities; 0 = all

    void validate() const {
        check(lambda >= 0.0, "lambda must be nonnegative");
        check(positive_fraction > 0.0 && positive_fraction < 1.0,
              "positive fraction must lie in (0, 1)");
        check(lr.initial > 0.0, "learning rate must be positive");
        check(epochs >= 1 && batch_pairs >= 1, "epochs and batch size must be >= 1");
    }
};

struct PairSample {
    std::size_t i = 0, j = 0;
    int y = 0;  // +1 same identity, -1 different
};

// Tab-style pair sampling: a coin with the configured positive fraction picks
// genuine vs impostor; genuine needs an identity with two distinct images and
// falls back to an impostor pair (counted) when none exists.
inline PairSample sample_pair(const LabeledDataset& ds, double positive_fraction,
                              std::mt19937_64& rng, std::size_t* forced_negatives = nullptr) {
    check(ds.n_identities() >= 2, "pair sampling needs at least two identities");
    std::bernoulli_distribution want_positive(positive_fraction);
    std::uniform_int_distribution<std::size_t> pick_identity(0, ds.n_identities() - 1);

    PairSample p;
    if (want_positive(rng)) {
        std::vector<std::size_t> rich;
        for (std::size_t id = 0; id < ds.n_identities(); ++id)
            if (ds.by_identity[id].size() >= 2) rich.push_back(id);
        if (!rich.empty()) {
            std::uniform_int_distribution<std::size_t> pick_rich(0, rich.size() - 1);
            const auto& group = ds.by_identity[rich[pick_rich(rng)]];
            std::uniform_int_distribution<std::size_t> pick(0, group.size() - 1);
            p.i = group[pick(rng)];
            do {
                p.j = group[pick(rng)];
            } while (p.j == p.i);
            p.y = 1;
            return p;
        }
        if (forced_negatives) ++*forced_negatives;
    }
    std::size_t id_a = pick_identity(rng);
    std::size_t id_b;
    do {
        id_b = pick_identity(rng);
    } while (id_b == id_a);
    std::uniform_int_distribution<std::size_t> pick_a(0, ds.by_identity[id_a].size() - 1);
    std::uniform_int_distribution<std::size_t> pick_b(0, ds.by_identity[id_b].size() - 1);
    p.i = ds.by_identity[id_a][pick_a(rng)];
    p.j = ds.by_identity[id_b][pick_b(rng)];
    p.y = -1;
    return p;
}

struct StepLosses {
    double ident = 0.0;
    double verif = 0.0;
    double pair_distance = 0.0;  // L2 distance of the two embeddings
};

// One pair's contribution to the joint objective: identification losses for
// both members plus the lambda-weighted verification loss, all gradients
// accumulated into `grads`. In verification-only mode the identification
// terms are dropped and the verification gradient is used unweighted.
inline StepLosses accumulate_pair_gradients(const Tensor& xi, std::size_t li, const Tensor& xj,
                                            std::size_t lj, const NetworkParams& params,
                                            const NetworkConfig& net, const TrainConfig& cfg,
                                            ParamGradients& grads) {
    const int y = (li == lj) ? 1 : -1;
    const auto fi = forward(xi, params, net);
    const auto fj = forward(xj, params, net);

    StepLosses losses;
    FeatureVec dfi(net.embedding_dim, 0.0);
    FeatureVec dfj(net.embedding_dim, 0.0);
    const bool use_ident = !cfg.lambda_infinite;
    const double verif_weight = cfg.lambda_infinite ? 1.0 : cfg.lambda;
    const std::size_t head_classes = params.n_classes();

    if (use_ident) {
        if (li < head_classes) {
            const auto ri = ident_loss(fi.feature, li, params.softmax_weight, params.softmax_bias);
            losses.ident += ri.loss;
            for (std::size_t k = 0; k < dfi.size(); ++k) dfi[k] += ri.dfeature[k];
            for (std::size_t k = 0; k < ri.dweight.values().size(); ++k)
                grads.softmax_weight.values()[k] += ri.dweight.values()[k];
            for (std::size_t k = 0; k < ri.dbias.size(); ++k) grads.softmax_bias[k] += ri.dbias[k];
        }
        if (lj < head_classes) {
            const auto rj = ident_loss(fj.feature, lj, params.softmax_weight, params.softmax_bias);
            losses.ident += rj.loss;
            for (std::size_t k = 0; k < dfj.size(); ++k) dfj[k] += rj.dfeature[k];
            for (std::size_t k = 0; k < rj.dweight.values().size(); ++k)
                grads.softmax_weight.values()[k] += rj.dweight.values()[k];
            for (std::size_t k = 0; k < rj.dbias.size(); ++k) grads.softmax_bias[k] += rj.dbias[k];
        }
    }

    if (cfg.verif != VerifKind::None) {
        const auto rv = verif_loss(cfg.verif, fi.feature, fj.feature, y, params.margin,
                                   params.cosine_w, params.cosine_b);
        losses.verif = rv.loss;
        for (std::size_t k = 0; k < dfi.size(); ++k) {
            dfi[k] += verif_weight * rv.df_i[k];
            dfj[k] += verif_weight * rv.df_j[k];
        }
        grads.cosine_w += verif_weight * rv.dw;
        grads.cosine_b += verif_weight * rv.db;
    }
    losses.pair_distance = l2_distance(fi.feature, fj.feature);

    const auto bi = backward(dfi, fi.trace, params, net);
    const auto bj = backward(dfj, fj.trace, params, net);
    axpy_params(grads, 1.0, bi.grads);
    axpy_params(grads, 1.0, bj.grads);
    return losses;
}

// Single-pair SGD step (the batched loop in train() uses the same gradient
// path with averaging).
inline StepLosses train_step(const Tensor& xi, std::size_t li, const Tensor& xj, std::size_t lj,
                             NetworkParams& params, const NetworkConfig& net,
                             const TrainConfig& cfg, double learning_rate) {
    ParamGradients grads = zeros_like(params);
    const StepLosses losses = accumulate_pair_gradients(xi, li, xj, lj, params, net, cfg, grads);
    check(std::isfinite(losses.ident) && std::isfinite(losses.verif),
          "non-finite loss in training step (ident=", losses.ident, ", verif=", losses.verif, ")");
    axpy_params(params, -learning_rate, grads);
    return losses;
}

struct EpochStats {
    std::size_t epoch = 0;
    double ident_loss = 0.0;
    double verif_loss = 0.0;
    double val_accuracy = 0.0;
    double margin = 0.0;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    std::size_t forced_negative_resamples = 0;
    std::size_t best_epoch = 0;
    double best_val_accuracy = 0.0;
};

struct ValPairSet {
    std::vector<PairSample> pairs;
};

inline ValPairSet build_validation_pairs(const LabeledDataset& val, std::size_t count,
                                         std::uint64_t seed) {
    ValPairSet set;
    std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ull);
    for (std::size_t k = 0; k < count; ++k) set.pairs.push_back(sample_pair(val, 0.5, rng));
    return set;
}

inline std::vector<FeatureVec> embed_dataset(const LabeledDataset& ds, const NetworkParams& params,
                                             const NetworkConfig& net) {
    std::vector<FeatureVec> out(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) out[i] = forward(ds.images[i], params, net).feature;
    return out;
}

// Verification accuracy of the embedding under the L2 distance with the best
// threshold on the given pairs.
inline double l2_pair_accuracy(const std::vector<FeatureVec>& features, const ValPairSet& pairs) {
    std::vector<double> distances;
    std::vector<bool> same;
    distances.reserve(pairs.pairs.size());
    for (const auto& p : pairs.pairs) {
        distances.push_back(l2_distance(features[p.i], features[p.j]));
        same.push_back(p.y == 1);
    }
    return best_margin_lower_same(distances, same).accuracy;
}

inline TrainReport train(const LabeledDataset& train_ds, const LabeledDataset& val_ds,
                         const NetworkConfig& net, const TrainConfig& cfg, NetworkParams& params) {
    cfg.validate();
    check(train_ds.size() >= 2, "training set is empty or trivial");
    check(val_ds.size() >= 2, "validation set is empty or trivial");

    std::mt19937_64 rng(cfg.seed);
    const std::size_t pairs_per_epoch =
        cfg.pairs_per_epoch > 0 ? cfg.pairs_per_epoch : 2 * train_ds.size();
    const ValPairSet val_pairs = build_validation_pairs(val_ds, cfg.val_pairs, cfg.seed);

    MarginState margin_state(params.margin, cfg.margin_capacity);
    bool margin_seeded = false;
    std::size_t pairs_seen = 0;

    TrainReport report;
    NetworkParams best_params = params;
    std::size_t epochs_since_best = 0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cfg.lr.at_epoch(epoch);
        double ident_sum = 0.0, verif_sum = 0.0;
        std::size_t pair_count = 0;

        std::size_t remaining = pairs_per_epoch;
        while (remaining > 0) {
            const std::size_t batch = std::min(cfg.batch_pairs, remaining);
            remaining -= batch;
            ParamGradients grads = zeros_like(params);
            for (std::size_t b = 0; b < batch; ++b) {
                const PairSample p =
                    sample_pair(train_ds, cfg.positive_fraction, rng,
                                &report.forced_negative_resamples);
                const StepLosses losses = accumulate_pair_gradients(
                    train_ds.images[p.i], train_ds.labels[p.i], train_ds.images[p.j],
                    train_ds.labels[p.j], params, net, cfg, grads);
                check(std::isfinite(losses.ident) && std::isfinite(losses.verif),
                      "non-finite loss at epoch ", epoch, " (ident=", losses.ident,
                      ", verif=", losses.verif, ")");
                ident_sum += losses.ident;
                verif_sum += losses.verif;
                ++pair_count;

                if (cfg.verif == VerifKind::L2 || cfg.verif == VerifKind::L2Plus ||
                    cfg.verif == VerifKind::L2Minus) {
                    margin_state.push(losses.pair_distance, p.y == 1);
                    ++pairs_seen;
                    const bool fill_trigger = !margin_seeded && margin_state.full();
                    const bool interval_trigger =
                        margin_seeded && cfg.margin_update_interval > 0 &&
                        pairs_seen % cfg.margin_update_interval == 0;
                    if (fill_trigger || interval_trigger) {
                        margin_state.update();
                        params.margin = margin_state.margin();
                        margin_seeded = true;
                    }
                }
            }
            scale_params(grads, 1.0 / static_cast<double>(batch));
            axpy_params(params, -lr, grads);
            check(params_all_finite(params), "parameters became non-finite at epoch ", epoch);
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.ident_loss = pair_count ? ident_sum / static_cast<double>(pair_count) : 0.0;
        stats.verif_loss = pair_count ? verif_sum / static_cast<double>(pair_count) : 0.0;
        stats.margin = params.margin;
        stats.val_accuracy = l2_pair_accuracy(embed_dataset(val_ds, params, net), val_pairs);
        report.epochs.push_back(stats);

        if (report.epochs.size() == 1 || stats.val_accuracy > report.best_val_accuracy) {
            report.best_val_accuracy = stats.val_accuracy;
            report.best_epoch = epoch;
            best_params = params;
            epochs_since_best = 0;
        } else {
            ++epochs_since_best;
            if (cfg.early_stop_patience > 0 && epochs_since_best >= cfg.early_stop_patience) break;
        }
    }
    params = best_params;
    return report;
}

}  // namespace facekit
