#pragma once

#include <map>
#include <vector>

#include "facekit/alignment.hpp"
#include "facekit/convnet.hpp"
#include "facekit/dataset.hpp"
#include "facekit/joint_bayes.hpp"
#include "facekit/pca.hpp"
#include "facekit/selection.hpp"
#include "facekit/threshold.hpp"
#include "facekit/trainer.hpp"

namespace facekit {

struct PatchNetwork {
    NetworkParams params;
    NetworkConfig config;
};

// Canonical frame shared by every patch: the landmark template images are
// aligned to, plus the frame center used by globally anchored patches.
struct AlignmentContext {
    LandmarkSet canonical;
    std::array<double, 2> center{0.0, 0.0};
};

inline AlignmentContext default_alignment_context(std::size_t height, std::size_t width) {
    AlignmentContext ctx;
    const double w = static_cast<double>(width), h = static_cast<double>(height);
    ctx.canonical.points = {{w / 4.0, h / 3.0},
                            {3.0 * w / 4.0, h / 3.0},
                            {w / 2.0, h / 2.0},
                            {w / 2.0, 3.0 * h / 4.0}};
    ctx.center = {(w - 1.0) / 2.0, (h - 1.0) / 2.0};
    return ctx;
}

inline SimilarityTransform align_to_canonical(const LandmarkSet& landmarks,
                                              const AlignmentContext& ctx) {
    if (landmarks.points.empty() || ctx.canonical.points.empty()) return {};
    check(landmarks.points.size() == ctx.canonical.points.size(),
          "image has ", landmarks.points.size(), " landmarks but the canonical template has ",
          ctx.canonical.points.size());
    return estimate_similarity(landmarks, ctx.canonical).transform;
}

inline Tensor patch_image(const Tensor& image, const LandmarkSet& landmarks,
                          const PatchSpec& spec, const AlignmentContext& ctx) {
    const SimilarityTransform to_canonical = align_to_canonical(landmarks, ctx);
    const auto anchor = patch_anchor(spec, landmarks, to_canonical, ctx.center);
    return extract_patch(image, spec, to_canonical, anchor);
}

// Dataset view through one patch spec: every image replaced by its aligned crop.
inline LabeledDataset build_patch_dataset(const LabeledDataset& ds, const PatchSpec& spec,
                                          const AlignmentContext& ctx) {
    LabeledDataset out;
    out.labels = ds.labels;
    out.images.reserve(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        LandmarkSet lm;
        if (ds.has_landmarks()) lm.points = ds.landmarks[i];
        out.images.push_back(patch_image(ds.images[i], lm, spec, ctx));
    }
    out.rebuild_index();
    return out;
}

// Concatenated embedding across the patch ensemble; spec order defines block
// order, a spec and its flipped twin share the network keyed by network_id.
inline FeatureVec extract_ensemble(const Tensor& image, const LandmarkSet& landmarks,
                                   const std::vector<PatchSpec>& specs,
                                   const std::map<std::size_t, PatchNetwork>& networks,
                                   const AlignmentContext& ctx) {
    FeatureVec out;
    for (const auto& spec : specs) {
        const auto it = networks.find(spec.network_id);
        check(it != networks.end(), "no trained network for patch '", spec.name,
              "' (network_id ", spec.network_id, ")");
        const Tensor patch = patch_image(image, landmarks, spec, ctx);
        const FeatureVec f = forward(patch, it->second.params, it->second.config).feature;
        out.insert(out.end(), f.begin(), f.end());
    }
    return out;
}

// Per-patch embeddings for a whole dataset: features[patch][image].
inline std::vector<std::vector<FeatureVec>> extract_patch_features(
    const LabeledDataset& ds, const std::vector<PatchSpec>& specs,
    const std::map<std::size_t, PatchNetwork>& networks, const AlignmentContext& ctx) {
    std::vector<std::vector<FeatureVec>> features(specs.size());
    for (std::size_t p = 0; p < specs.size(); ++p) {
        const auto it = networks.find(specs[p].network_id);
        check(it != networks.end(), "no trained network for patch '", specs[p].name, "'");
        features[p].reserve(ds.size());
        const LabeledDataset patches = build_patch_dataset(ds, specs[p], ctx);
        for (std::size_t i = 0; i < patches.size(); ++i)
            features[p].push_back(
                forward(patches.images[i], it->second.params, it->second.config).feature);
    }
    return features;
}


// L2 verification accuracy of the concatenated subset features over a fixed
// pair list; the default greedy-selection evaluator.
inline SubsetEvaluator make_l2_subset_evaluator(
    const std::vector<std::vector<FeatureVec>>& per_patch, const std::vector<PairSample>& pairs) {
    double majority;
    {
        std::size_t n_same = 0;
        for (const auto& p : pairs) n_same += p.y == 1 ? 1 : 0;
        const double frac = static_cast<double>(n_same) / static_cast<double>(pairs.size());
        majority = std::max(frac, 1.0 - frac);
    }
    return [&per_patch, pairs, majority](const std::vector<std::size_t>& subset) {
        if (subset.empty()) return majority;
        std::vector<double> distances;
        std::vector<bool> same;
        distances.reserve(pairs.size());
        for (const auto& pr : pairs) {
            double acc = 0.0;
            for (std::size_t p : subset) {
                const FeatureVec& a = per_patch[p][pr.i];
                const FeatureVec& b = per_patch[p][pr.j];
                for (std::size_t k = 0; k < a.size(); ++k) {
                    const double diff = a[k] - b[k];
                    acc += diff * diff;
                }
            }
            distances.push_back(std::sqrt(acc));
            same.push_back(pr.y == 1);
        }
        return best_margin_lower_same(distances, same).accuracy;
    };
}

// Joint Bayesian evaluator: concatenate the subset, compress by PCA, fit the
// model on the grouped fit-set features, score the validation pairs.
inline SubsetEvaluator make_jb_subset_evaluator(
    const std::vector<std::vector<FeatureVec>>& fit_features,
    const std::vector<std::size_t>& fit_labels,
    const std::vector<std::vector<FeatureVec>>& val_features,
    const std::vector<PairSample>& val_pairs, std::size_t pca_dim, const EmOptions& em = {}) {
    double majority;
    {
        std::size_t n_same = 0;
        for (const auto& p : val_pairs) n_same += p.y == 1 ? 1 : 0;
        const double frac = static_cast<double>(n_same) / static_cast<double>(val_pairs.size());
        majority = std::max(frac, 1.0 - frac);
    }
    return [&fit_features, fit_labels, &val_features, val_pairs, pca_dim,
            em, majority](const std::vector<std::size_t>& subset) {
        if (subset.empty()) return majority;
        const std::size_t n_fit = fit_features.front().size();
        auto concat = [&](const std::vector<std::vector<FeatureVec>>& src, std::size_t i) {
            FeatureVec out;
            for (std::size_t p : subset) {
                const FeatureVec& f = src[p][i];
                out.insert(out.end(), f.begin(), f.end());
            }
            return out;
        };
        std::vector<FeatureVec> fit_concat(n_fit);
        for (std::size_t i = 0; i < n_fit; ++i) fit_concat[i] = concat(fit_features, i);
        const std::size_t dim =
            std::min(pca_dim, std::min(n_fit - 1, fit_concat.front().size()));
        const PcaModel pca = fit_pca(fit_concat, dim);

        std::size_t c = 0;
        for (std::size_t l : fit_labels) c = std::max(c, l + 1);
        std::vector<std::vector<FeatureVec>> groups(c);
        for (std::size_t i = 0; i < n_fit; ++i)
            groups[fit_labels[i]].push_back(pca_project(pca, fit_concat[i]));
        const JointBayesModel model = fit_em(groups, em);

        std::vector<double> scores;
        std::vector<bool> same;
        for (const auto& pr : val_pairs) {
            const FeatureVec a = pca_project(pca, concat(val_features, pr.i));
            const FeatureVec b = pca_project(pca, concat(val_features, pr.j));
            scores.push_back(score(model, a, b));
            same.push_back(pr.y == 1);
        }
        return best_threshold_higher_same(scores, same).accuracy;
    };
}

// Desk-scale candidate pool: whole-face view plus region and zoom crops, one
// network per patch, grayscale.
inline std::vector<PatchSpec> default_patch_pool(std::size_t out_h, std::size_t out_w) {
    const double h = static_cast<double>(out_h), w = static_cast<double>(out_w);
    std::vector<PatchSpec> pool;
    PatchSpec whole;
    whole.name = "whole_face";
    whole.out_h = out_h;
    whole.out_w = out_w;
    whole.scale = 1.0;
    whole.network_id = 0;
    pool.push_back(whole);

    PatchSpec zoom;
    zoom.name = "center_zoom";
    zoom.out_h = out_h;
    zoom.out_w = out_w;
    zoom.scale = 0.6;
    zoom.network_id = 1;
    pool.push_back(zoom);

    PatchSpec upper;
    upper.name = "upper_region";
    upper.out_h = out_h;
    upper.out_w = out_w;
    upper.scale = 0.7;
    upper.offset_y = -h / 5.0;
    upper.network_id = 2;
    pool.push_back(upper);

    PatchSpec lower;
    lower.name = "lower_region";
    lower.out_h = out_h;
    lower.out_w = out_w;
    lower.scale = 0.7;
    lower.offset_y = h / 5.0;
    lower.network_id = 3;
    pool.push_back(lower);
    (void)w;
    return pool;
}

}  // namespace facekit
