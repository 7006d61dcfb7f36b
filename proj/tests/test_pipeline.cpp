#include <gtest/gtest.h>

#include <random>

#include "facekit/fusion.hpp"
#include "facekit/pipeline.hpp"

using namespace facekit;

namespace {

LandmarkSet rotate90(const LandmarkSet& src) {
    LandmarkSet out;
    for (const auto& p : src.points) out.points.push_back({-p[1], p[0]});
    return out;
}

double transform_residual(const SimilarityTransform& t, const LandmarkSet& src,
                          const LandmarkSet& dst) {
    double acc = 0.0;
    for (std::size_t i = 0; i < src.points.size(); ++i) {
        const auto p = t.apply(src.points[i][0], src.points[i][1]);
        const double ex = p[0] - dst.points[i][0];
        const double ey = p[1] - dst.points[i][1];
        acc += ex * ex + ey * ey;
    }
    return std::sqrt(acc / src.points.size());
}

}  // namespace

TEST(Similarity, IdenticalSetsGiveIdentity) {
    LandmarkSet src;
    src.points = {{1, 2}, {4, 5}, {-2, 3}};
    const SimilarityFit fit = estimate_similarity(src, src);
    EXPECT_NEAR(fit.transform.scale, 1.0, 1e-12);
    EXPECT_NEAR(fit.transform.angle, 0.0, 1e-12);
    EXPECT_NEAR(fit.transform.tx, 0.0, 1e-12);
    EXPECT_NEAR(fit.transform.ty, 0.0, 1e-12);
    EXPECT_NEAR(fit.rms_residual, 0.0, 1e-12);
}

TEST(Similarity, RecoverNinetyDegreeRotation) {
    LandmarkSet src;
    src.points = {{1, 0}, {0, 1}, {2, 3}, {-1, 1}};
    const LandmarkSet dst = rotate90(src);
    const SimilarityFit fit = estimate_similarity(src, dst);
    EXPECT_NEAR(fit.transform.angle, M_PI / 2.0, 1e-12);
    EXPECT_NEAR(fit.transform.scale, 1.0, 1e-12);
    EXPECT_NEAR(fit.rms_residual, 0.0, 1e-10);
}

TEST(Similarity, LeastSquaresBeatsGridRefinementOracle) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> noise(0.0, 0.05);
    std::uniform_real_distribution<double> coord(-3.0, 3.0);

    LandmarkSet src, dst;
    const SimilarityTransform truth{1.3, 0.4, 2.0, -1.0};
    for (int i = 0; i < 8; ++i) {
        const double x = coord(rng), y = coord(rng);
        src.points.push_back({x, y});
        const auto p = truth.apply(x, y);
        dst.points.push_back({p[0] + noise(rng), p[1] + noise(rng)});
    }
    const SimilarityFit fit = estimate_similarity(src, dst);

    // brute-force oracle: coarse grid around the fit, then local refinement
    double best = fit.rms_residual;
    SimilarityTransform probe = fit.transform;
    double step_scale = 0.05, step_angle = 0.05, step_t = 0.2;
    for (int round = 0; round < 4; ++round) {
        for (int ds = -2; ds <= 2; ++ds)
            for (int da = -2; da <= 2; ++da)
                for (int dx = -2; dx <= 2; ++dx)
                    for (int dy = -2; dy <= 2; ++dy) {
                        SimilarityTransform t = fit.transform;
                        t.scale += ds * step_scale;
                        t.angle += da * step_angle;
                        t.tx += dx * step_t;
                        t.ty += dy * step_t;
                        if (t.scale <= 0) continue;
                        best = std::min(best, transform_residual(t, src, dst));
                    }
        step_scale *= 0.3;
        step_angle *= 0.3;
        step_t *= 0.3;
    }
    EXPECT_LE(fit.rms_residual, best + 1e-9);
}

TEST(Similarity, CoincidentPointsAreAnError) {
    LandmarkSet src, dst;
    src.points = {{1, 1}, {1, 1}};
    dst.points = {{0, 0}, {2, 2}};
    EXPECT_THROW(estimate_similarity(src, dst), Error);
}

TEST(Similarity, InverseComposesToIdentity) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int trial = 0; trial < 20; ++trial) {
        SimilarityTransform t{0.5 + std::abs(u(rng)), u(rng), u(rng), u(rng)};
        const SimilarityTransform inv = t.inverse();
        const double x = u(rng), y = u(rng);
        const auto fwd = t.apply(x, y);
        const auto back = inv.apply(fwd[0], fwd[1]);
        EXPECT_NEAR(back[0], x, 1e-9);
        EXPECT_NEAR(back[1], y, 1e-9);
    }
}

TEST(Patch, IdentityTransformFullImageIsOriginal) {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Tensor img({1, 6, 8});
    for (double& v : img.values()) v = u(rng);
    PatchSpec spec;
    spec.out_h = 6;
    spec.out_w = 8;
    spec.scale = 1.0;
    spec.channels = ChannelSelect::All;
    const Tensor patch = extract_patch(img, spec, {}, {3.5, 2.5});
    ASSERT_TRUE(patch.same_shape(img));
    for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(patch[i], img[i], 1e-12);
}

TEST(Patch, DoubleFlipIsInvolution) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Tensor img({1, 6, 8});
    for (double& v : img.values()) v = u(rng);
    PatchSpec spec;
    spec.out_h = 6;
    spec.out_w = 8;
    spec.channels = ChannelSelect::All;
    spec.flip = false;
    const Tensor once = extract_patch(img, spec, {}, {3.5, 2.5});
    spec.flip = true;
    const Tensor flipped = extract_patch(img, spec, {}, {3.5, 2.5});
    for (std::size_t y = 0; y < 6; ++y)
        for (std::size_t x = 0; x < 8; ++x)
            EXPECT_DOUBLE_EQ(flipped.at3(0, y, 7 - x), once.at3(0, y, x));
}

TEST(Patch, CheckerboardDownsampleMatchesHandBilinear) {
    // 4x4 checkerboard, sampled at scale 2 into 2x2: every sample lands in
    // the middle of a 2x2 cell, averaging 0 and 1 to 0.5
    Tensor img({1, 4, 4});
    for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 4; ++x) img.at3(0, y, x) = (x + y) % 2 == 0 ? 0.0 : 1.0;
    PatchSpec spec;
    spec.out_h = 2;
    spec.out_w = 2;
    spec.scale = 2.0;
    spec.channels = ChannelSelect::All;
    const Tensor patch = extract_patch(img, spec, {}, {1.5, 1.5});
    for (std::size_t i = 0; i < patch.size(); ++i) EXPECT_NEAR(patch[i], 0.5, 1e-12);
}

TEST(Patch, DegenerateSpecIsAnError) {
    Tensor img({1, 4, 4});
    PatchSpec spec;
    spec.out_h = 0;
    EXPECT_THROW(extract_patch(img, spec, {}, {0, 0}), Error);
    spec.out_h = 2;
    spec.scale = 0.0;
    EXPECT_THROW(extract_patch(img, spec, {}, {0, 0}), Error);
}

TEST(Ensemble, SingleSpecGivesEmbeddingDim) {
    NetworkConfig net;
    net.input = {1, 10, 8};
    net.layers = {{LayerKind::Conv, 3, 3, 1, 2}, {LayerKind::Relu}};
    net.embedding_dim = 160;
    net.feature_taps = {1};
    std::map<std::size_t, PatchNetwork> nets;
    nets[0] = {init_params(net, 2, 1), net};

    PatchSpec spec;
    spec.out_h = 10;
    spec.out_w = 8;
    spec.network_id = 0;

    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Tensor img({1, 10, 8});
    for (double& v : img.values()) v = u(rng);
    const AlignmentContext ctx = default_alignment_context(10, 8);
    const FeatureVec f = extract_ensemble(img, {}, {spec}, nets, ctx);
    EXPECT_EQ(f.size(), 160u);
}

TEST(Ensemble, TwentyFiveSpecsGive4000Dims) {
    NetworkConfig net;
    net.input = {1, 10, 8};
    net.layers = {{LayerKind::Conv, 3, 3, 1, 2}, {LayerKind::Relu}};
    net.embedding_dim = 160;
    net.feature_taps = {1};
    std::map<std::size_t, PatchNetwork> nets;
    nets[0] = {init_params(net, 2, 1), net};

    std::vector<PatchSpec> specs(25);
    for (std::size_t i = 0; i < 25; ++i) {
        specs[i].out_h = 10;
        specs[i].out_w = 8;
        specs[i].offset_x = static_cast<double>(i % 5) - 2.0;
        specs[i].offset_y = static_cast<double>(i / 5) - 2.0;
        specs[i].network_id = 0;
    }
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Tensor img({1, 10, 8});
    for (double& v : img.values()) v = u(rng);
    const AlignmentContext ctx = default_alignment_context(10, 8);
    const FeatureVec f = extract_ensemble(img, {}, specs, nets, ctx);
    EXPECT_EQ(f.size(), 4000u);
}

TEST(Ensemble, PermutingSpecsPermutesBlocks) {
    NetworkConfig net;
    net.input = {1, 10, 8};
    net.layers = {{LayerKind::Conv, 3, 3, 1, 2}, {LayerKind::Relu}};
    net.embedding_dim = 8;
    net.feature_taps = {1};
    std::map<std::size_t, PatchNetwork> nets;
    nets[0] = {init_params(net, 2, 1), net};
    nets[1] = {init_params(net, 2, 2), net};

    PatchSpec a, b;
    a.out_h = b.out_h = 10;
    a.out_w = b.out_w = 8;
    a.network_id = 0;
    b.network_id = 1;
    b.scale = 0.5;

    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Tensor img({1, 10, 8});
    for (double& v : img.values()) v = u(rng);
    const AlignmentContext ctx = default_alignment_context(10, 8);
    const FeatureVec ab = extract_ensemble(img, {}, {a, b}, nets, ctx);
    const FeatureVec ba = extract_ensemble(img, {}, {b, a}, nets, ctx);
    ASSERT_EQ(ab.size(), 16u);
    for (std::size_t k = 0; k < 8; ++k) {
        EXPECT_EQ(ab[k], ba[8 + k]);
        EXPECT_EQ(ab[8 + k], ba[k]);
    }
}

TEST(Ensemble, MissingNetworkIsAnError) {
    PatchSpec spec;
    spec.network_id = 42;
    Tensor img({1, 10, 8});
    const AlignmentContext ctx = default_alignment_context(10, 8);
    EXPECT_THROW(extract_ensemble(img, {}, {spec}, {}, ctx), Error);
}

TEST(Ensemble, DeterministicExtraction) {
    const SyntheticSpec sspec = [] {
        SyntheticSpec s;
        s.identities = 2;
        s.samples_per_identity = 2;
        s.height = 12;
        s.width = 10;
        return s;
    }();
    const LabeledDataset ds = generate_dataset(sspec);
    NetworkConfig net;
    net.input = {1, 12, 10};
    net.layers = {{LayerKind::Conv, 3, 3, 1, 2}, {LayerKind::Relu}};
    net.embedding_dim = 8;
    net.feature_taps = {1};
    std::map<std::size_t, PatchNetwork> nets;
    nets[0] = {init_params(net, 2, 5), net};
    PatchSpec spec;
    spec.out_h = 12;
    spec.out_w = 10;
    const AlignmentContext ctx = default_alignment_context(12, 10);
    LandmarkSet lm;
    lm.points = ds.landmarks[0];
    const FeatureVec f1 = extract_ensemble(ds.images[0], lm, {spec}, nets, ctx);
    const FeatureVec f2 = extract_ensemble(ds.images[0], lm, {spec}, nets, ctx);
    EXPECT_EQ(f1, f2);
}

TEST(Selection, DominantPatchSelectedFirst) {
    // patch 2 alone separates the pairs perfectly
    auto eval = [](const std::vector<std::size_t>& subset) {
        for (std::size_t s : subset)
            if (s == 2) return 1.0;
        return 0.5 + 0.05 * static_cast<double>(subset.size());
    };
    const SelectionState st = select_patches(4, 2, eval);
    ASSERT_FALSE(st.selected.empty());
    EXPECT_EQ(st.selected.front(), 2u);
}

TEST(Selection, DuplicatePatchNeverAdmitted) {
    // patches 0 and 1 are identical; the second copy has zero marginal gain
    auto eval = [](const std::vector<std::size_t>& subset) {
        bool has01 = false, has2 = false;
        for (std::size_t s : subset) {
            if (s == 0 || s == 1) has01 = true;
            if (s == 2) has2 = true;
        }
        return 0.5 + (has01 ? 0.2 : 0.0) + (has2 ? 0.1 : 0.0);
    };
    const SelectionState st = select_patches(3, 3, eval);
    bool has0 = false, has1 = false;
    for (std::size_t s : st.selected) {
        has0 |= s == 0;
        has1 |= s == 1;
    }
    EXPECT_FALSE(has0 && has1);
}

TEST(Selection, AccuracyLogNonDecreasing) {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.0, 0.1);
    std::vector<double> value{0.05, 0.12, 0.03, 0.2, 0.08, 0.15};
    auto eval = [&](const std::vector<std::size_t>& subset) {
        double acc = 0.5;
        for (std::size_t s : subset) acc += value[s];
        return std::min(acc, 1.0);
    };
    const SelectionState st = select_patches(6, 4, eval);
    for (std::size_t k = 1; k < st.accuracy_log.size(); ++k)
        EXPECT_GE(st.accuracy_log[k], st.accuracy_log[k - 1]);
}

TEST(Selection, MatchesExhaustiveSubsetOracle) {
    std::mt19937_64 rng(37);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        // random modular evaluator: accuracy = 0.5 + sum of per-patch gains
        std::vector<double> gain(5);
        for (double& g : gain) g = 0.1 * u(rng);
        auto eval = [&](const std::vector<std::size_t>& subset) {
            double acc = 0.5;
            for (std::size_t s : subset) acc += gain[s];
            return acc;
        };
        const SelectionState st = select_patches(5, 3, eval);

        double best = 0.0;
        for (int mask = 0; mask < 32; ++mask) {
            if (__builtin_popcount(mask) > 3) continue;
            std::vector<std::size_t> subset;
            for (int b = 0; b < 5; ++b)
                if (mask & (1 << b)) subset.push_back(b);
            best = std::max(best, eval(subset));
        }
        EXPECT_NEAR(st.final_accuracy, best, 1e-12) << "trial " << trial;
    }
}

TEST(Selection, DisjointGroupsPartitionThePool) {
    std::vector<double> gain{0.05, 0.12, 0.03, 0.2};
    auto eval = [&](const std::vector<std::size_t>& subset) {
        double acc = 0.5;
        for (std::size_t s : subset) acc += gain[s];
        return acc;
    };
    const auto groups = select_disjoint_groups(4, 2, 2, eval);
    ASSERT_EQ(groups.size(), 2u);
    std::vector<bool> seen(4, false);
    for (const auto& g : groups)
        for (std::size_t s : g) {
            EXPECT_FALSE(seen[s]) << "patch " << s << " selected twice";
            seen[s] = true;
        }
    // the first group grabs the two best patches
    EXPECT_EQ(groups[0], (std::vector<std::size_t>{1, 3}));
}

TEST(Pca, LineInThreeDimsCapturesAllVariance) {
    std::vector<std::vector<double>> data;
    for (int i = -5; i <= 5; ++i)
        data.push_back({1.0 * i, 2.0 * i, -1.0 * i});
    const PcaModel m = fit_pca(data, 1);
    EXPECT_NEAR(m.explained_ratio[0], 1.0, 1e-9);
}

TEST(Pca, IsotropicGaussianSpreadsVariance) {
    std::mt19937_64 rng(41);
    std::normal_distribution<double> unit(0.0, 1.0);
    std::vector<std::vector<double>> data;
    for (int i = 0; i < 4000; ++i) data.push_back({unit(rng), unit(rng), unit(rng)});
    const PcaModel m = fit_pca(data, 3);
    for (double r : m.explained_ratio) EXPECT_NEAR(r, 1.0 / 3.0, 0.05);
}

TEST(Pca, TrainingMeanProjectsToZero) {
    std::mt19937_64 rng(43);
    std::normal_distribution<double> unit(0.0, 1.0);
    std::vector<std::vector<double>> data;
    for (int i = 0; i < 50; ++i) data.push_back({unit(rng), unit(rng), unit(rng), unit(rng)});
    const PcaModel m = fit_pca(data, 2);
    const auto y = pca_project(m, m.mean);
    for (double v : y) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Pca, BasisOrthonormalAndReconstructionLosesDiscardedMass) {
    std::mt19937_64 rng(47);
    std::normal_distribution<double> unit(0.0, 1.0);
    std::vector<std::vector<double>> data;
    const std::size_t n = 60, d = 6, keep = 3;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> x(d);
        for (std::size_t k = 0; k < d; ++k) x[k] = (k + 1.0) * unit(rng);
        data.push_back(x);
    }
    const PcaModel m = fit_pca(data, keep);

    for (std::size_t a = 0; a < keep; ++a)
        for (std::size_t b = 0; b < keep; ++b) {
            double ip = 0.0;
            for (std::size_t r = 0; r < d; ++r) ip += m.basis(r, a) * m.basis(r, b);
            EXPECT_NEAR(ip, a == b ? 1.0 : 0.0, 1e-8);
        }

    double recon_sq = 0.0;
    for (const auto& x : data) {
        const auto back = pca_reconstruct(m, pca_project(m, x));
        for (std::size_t k = 0; k < d; ++k) recon_sq += (x[k] - back[k]) * (x[k] - back[k]);
    }
    double discarded = 0.0;
    for (std::size_t k = keep; k < d; ++k) discarded += m.eigenvalues[k];
    discarded *= static_cast<double>(n - 1);
    EXPECT_NEAR(recon_sq, discarded, 1e-6 * std::max(1.0, discarded));
}

TEST(Pca, OutDimTooLargeIsAnError) {
    std::vector<std::vector<double>> data{{1, 2}, {3, 4}, {5, 7}};
    EXPECT_THROW(fit_pca(data, 3), Error);  // dim 2 caps out_dim
    std::vector<std::vector<double>> two{{1, 2, 3}, {4, 5, 6}};
    EXPECT_THROW(fit_pca(two, 2), Error);  // n-1 = 1 caps out_dim
}

TEST(Fusion, SingleGroupPreservesScoreOrdering) {
    std::vector<std::vector<double>> scores;
    std::vector<bool> same;
    for (int i = 0; i < 20; ++i) {
        const double s = i < 10 ? 1.0 + 0.1 * i : -1.0 - 0.1 * (i - 10);
        scores.push_back({s});
        same.push_back(i < 10);
    }
    const FusionModel m = fit_fusion(scores, same);
    EXPECT_GT(m.weights[0], 0.0);
    for (std::size_t i = 1; i < scores.size(); ++i) {
        const double a = fuse(m, scores[i - 1]);
        const double b = fuse(m, scores[i]);
        EXPECT_EQ(a > b, scores[i - 1][0] > scores[i][0]);
    }
}

TEST(Fusion, PredictiveScoreDominatesNoise) {
    std::mt19937_64 rng(53);
    std::normal_distribution<double> unit(0.0, 1.0);
    std::vector<std::vector<double>> scores;
    std::vector<bool> same;
    for (int i = 0; i < 400; ++i) {
        const bool s = i % 2 == 0;
        scores.push_back({s ? 1.0 + 0.2 * unit(rng) : -1.0 + 0.2 * unit(rng), unit(rng),
                          unit(rng)});
        same.push_back(s);
    }
    const FusionModel m = fit_fusion(scores, same);
    EXPECT_GT(std::abs(m.weights[0]), 3.0 * std::abs(m.weights[1]));
    EXPECT_GT(std::abs(m.weights[0]), 3.0 * std::abs(m.weights[2]));
}

TEST(Fusion, SeparableScoresReachPerfectTrainingAccuracy) {
    std::vector<std::vector<double>> scores;
    std::vector<bool> same;
    std::mt19937_64 rng(59);
    std::uniform_real_distribution<double> u(0.0, 0.5);
    for (int i = 0; i < 40; ++i) {
        const bool s = i % 2 == 0;
        scores.push_back({s ? 2.0 + u(rng) : -2.0 - u(rng), u(rng)});
        same.push_back(s);
    }
    const FusionModel m = fit_fusion(scores, same);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < scores.size(); ++i)
        if ((fuse(m, scores[i]) > 0.0) == static_cast<bool>(same[i])) ++correct;
    EXPECT_EQ(correct, scores.size());
}

TEST(Fusion, DegenerateLabelsAreAnError) {
    std::vector<std::vector<double>> scores{{1.0}, {2.0}};
    std::vector<bool> same{true, true};
    EXPECT_THROW(fit_fusion(scores, same), Error);
}
