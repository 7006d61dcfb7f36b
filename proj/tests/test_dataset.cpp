#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "facekit/dataset.hpp"
#include "facekit/serialize.hpp"

using namespace facekit;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("facekit_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

double mean_distance_between(const LabeledDataset& ds, bool same_identity) {
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < ds.size(); ++i)
        for (std::size_t j = i + 1; j < ds.size(); ++j) {
            if ((ds.labels[i] == ds.labels[j]) != same_identity) continue;
            acc += l2_distance(ds.images[i].values(), ds.images[j].values());
            ++count;
        }
    return acc / static_cast<double>(count);
}

}  // namespace

TEST(Synthetic, NoiseFreeZeroShiftSamplesIdenticalUpToBrightness) {
    SyntheticSpec spec;
    spec.identities = 3;
    spec.samples_per_identity = 4;
    spec.noise_stddev = 0.0;
    spec.shift_range = 0;
    spec.brightness_range = 0.0;
    spec.seed = 9;
    const LabeledDataset ds = generate_dataset(spec);
    for (std::size_t id = 0; id < 3; ++id) {
        const auto& group = ds.by_identity[id];
        for (std::size_t k = 1; k < group.size(); ++k)
            EXPECT_EQ(ds.images[group[0]].values(), ds.images[group[k]].values());
    }
}

TEST(Synthetic, DeterministicPerSeed) {
    SyntheticSpec spec;
    spec.identities = 4;
    spec.samples_per_identity = 3;
    spec.seed = 21;
    const LabeledDataset a = generate_dataset(spec);
    const LabeledDataset b = generate_dataset(spec);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a.images[i].values(), b.images[i].values());
        EXPECT_EQ(a.landmarks[i], b.landmarks[i]);
    }
    spec.seed = 22;
    const LabeledDataset c = generate_dataset(spec);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.size() && !any_diff; ++i)
        any_diff = a.images[i].values() != c.images[i].values();
    EXPECT_TRUE(any_diff);
}

TEST(Synthetic, InterIdentityDistanceExceedsIntraIdentityDistance) {
    SyntheticSpec spec;  // defaults
    spec.identities = 10;
    spec.samples_per_identity = 6;
    spec.seed = 33;
    const LabeledDataset ds = generate_dataset(spec);
    EXPECT_GT(mean_distance_between(ds, false), mean_distance_between(ds, true));
}

TEST(PnmIo, GrayAndColorRoundTrip) {
    TempDir tmp;
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> byte(0, 255);
    for (std::size_t channels : {1u, 3u}) {
        Tensor img({channels, 7, 9});
        for (double& v : img.values()) v = byte(rng) / 255.0;
        const std::string path = (tmp.path / (channels == 1 ? "a.pgm" : "a.ppm")).string();
        write_pnm(path, img);
        const Tensor back = read_pnm(path);
        ASSERT_TRUE(back.same_shape(img));
        EXPECT_EQ(back.values(), img.values());
    }
}

TEST(Manifest, GenerateWriteIngestRoundTrip) {
    SyntheticSpec spec;
    spec.identities = 4;
    spec.samples_per_identity = 3;
    spec.seed = 44;
    const LabeledDataset ds = generate_dataset(spec);

    TempDir tmp;
    write_dataset(ds, tmp.path.string());
    const LabeledDataset back = ingest_dataset((tmp.path / "manifest.tsv").string());
    ASSERT_EQ(back.size(), ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        EXPECT_EQ(back.images[i].values(), ds.images[i].values()) << "image " << i;
        EXPECT_EQ(back.labels[i], ds.labels[i]);
        ASSERT_EQ(back.landmarks[i].size(), ds.landmarks[i].size());
        for (std::size_t p = 0; p < ds.landmarks[i].size(); ++p) {
            EXPECT_DOUBLE_EQ(back.landmarks[i][p][0], ds.landmarks[i][p][0]);
            EXPECT_DOUBLE_EQ(back.landmarks[i][p][1], ds.landmarks[i][p][1]);
        }
    }
}

TEST(Manifest, EmptyManifestIsAnError) {
    TempDir tmp;
    std::ofstream(tmp.path / "manifest.tsv") << "";
    EXPECT_THROW(ingest_dataset((tmp.path / "manifest.tsv").string()), Error);
}

TEST(Manifest, MissingFileNamesTheRecord) {
    TempDir tmp;
    std::ofstream(tmp.path / "manifest.tsv") << "missing.pgm\t0\n";
    try {
        ingest_dataset((tmp.path / "manifest.tsv").string());
        FAIL() << "expected error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("record 1"), std::string::npos);
    }
}

TEST(Manifest, DuplicateEntriesDeduplicatedWithWarning) {
    SyntheticSpec spec;
    spec.identities = 2;
    spec.samples_per_identity = 2;
    spec.seed = 55;
    const LabeledDataset ds = generate_dataset(spec);
    TempDir tmp;
    write_dataset(ds, tmp.path.string());
    std::ofstream(tmp.path / "manifest.tsv", std::ios::app) << "img_0.pgm\t0\n";

    IngestReport report;
    const LabeledDataset back = ingest_dataset((tmp.path / "manifest.tsv").string(), &report);
    EXPECT_EQ(back.size(), ds.size());
    ASSERT_EQ(report.warnings.size(), 1u);
    EXPECT_NE(report.warnings[0].find("duplicate"), std::string::npos);
}

TEST(Manifest, ExtentMismatchIsAnError) {
    TempDir tmp;
    Tensor a({1, 4, 4});
    Tensor b({1, 5, 5});
    write_pnm((tmp.path / "a.pgm").string(), a);
    write_pnm((tmp.path / "b.pgm").string(), b);
    std::ofstream(tmp.path / "manifest.tsv") << "a.pgm\t0\nb.pgm\t1\n";
    try {
        ingest_dataset((tmp.path / "manifest.tsv").string());
        FAIL() << "expected error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("record 2"), std::string::npos);
    }
}

TEST(Manifest, LabelsDensifiedInFirstAppearanceOrder) {
    TempDir tmp;
    Tensor img({1, 3, 3});
    write_pnm((tmp.path / "x.pgm").string(), img);
    write_pnm((tmp.path / "y.pgm").string(), img);
    write_pnm((tmp.path / "z.pgm").string(), img);
    std::ofstream(tmp.path / "manifest.tsv") << "x.pgm\t700\ny.pgm\t5\nz.pgm\t700\n";
    const LabeledDataset ds = ingest_dataset((tmp.path / "manifest.tsv").string());
    EXPECT_EQ(ds.labels, (std::vector<std::size_t>{0, 1, 0}));
    EXPECT_EQ(ds.n_identities(), 2u);
}

TEST(Container, NamedTensorRoundTripPreservesBits) {
    TempDir tmp;
    std::mt19937_64 rng(7);
    std::normal_distribution<double> unit(0.0, 1.0);
    Tensor a({2, 3, 4});
    for (double& v : a.values()) v = unit(rng);
    Tensor b({5});
    for (double& v : b.values()) v = unit(rng);

    const std::string path = (tmp.path / "pack.fkt").string();
    json meta;
    meta["note"] = "test";
    write_tensor_container(path, {{"alpha", a}, {"beta", b}}, meta);
    const TensorContainer c = read_tensor_container(path);
    EXPECT_EQ(c.meta.at("note"), "test");
    EXPECT_EQ(c.find("alpha").values(), a.values());
    EXPECT_EQ(c.find("alpha").shape(), a.shape());
    EXPECT_EQ(c.find("beta").values(), b.values());
    EXPECT_THROW(c.find("gamma"), Error);
}

TEST(Container, RejectsForeignFiles) {
    TempDir tmp;
    const std::string path = (tmp.path / "not_a_container.bin").string();
    std::ofstream(path) << "garbage";
    EXPECT_THROW(read_tensor_container(path), Error);
}

TEST(Network, SaveLoadRoundTripWithConfig) {
    TempDir tmp;
    const NetworkConfig cfg = default_network_config();
    const NetworkParams p = init_params(cfg, 7, 99);
    const std::string path = (tmp.path / "net.fkt").string();
    save_network(path, p, cfg);
    const LoadedNetwork ln = load_network(path);

    EXPECT_EQ(ln.config.embedding_dim, cfg.embedding_dim);
    EXPECT_EQ(ln.config.feature_taps, cfg.feature_taps);
    ASSERT_EQ(ln.params.layers.size(), p.layers.size());
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
        EXPECT_EQ(ln.params.layers[i].weight.values(), p.layers[i].weight.values());
        EXPECT_EQ(ln.params.layers[i].bias.values(), p.layers[i].bias.values());
    }
    EXPECT_EQ(ln.params.softmax_weight.values(), p.softmax_weight.values());
    EXPECT_DOUBLE_EQ(ln.params.margin, p.margin);

    // identical features after the round trip
    std::mt19937_64 rng(3);
    std::normal_distribution<double> unit(0.0, 1.0);
    Tensor x({cfg.input.channels, cfg.input.height, cfg.input.width});
    for (double& v : x.values()) v = unit(rng);
    EXPECT_EQ(forward(x, ln.params, ln.config).feature, forward(x, p, cfg).feature);
}

TEST(Network, ConfigJsonRoundTrip) {
    const NetworkConfig cfg = default_network_config(3);
    const json j = network_config_to_json(cfg);
    const NetworkConfig back = network_config_from_json(j);
    EXPECT_EQ(back.input.channels, 3u);
    ASSERT_EQ(back.layers.size(), cfg.layers.size());
    for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
        EXPECT_EQ(back.layers[i].kind, cfg.layers[i].kind);
        EXPECT_EQ(back.layers[i].kernel_h, cfg.layers[i].kernel_h);
        EXPECT_EQ(back.layers[i].out_channels, cfg.layers[i].out_channels);
        EXPECT_EQ(back.layers[i].grid_h, cfg.layers[i].grid_h);
    }
}

TEST(Split, ByIdentityKeepsGroupsAndRelabels) {
    SyntheticSpec spec;
    spec.identities = 5;
    spec.samples_per_identity = 3;
    spec.seed = 77;
    const LabeledDataset ds = generate_dataset(spec);
    const auto [a, b] = split_by_identity(ds, 3);
    EXPECT_EQ(a.n_identities(), 3u);
    EXPECT_EQ(b.n_identities(), 2u);
    EXPECT_EQ(a.size() + b.size(), ds.size());
    for (std::size_t l : b.labels) EXPECT_LT(l, 2u);
}
