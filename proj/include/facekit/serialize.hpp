#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "facekit/convnet.hpp"
#include "facekit/joint_bayes.hpp"
#include "facekit/tensor.hpp"

namespace facekit {

using json = nlohmann::json;

// ---- versioned binary container of named tensors ----
// Layout: magic "FKTB", u32 version, u64 header length, JSON header (tensor
// names/shapes plus free-form metadata), then each tensor's values as
// little-endian 64-bit floats in header order.

inline constexpr char kContainerMagic[4] = {'F', 'K', 'T', 'B'};
inline constexpr std::uint32_t kContainerVersion = 1;

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(os, bits);
}

inline std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

inline std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

inline double get_f64(std::istream& is) {
    const std::uint64_t bits = get_u64(is);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace detail

inline void write_tensor_container(const std::string& path, const std::vector<NamedTensor>& tensors,
                                   const json& meta = json::object()) {
    json header;
    header["version"] = kContainerVersion;
    header["meta"] = meta;
    header["tensors"] = json::array();
    for (const auto& nt : tensors)
        header["tensors"].push_back({{"name", nt.name}, {"shape", nt.tensor.shape()}});
    const std::string header_text = header.dump();

    std::ofstream os(path, std::ios::binary);
    check(os.good(), "cannot open '", path, "' for writing");
    os.write(kContainerMagic, 4);
    detail::put_u32(os, kContainerVersion);
    detail::put_u64(os, header_text.size());
    os.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    for (const auto& nt : tensors)
        for (double v : nt.tensor.values()) detail::put_f64(os, v);
    check(os.good(), "write failed for '", path, "'");
}

struct TensorContainer {
    std::vector<NamedTensor> tensors;
    json meta;

    const Tensor& find(const std::string& name) const {
        for (const auto& nt : tensors)
            if (nt.name == name) return nt.tensor;
        fail("container has no tensor named '", name, "'");
    }
    bool has(const std::string& name) const {
        for (const auto& nt : tensors)
            if (nt.name == name) return true;
        return false;
    }
};

inline TensorContainer read_tensor_container(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    check(is.good(), "cannot open '", path, "' for reading");
    char magic[4];
    is.read(magic, 4);
    check(is.good() && std::memcmp(magic, kContainerMagic, 4) == 0, "'", path,
          "' is not a tensor container");
    const std::uint32_t version = detail::get_u32(is);
    check(version == kContainerVersion, "'", path, "' has unsupported container version ",
          version);
    const std::uint64_t header_len = detail::get_u64(is);
    std::string header_text(header_len, '\0');
    is.read(header_text.data(), static_cast<std::streamsize>(header_len));
    check(is.good(), "truncated header in '", path, "'");
    const json header = json::parse(header_text);

    TensorContainer c;
    c.meta = header.value("meta", json::object());
    for (const auto& entry : header.at("tensors")) {
        NamedTensor nt;
        nt.name = entry.at("name").get<std::string>();
        const std::vector<std::size_t> shape = entry.at("shape").get<std::vector<std::size_t>>();
        Tensor t(shape);
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = detail::get_f64(is);
        check(is.good(), "truncated tensor data in '", path, "'");
        nt.tensor = std::move(t);
        c.tensors.push_back(std::move(nt));
    }
    return c;
}

// ---- NetworkConfig <-> JSON ----

inline json network_config_to_json(const NetworkConfig& cfg) {
    json j;
    j["input"] = {{"channels", cfg.input.channels},
                  {"height", cfg.input.height},
                  {"width", cfg.input.width}};
    j["embedding_dim"] = cfg.embedding_dim;
    j["feature_taps"] = cfg.feature_taps;
    j["layers"] = json::array();
    for (const auto& s : cfg.layers) {
        json l;
        l["kind"] = layer_kind_name(s.kind);
        if (s.kind != LayerKind::Relu) {
            l["kernel"] = {s.kernel_h, s.kernel_w};
            l["stride"] = s.stride;
        }
        if (is_conv_family(s.kind)) l["out_channels"] = s.out_channels;
        if (s.kind == LayerKind::ConvLocallyShared) l["grid"] = {s.grid_h, s.grid_w};
        j["layers"].push_back(l);
    }
    return j;
}

inline NetworkConfig network_config_from_json(const json& j) {
    NetworkConfig cfg;
    const json& in = j.at("input");
    cfg.input = {in.at("channels").get<std::size_t>(), in.at("height").get<std::size_t>(),
                 in.at("width").get<std::size_t>()};
    cfg.embedding_dim = j.value("embedding_dim", std::size_t{160});
    cfg.feature_taps = j.at("feature_taps").get<std::vector<std::size_t>>();
    for (const auto& l : j.at("layers")) {
        LayerSpec s;
        s.kind = layer_kind_from_name(l.at("kind").get<std::string>());
        if (l.contains("kernel")) {
            s.kernel_h = l["kernel"][0].get<std::size_t>();
            s.kernel_w = l["kernel"][1].get<std::size_t>();
        }
        s.stride = l.value("stride", std::size_t{1});
        if (is_conv_family(s.kind)) s.out_channels = l.at("out_channels").get<std::size_t>();
        if (l.contains("grid")) {
            s.grid_h = l["grid"][0].get<std::size_t>();
            s.grid_w = l["grid"][1].get<std::size_t>();
        }
        cfg.layers.push_back(s);
    }
    validate_config(cfg);
    return cfg;
}

// ---- full network (params + architecture) ----

inline void save_network(const std::string& path, const NetworkParams& p,
                         const NetworkConfig& cfg) {
    std::vector<NamedTensor> tensors;
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
        if (p.layers[i].weight.size() == 0) continue;
        tensors.push_back({format_msg("layer", i, ".weight"), p.layers[i].weight});
        tensors.push_back({format_msg("layer", i, ".bias"), p.layers[i].bias});
    }
    for (std::size_t t = 0; t < p.embed_weights.size(); ++t)
        tensors.push_back({format_msg("embed.tap", t, ".weight"), p.embed_weights[t].to_tensor()});
    tensors.push_back({"embed.bias", Tensor({p.embed_bias.size()}, p.embed_bias)});
    tensors.push_back({"softmax.weight", p.softmax_weight.to_tensor()});
    tensors.push_back({"softmax.bias", Tensor({p.softmax_bias.size()}, p.softmax_bias)});
    tensors.push_back({"verif.params", Tensor({3}, {p.margin, p.cosine_w, p.cosine_b})});

    json meta;
    meta["kind"] = "network";
    meta["network"] = network_config_to_json(cfg);
    meta["n_classes"] = p.n_classes();
    write_tensor_container(path, tensors, meta);
}

struct LoadedNetwork {
    NetworkParams params;
    NetworkConfig config;
};

inline LoadedNetwork load_network(const std::string& path) {
    const TensorContainer c = read_tensor_container(path);
    check(c.meta.value("kind", "") == "network", "'", path, "' does not hold a network");
    LoadedNetwork ln;
    ln.config = network_config_from_json(c.meta.at("network"));
    NetworkParams& p = ln.params;
    for (std::size_t i = 0; i < ln.config.layers.size(); ++i) {
        if (!is_conv_family(ln.config.layers[i].kind)) {
            p.layers.push_back({});
            continue;
        }
        p.layers.push_back({c.find(format_msg("layer", i, ".weight")),
                            c.find(format_msg("layer", i, ".bias"))});
    }
    for (std::size_t t = 0; t < ln.config.feature_taps.size(); ++t)
        p.embed_weights.push_back(
            Matrix::from_tensor(c.find(format_msg("embed.tap", t, ".weight"))));
    p.embed_bias = c.find("embed.bias").values();
    p.softmax_weight = Matrix::from_tensor(c.find("softmax.weight"));
    p.softmax_bias = c.find("softmax.bias").values();
    const Tensor& vp = c.find("verif.params");
    check(vp.size() == 3, "verif.params must hold 3 values");
    p.margin = vp[0];
    p.cosine_w = vp[1];
    p.cosine_b = vp[2];
    return ln;
}

// ---- Joint Bayes model (same container format) ----

inline void save_joint_bayes(const std::string& path, const JointBayesModel& m) {
    std::vector<NamedTensor> tensors;
    tensors.push_back({"s_identity", m.s_identity.to_tensor()});
    tensors.push_back({"s_residual", m.s_residual.to_tensor()});
    tensors.push_back({"mean", Tensor({m.mean.size()}, m.mean)});
    json meta;
    meta["kind"] = "joint_bayes";
    write_tensor_container(path, tensors, meta);
}

inline JointBayesModel load_joint_bayes(const std::string& path) {
    const TensorContainer c = read_tensor_container(path);
    check(c.meta.value("kind", "") == "joint_bayes", "'", path,
          "' does not hold a joint bayes model");
    return make_joint_bayes(Matrix::from_tensor(c.find("s_identity")),
                            Matrix::from_tensor(c.find("s_residual")), c.find("mean").values());
}

// ---- CSV ----


inline std::string csv_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header) : os_(path) {
        check(os_.good(), "cannot open '", path, "' for writing");
        write_row(header);
    }

    void write_row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) os_ << ',';
            os_ << cells[i];
        }
        os_ << '\n';
    }

private:
    std::ofstream os_;
};

inline void ensure_fresh_output(const std::string& path, bool force) {
    if (!force)
        check(!std::filesystem::exists(path), "output '", path,
              "' already exists (pass --force to overwrite)");
}

}  // namespace facekit
