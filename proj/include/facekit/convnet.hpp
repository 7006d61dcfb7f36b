#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "facekit/tensor.hpp"

namespace facekit {

enum class LayerKind { Conv, ConvLocallyShared, LocallyConnected, MaxPool, Relu };

inline const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::Conv: return "conv";
        case LayerKind::ConvLocallyShared: return "conv_locally_shared";
        case LayerKind::LocallyConnected: return "locally_connected";
        case LayerKind::MaxPool: return "maxpool";
        case LayerKind::Relu: return "relu";
    }
    return "?";
}

inline LayerKind layer_kind_from_name(const std::string& s) {
    if (s == "conv") return LayerKind::Conv;
    if (s == "conv_locally_shared") return LayerKind::ConvLocallyShared;
    if (s == "locally_connected") return LayerKind::LocallyConnected;
    if (s == "maxpool") return LayerKind::MaxPool;
    if (s == "relu") return LayerKind::Relu;
    fail("unknown layer kind '", s, "'");
}

struct Extents3 {
    std::size_t channels = 0, height = 0, width = 0;
    std::size_t flat() const { return channels * height * width; }
    bool operator==(const Extents3&) const = default;
};

struct LayerSpec {
    LayerKind kind = LayerKind::Conv;
    std::size_t kernel_h = 1, kernel_w = 1;
    std::size_t stride = 1;
    std::size_t out_channels = 0;  // conv family only
    std::size_t grid_h = 1, grid_w = 1;  // ConvLocallyShared weight-sharing grid
};

inline bool is_conv_family(LayerKind k) {
    return k == LayerKind::Conv || k == LayerKind::ConvLocallyShared ||
           k == LayerKind::LocallyConnected;
}

// Valid convolution/pooling: out = floor((in - kernel) / stride) + 1, no padding.
inline Extents3 layer_output_extents(const LayerSpec& spec, const Extents3& in,
                                     std::size_t layer_index = 0) {
    const std::string where = format_msg("layer ", layer_index, " (", layer_kind_name(spec.kind), ")");
    if (spec.kind == LayerKind::Relu) return in;
    check(spec.stride >= 1, where, ": stride must be >= 1");
    check(in.height >= spec.kernel_h && in.width >= spec.kernel_w, where, ": kernel ",
          spec.kernel_h, "x", spec.kernel_w, " exceeds input ", in.height, "x", in.width);
    Extents3 out;
    out.height = (in.height - spec.kernel_h) / spec.stride + 1;
    out.width = (in.width - spec.kernel_w) / spec.stride + 1;
    if (spec.kind == LayerKind::MaxPool) {
        out.channels = in.channels;
        return out;
    }
    check(spec.out_channels >= 1, where, ": out_channels must be >= 1");
    out.channels = spec.out_channels;
    if (spec.kind == LayerKind::ConvLocallyShared) {
        check(spec.grid_h >= 1 && spec.grid_w >= 1, where, ": sharing grid must be >= 1x1");
        check(out.height % spec.grid_h == 0 && out.width % spec.grid_w == 0, where,
              ": sharing grid ", spec.grid_h, "x", spec.grid_w,
              " does not divide output extents ", out.height, "x", out.width);
    }
    return out;
}

struct NetworkConfig {
    Extents3 input;
    std::vector<LayerSpec> layers;
    std::size_t embedding_dim = 160;
    // Layer indices whose outputs are flattened and concatenated as the input
    // of the embedding layer. The default network taps the pooled third-stage
    // output and the final (fourth-stage) output, so the embedding sees both
    // local and global features.
    std::vector<std::size_t> feature_taps;
};

// Per-layer output extents; element 0 is the input, element i+1 is layer i.
inline std::vector<Extents3> compute_layer_extents(const NetworkConfig& cfg) {
    check(cfg.input.channels >= 1 && cfg.input.height >= 1 && cfg.input.width >= 1,
          "network input extents must be positive");
    std::vector<Extents3> ext;
    ext.reserve(cfg.layers.size() + 1);
    ext.push_back(cfg.input);
    for (std::size_t i = 0; i < cfg.layers.size(); ++i)
        ext.push_back(layer_output_extents(cfg.layers[i], ext.back(), i));
    return ext;
}

inline std::size_t embedding_input_size(const NetworkConfig& cfg,
                                        const std::vector<Extents3>& ext) {
    check(!cfg.feature_taps.empty(), "network config needs at least one feature tap");
    std::size_t total = 0;
    for (std::size_t tap : cfg.feature_taps) {
        check(tap < cfg.layers.size(), "feature tap ", tap, " out of range (", cfg.layers.size(),
              " layers)");
        total += ext[tap + 1].flat();
    }
    return total;
}

inline void validate_config(const NetworkConfig& cfg) {
    check(cfg.embedding_dim >= 1, "embedding_dim must be >= 1");
    const auto ext = compute_layer_extents(cfg);
    (void)embedding_input_size(cfg, ext);
}

// Number of weight groups along each output axis. Plain convolution shares one
// weight set everywhere; the locally-shared kind holds one per grid cell; the
// locally-connected kind holds one per output location.
inline std::pair<std::size_t, std::size_t> weight_grid(const LayerSpec& spec,
                                                       const Extents3& out) {
    switch (spec.kind) {
        case LayerKind::Conv: return {1, 1};
        case LayerKind::ConvLocallyShared: return {spec.grid_h, spec.grid_w};
        case LayerKind::LocallyConnected: return {out.height, out.width};
        default: return {1, 1};
    }
}

struct LayerParams {
    // weight shape [groups, out_c, in_c, kh, kw], bias shape [groups, out_c];
    // both empty for maxpool/relu.
    Tensor weight;
    Tensor bias;
};

struct NetworkParams {
    std::vector<LayerParams> layers;
    std::vector<Matrix> embed_weights;  // one [embedding_dim, tap_flat] block per tap
    std::vector<double> embed_bias;
    Matrix softmax_weight;  // [n_classes, embedding_dim]
    std::vector<double> softmax_bias;
    double margin = 1.0;        // contrastive-loss threshold, adaptively tuned
    double cosine_w = 1.0;      // cosine-loss scale
    double cosine_b = 0.0;      // cosine-loss shift

    std::size_t n_classes() const { return softmax_bias.size(); }
};

// Gradients mirror the parameter layout. The margin slot is always zero: it is
// maintained by the adaptive threshold rule, not by gradient descent.
using ParamGradients = NetworkParams;

inline NetworkParams zeros_like(const NetworkParams& p) {
    NetworkParams z;
    z.layers.reserve(p.layers.size());
    for (const auto& lp : p.layers) {
        LayerParams zl;
        if (lp.weight.size() > 0) zl.weight = Tensor::zeros(lp.weight.shape());
        if (lp.bias.size() > 0) zl.bias = Tensor::zeros(lp.bias.shape());
        z.layers.push_back(std::move(zl));
    }
    for (const auto& w : p.embed_weights) z.embed_weights.emplace_back(w.rows(), w.cols());
    z.embed_bias.assign(p.embed_bias.size(), 0.0);
    z.softmax_weight = Matrix(p.softmax_weight.rows(), p.softmax_weight.cols());
    z.softmax_bias.assign(p.softmax_bias.size(), 0.0);
    z.margin = 0.0;
    z.cosine_w = 0.0;
    z.cosine_b = 0.0;
    return z;
}

// dst += alpha * src over every trainable field.
inline void axpy_params(NetworkParams& dst, double alpha, const NetworkParams& src) {
    check(dst.layers.size() == src.layers.size(), "parameter/gradient layer count mismatch");
    for (std::size_t i = 0; i < dst.layers.size(); ++i) {
        auto& dw = dst.layers[i].weight.values();
        auto& db = dst.layers[i].bias.values();
        const auto& sw = src.layers[i].weight.values();
        const auto& sb = src.layers[i].bias.values();
        check(dw.size() == sw.size() && db.size() == sb.size(),
              "parameter/gradient shape mismatch at layer ", i);
        for (std::size_t k = 0; k < dw.size(); ++k) dw[k] += alpha * sw[k];
        for (std::size_t k = 0; k < db.size(); ++k) db[k] += alpha * sb[k];
    }
    check(dst.embed_weights.size() == src.embed_weights.size(),
          "parameter/gradient tap count mismatch");
    for (std::size_t t = 0; t < dst.embed_weights.size(); ++t) {
        auto& dv = dst.embed_weights[t].values();
        const auto& sv = src.embed_weights[t].values();
        check(dv.size() == sv.size(), "parameter/gradient embed shape mismatch at tap ", t);
        for (std::size_t k = 0; k < dv.size(); ++k) dv[k] += alpha * sv[k];
    }
    for (std::size_t k = 0; k < dst.embed_bias.size(); ++k)
        dst.embed_bias[k] += alpha * src.embed_bias[k];
    {
        auto& dv = dst.softmax_weight.values();
        const auto& sv = src.softmax_weight.values();
        check(dv.size() == sv.size(), "parameter/gradient softmax shape mismatch");
        for (std::size_t k = 0; k < dv.size(); ++k) dv[k] += alpha * sv[k];
        for (std::size_t k = 0; k < dst.softmax_bias.size(); ++k)
            dst.softmax_bias[k] += alpha * src.softmax_bias[k];
    }
    dst.margin += alpha * src.margin;
    dst.cosine_w += alpha * src.cosine_w;
    dst.cosine_b += alpha * src.cosine_b;
}

inline void scale_params(NetworkParams& p, double s) {
    for (auto& lp : p.layers) {
        for (double& v : lp.weight.values()) v *= s;
        for (double& v : lp.bias.values()) v *= s;
    }
    for (auto& w : p.embed_weights)
        for (double& v : w.values()) v *= s;
    for (double& v : p.embed_bias) v *= s;
    for (double& v : p.softmax_weight.values()) v *= s;
    for (double& v : p.softmax_bias) v *= s;
    p.margin *= s;
    p.cosine_w *= s;
    p.cosine_b *= s;
}

inline bool params_all_finite(const NetworkParams& p) {
    for (const auto& lp : p.layers)
        if (!lp.weight.all_finite() || !lp.bias.all_finite()) return false;
    for (const auto& w : p.embed_weights)
        for (double v : w.values())
            if (!std::isfinite(v)) return false;
    for (double v : p.embed_bias)
        if (!std::isfinite(v)) return false;
    for (double v : p.softmax_weight.values())
        if (!std::isfinite(v)) return false;
    for (double v : p.softmax_bias)
        if (!std::isfinite(v)) return false;
    return std::isfinite(p.margin) && std::isfinite(p.cosine_w) && std::isfinite(p.cosine_b);
}

// Fan-in-scaled normal init (ReLU networks need the 2/fan_in variance to keep
// activations from dying or exploding). Biases start at zero, margin at 1.
inline NetworkParams init_params(const NetworkConfig& cfg, std::size_t n_classes,
                                 std::uint64_t seed) {
    validate_config(cfg);
    check(n_classes >= 1, "init_params needs n_classes >= 1");
    const auto ext = compute_layer_extents(cfg);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> unit(0.0, 1.0);

    NetworkParams p;
    for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
        const LayerSpec& spec = cfg.layers[i];
        if (!is_conv_family(spec.kind)) {
            p.layers.push_back({});
            continue;
        }
        const Extents3& in = ext[i];
        const Extents3& out = ext[i + 1];
        const auto [gh, gw] = weight_grid(spec, out);
        const std::size_t groups = gh * gw;
        const double fan_in = static_cast<double>(in.channels * spec.kernel_h * spec.kernel_w);
        const double std_dev = std::sqrt(2.0 / fan_in);
        Tensor w({groups, out.channels, in.channels, spec.kernel_h, spec.kernel_w});
        for (double& v : w.values()) v = std_dev * unit(rng);
        Tensor b({groups, out.channels});
        p.layers.push_back({std::move(w), std::move(b)});
    }

    const std::size_t embed_in = embedding_input_size(cfg, ext);
    const double embed_std = std::sqrt(2.0 / static_cast<double>(embed_in));
    for (std::size_t tap : cfg.feature_taps) {
        const std::size_t flat = ext[tap + 1].flat();
        Matrix w(cfg.embedding_dim, flat);
        for (double& v : w.values()) v = embed_std * unit(rng);
        p.embed_weights.push_back(std::move(w));
    }
    p.embed_bias.assign(cfg.embedding_dim, 0.0);

    const double head_std = std::sqrt(2.0 / static_cast<double>(cfg.embedding_dim));
    p.softmax_weight = Matrix(n_classes, cfg.embedding_dim);
    for (double& v : p.softmax_weight.values()) v = head_std * unit(rng);
    p.softmax_bias.assign(n_classes, 0.0);
    p.margin = 1.0;
    p.cosine_w = 1.0;
    p.cosine_b = 0.0;
    return p;
}

struct LayerForwardResult {
    Tensor output;
    std::vector<std::size_t> pool_argmax;  // maxpool only: flat input index per output element
};

inline LayerForwardResult layer_forward(const LayerSpec& spec, const Tensor& input,
                                        const LayerParams& params, std::size_t layer_index = 0) {
    check(input.rank() == 3, "layer ", layer_index, ": expected rank-3 input, got shape ",
          shape_str(input.shape()));
    const Extents3 in{input.shape()[0], input.shape()[1], input.shape()[2]};
    const Extents3 out = layer_output_extents(spec, in, layer_index);
    LayerForwardResult res;

    if (spec.kind == LayerKind::Relu) {
        res.output = input;
        for (double& v : res.output.values()) v = v > 0.0 ? v : 0.0;
        return res;
    }

    if (spec.kind == LayerKind::MaxPool) {
        res.output = Tensor::zeros({out.channels, out.height, out.width});
        res.pool_argmax.resize(res.output.size());
        std::size_t idx = 0;
        for (std::size_t c = 0; c < out.channels; ++c)
            for (std::size_t oy = 0; oy < out.height; ++oy)
                for (std::size_t ox = 0; ox < out.width; ++ox, ++idx) {
                    double best = -std::numeric_limits<double>::infinity();
                    std::size_t best_at = 0;
                    for (std::size_t ky = 0; ky < spec.kernel_h; ++ky)
                        for (std::size_t kx = 0; kx < spec.kernel_w; ++kx) {
                            const std::size_t iy = oy * spec.stride + ky;
                            const std::size_t ix = ox * spec.stride + kx;
                            const double v = input.at3(c, iy, ix);
                            // strictly greater: ties go to the first
                            // (row-major) maximum
                            if (v > best) {
                                best = v;
                                best_at = (c * in.height + iy) * in.width + ix;
                            }
                        }
                    res.output.at3(c, oy, ox) = best;
                    res.pool_argmax[idx] = best_at;
                }
        return res;
    }

    const auto [gh, gw] = weight_grid(spec, out);
    const std::size_t cell_h = out.height / gh;
    const std::size_t cell_w = out.width / gw;
    check(params.weight.rank() == 5, "layer ", layer_index, ": weight tensor missing or wrong rank");
    const std::vector<std::size_t> expect_w{gh * gw, out.channels, in.channels, spec.kernel_h,
                                            spec.kernel_w};
    check(params.weight.shape() == expect_w, "layer ", layer_index, ": weight shape ",
          shape_str(params.weight.shape()), " does not match expected ", shape_str(expect_w));
    const std::vector<std::size_t> expect_b{gh * gw, out.channels};
    check(params.bias.shape() == expect_b, "layer ", layer_index, ": bias shape ",
          shape_str(params.bias.shape()), " does not match expected ", shape_str(expect_b));

    res.output = Tensor::zeros({out.channels, out.height, out.width});
    const double* w = params.weight.data();
    const double* b = params.bias.data();
    const std::size_t w_oc = in.channels * spec.kernel_h * spec.kernel_w;
    const std::size_t w_group = out.channels * w_oc;
    for (std::size_t oy = 0; oy < out.height; ++oy) {
        for (std::size_t ox = 0; ox < out.width; ++ox) {
            const std::size_t g = (oy / cell_h) * gw + (ox / cell_w);
            for (std::size_t oc = 0; oc < out.channels; ++oc) {
                const double* wp = w + g * w_group + oc * w_oc;
                double acc = b[g * out.channels + oc];
                for (std::size_t ic = 0; ic < in.channels; ++ic)
                    for (std::size_t ky = 0; ky < spec.kernel_h; ++ky) {
                        const double* row = input.ptr3(ic, oy * spec.stride + ky, ox * spec.stride);
                        const double* wrow =
                            wp + (ic * spec.kernel_h + ky) * spec.kernel_w;
                        for (std::size_t kx = 0; kx < spec.kernel_w; ++kx)
                            acc += wrow[kx] * row[kx];
                    }
                res.output.at3(oc, oy, ox) = acc;
            }
        }
    }
    return res;
}

struct LayerBackwardResult {
    LayerParams grads;  // empty tensors for parameterless kinds
    Tensor input_grad;
};

inline LayerBackwardResult layer_backward(const LayerSpec& spec, const Tensor& input,
                                          const Tensor& output,
                                          const std::vector<std::size_t>& pool_argmax,
                                          const Tensor& output_grad, const LayerParams& params,
                                          std::size_t layer_index = 0) {
    check(output_grad.same_shape(output), "layer ", layer_index,
          ": gradient shape does not match output");
    const Extents3 in{input.shape()[0], input.shape()[1], input.shape()[2]};
    const Extents3 out{output.shape()[0], output.shape()[1], output.shape()[2]};
    LayerBackwardResult res;
    res.input_grad = Tensor::zeros(input.shape());

    if (spec.kind == LayerKind::Relu) {
        for (std::size_t i = 0; i < input.size(); ++i)
            res.input_grad[i] = input[i] > 0.0 ? output_grad[i] : 0.0;
        return res;
    }

    if (spec.kind == LayerKind::MaxPool) {
        check(pool_argmax.size() == output.size(), "layer ", layer_index,
              ": pooling trace missing");
        for (std::size_t i = 0; i < output.size(); ++i)
            res.input_grad[pool_argmax[i]] += output_grad[i];
        return res;
    }

    const auto [gh, gw] = weight_grid(spec, out);
    const std::size_t cell_h = out.height / gh;
    const std::size_t cell_w = out.width / gw;
    res.grads.weight = Tensor::zeros(params.weight.shape());
    res.grads.bias = Tensor::zeros(params.bias.shape());
    const double* w = params.weight.data();
    double* dw = res.grads.weight.data();
    double* db = res.grads.bias.data();
    const std::size_t w_oc = in.channels * spec.kernel_h * spec.kernel_w;
    const std::size_t w_group = out.channels * w_oc;
    for (std::size_t oy = 0; oy < out.height; ++oy) {
        for (std::size_t ox = 0; ox < out.width; ++ox) {
            const std::size_t g = (oy / cell_h) * gw + (ox / cell_w);
            for (std::size_t oc = 0; oc < out.channels; ++oc) {
                const double go = output_grad.at3(oc, oy, ox);
                if (go == 0.0) continue;
                db[g * out.channels + oc] += go;
                const double* wp = w + g * w_group + oc * w_oc;
                double* dwp = dw + g * w_group + oc * w_oc;
                for (std::size_t ic = 0; ic < in.channels; ++ic)
                    for (std::size_t ky = 0; ky < spec.kernel_h; ++ky) {
                        const std::size_t iy = oy * spec.stride + ky;
                        const double* irow = input.ptr3(ic, iy, ox * spec.stride);
                        double* grow = res.input_grad.ptr3(ic, iy, ox * spec.stride);
                        const std::size_t off = (ic * spec.kernel_h + ky) * spec.kernel_w;
                        for (std::size_t kx = 0; kx < spec.kernel_w; ++kx) {
                            dwp[off + kx] += go * irow[kx];
                            grow[kx] += go * wp[off + kx];
                        }
                    }
            }
        }
    }
    return res;
}

struct ForwardTrace {
    std::vector<Tensor> outputs;  // outputs[0] = input, outputs[i+1] = layer i
    std::vector<std::vector<std::size_t>> pool_argmax;  // per layer
    std::vector<double> embed_pre;  // embedding pre-activation
    std::vector<double> feature;    // final feature vector (post-ReLU)
};

using FeatureVector = std::vector<double>;

struct ForwardResult {
    FeatureVector feature;
    ForwardTrace trace;
};

inline ForwardResult forward(const Tensor& x, const NetworkParams& params,
                             const NetworkConfig& cfg) {
    const std::vector<std::size_t> expect{cfg.input.channels, cfg.input.height, cfg.input.width};
    check(x.shape() == expect, "network input shape ", shape_str(x.shape()),
          " does not match configured ", shape_str(expect));
    check(params.layers.size() == cfg.layers.size(), "params hold ", params.layers.size(),
          " layers but config has ", cfg.layers.size());
    check(params.embed_weights.size() == cfg.feature_taps.size(),
          "params hold ", params.embed_weights.size(), " embedding blocks but config has ",
          cfg.feature_taps.size(), " taps");

    ForwardResult r;
    r.trace.outputs.reserve(cfg.layers.size() + 1);
    r.trace.outputs.push_back(x);
    r.trace.pool_argmax.resize(cfg.layers.size());
    for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
        LayerForwardResult lfr =
            layer_forward(cfg.layers[i], r.trace.outputs.back(), params.layers[i], i);
        r.trace.outputs.push_back(std::move(lfr.output));
        r.trace.pool_argmax[i] = std::move(lfr.pool_argmax);
    }

    check(params.embed_bias.size() == cfg.embedding_dim, "embedding bias length ",
          params.embed_bias.size(), " does not match embedding_dim ", cfg.embedding_dim);
    std::vector<double> z = params.embed_bias;
    for (std::size_t t = 0; t < cfg.feature_taps.size(); ++t) {
        const Tensor& a = r.trace.outputs[cfg.feature_taps[t] + 1];
        const Matrix& w = params.embed_weights[t];
        check(w.rows() == z.size() && w.cols() == a.size(), "embedding block ", t, " shape ",
              w.rows(), "x", w.cols(), " does not match embedding_dim ", z.size(),
              " and tap size ", a.size());
        for (std::size_t row = 0; row < w.rows(); ++row) {
            double acc = 0.0;
            for (std::size_t col = 0; col < w.cols(); ++col) acc += w(row, col) * a[col];
            z[row] += acc;
        }
    }
    r.trace.embed_pre = z;
    r.trace.feature.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) r.trace.feature[i] = z[i] > 0.0 ? z[i] : 0.0;
    r.feature = r.trace.feature;
    return r;
}

struct BackwardResult {
    ParamGradients grads;
    Tensor input_grad;
};

inline BackwardResult backward(const FeatureVector& dfeature, const ForwardTrace& trace,
                               const NetworkParams& params, const NetworkConfig& cfg) {
    check(trace.outputs.size() == cfg.layers.size() + 1,
          "trace does not match config (", trace.outputs.size(), " activations for ",
          cfg.layers.size(), " layers)");
    check(dfeature.size() == cfg.embedding_dim, "feature gradient length ", dfeature.size(),
          " does not match embedding_dim ", cfg.embedding_dim);
    check(trace.embed_pre.size() == dfeature.size(),
          "trace does not match params (embedding pre-activation length ",
          trace.embed_pre.size(), ")");

    BackwardResult r;
    r.grads = zeros_like(params);

    // ReLU at the embedding: subgradient 0 at exactly 0.
    std::vector<double> dz(dfeature.size());
    for (std::size_t i = 0; i < dz.size(); ++i)
        dz[i] = trace.embed_pre[i] > 0.0 ? dfeature[i] : 0.0;
    r.grads.embed_bias = dz;

    std::vector<Tensor> dout(trace.outputs.size());
    for (std::size_t i = 0; i < dout.size(); ++i) dout[i] = Tensor::zeros(trace.outputs[i].shape());

    for (std::size_t t = 0; t < cfg.feature_taps.size(); ++t) {
        const std::size_t tap = cfg.feature_taps[t];
        const Tensor& a = trace.outputs[tap + 1];
        const Matrix& w = params.embed_weights[t];
        Matrix& dw = r.grads.embed_weights[t];
        Tensor& da = dout[tap + 1];
        for (std::size_t row = 0; row < w.rows(); ++row) {
            const double g = dz[row];
            if (g == 0.0) continue;
            for (std::size_t col = 0; col < w.cols(); ++col) {
                dw(row, col) += g * a[col];
                da[col] += g * w(row, col);
            }
        }
    }

    for (std::size_t i = cfg.layers.size(); i-- > 0;) {
        LayerBackwardResult lbr =
            layer_backward(cfg.layers[i], trace.outputs[i], trace.outputs[i + 1],
                           trace.pool_argmax[i], dout[i + 1], params.layers[i], i);
        if (is_conv_family(cfg.layers[i].kind)) r.grads.layers[i] = std::move(lbr.grads);
        auto& acc = dout[i].values();
        const auto& add = lbr.input_grad.values();
        for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += add[k];
    }
    r.input_grad = std::move(dout[0]);
    return r;
}

// Desk-scale default: the four-stage structure (three pooled convolutions, a
// locally-shared third stage, a locally-connected fourth stage, embedding fed
// by stages three and four) at roughly quarter channel widths for 28x24 input.
inline NetworkConfig default_network_config(std::size_t channels = 1) {
    NetworkConfig cfg;
    cfg.input = {channels, 28, 24};
    cfg.layers = {
        {LayerKind::Conv, 4, 4, 1, 5},
        {LayerKind::Relu},
        {LayerKind::MaxPool, 2, 2, 2},
        {LayerKind::Conv, 3, 3, 1, 10},
        {LayerKind::Relu},
        {LayerKind::MaxPool, 2, 2, 2},
        {LayerKind::ConvLocallyShared, 2, 2, 1, 15, 2, 1},
        {LayerKind::Relu},
        {LayerKind::MaxPool, 2, 2, 2},
        {LayerKind::LocallyConnected, 2, 1, 1, 20},
        {LayerKind::Relu},
    };
    cfg.embedding_dim = 160;
    cfg.feature_taps = {8, 10};
    return cfg;
}

}  // namespace facekit
