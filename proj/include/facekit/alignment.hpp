#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "facekit/tensor.hpp"

namespace facekit {

struct LandmarkSet {
    std::vector<std::array<double, 2>> points;  // (x, y) in image coordinates
};

struct SimilarityTransform {
    double scale = 1.0;
    double angle = 0.0;  // radians, counterclockwise
    double tx = 0.0, ty = 0.0;

    std::array<double, 2> apply(double x, double y) const {
        const double c = std::cos(angle), s = std::sin(angle);
        return {scale * (c * x - s * y) + tx, scale * (s * x + c * y) + ty};
    }

    SimilarityTransform inverse() const {
        check(scale > 0.0, "similarity transform must have positive scale");
        SimilarityTransform inv;
        inv.scale = 1.0 / scale;
        inv.angle = -angle;
        const double c = std::cos(inv.angle), s = std::sin(inv.angle);
        inv.tx = -inv.scale * (c * tx - s * ty);
        inv.ty = -inv.scale * (s * tx + c * ty);
        return inv;
    }
};

struct SimilarityFit {
    SimilarityTransform transform;
    double rms_residual = 0.0;
};

// Least-squares similarity (rotation + uniform scale + translation) mapping
// src points onto dst points, closed form via the centered cross-moments.
inline SimilarityFit estimate_similarity(const LandmarkSet& src, const LandmarkSet& dst) {
    check(src.points.size() == dst.points.size(), "landmark sets differ in size: ",
          src.points.size(), " vs ", dst.points.size());
    const std::size_t n = src.points.size();
    check(n >= 2, "similarity estimation needs at least two point pairs");

    double sx = 0, sy = 0, dx = 0, dy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += src.points[i][0];
        sy += src.points[i][1];
        dx += dst.points[i][0];
        dy += dst.points[i][1];
    }
    sx /= n, sy /= n, dx /= n, dy /= n;

    double dot_sum = 0, cross_sum = 0, src_norm = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double ax = src.points[i][0] - sx, ay = src.points[i][1] - sy;
        const double bx = dst.points[i][0] - dx, by = dst.points[i][1] - dy;
        dot_sum += ax * bx + ay * by;
        cross_sum += ax * by - ay * bx;
        src_norm += ax * ax + ay * ay;
    }
    check(src_norm > 0.0, "source landmarks are coincident");

    SimilarityFit fit;
    fit.transform.angle = std::atan2(cross_sum, dot_sum);
    fit.transform.scale = std::sqrt(dot_sum * dot_sum + cross_sum * cross_sum) / src_norm;
    check(fit.transform.scale > 0.0, "degenerate similarity fit (zero scale)");
    const double c = std::cos(fit.transform.angle), s = std::sin(fit.transform.angle);
    fit.transform.tx = dx - fit.transform.scale * (c * sx - s * sy);
    fit.transform.ty = dy - fit.transform.scale * (s * sx + c * sy);

    double sq_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = fit.transform.apply(src.points[i][0], src.points[i][1]);
        const double ex = p[0] - dst.points[i][0];
        const double ey = p[1] - dst.points[i][1];
        sq_sum += ex * ex + ey * ey;
    }
    fit.rms_residual = std::sqrt(sq_sum / n);
    return fit;
}

enum class ChannelSelect { All, Gray, Red, Green, Blue };

inline const char* channel_select_name(ChannelSelect c) {
    switch (c) {
        case ChannelSelect::All: return "all";
        case ChannelSelect::Gray: return "gray";
        case ChannelSelect::Red: return "red";
        case ChannelSelect::Green: return "green";
        case ChannelSelect::Blue: return "blue";
    }
    return "?";
}

inline ChannelSelect channel_select_from_name(const std::string& s) {
    if (s == "all") return ChannelSelect::All;
    if (s == "gray") return ChannelSelect::Gray;
    if (s == "red") return ChannelSelect::Red;
    if (s == "green") return ChannelSelect::Green;
    if (s == "blue") return ChannelSelect::Blue;
    fail("unknown channel selection '", s, "'");
}

// One crop of the aligned face: anchored at a landmark (or the canonical
// frame center), offset and scaled in canonical units, resampled to fixed
// extents, optionally flipped. A patch and its flipped counterpart share a
// trained network via network_id.
struct PatchSpec {
    std::string name;
    int anchor_landmark = -1;  // -1: canonical frame center
    double offset_x = 0.0, offset_y = 0.0;
    std::size_t out_h = 28, out_w = 24;
    double scale = 1.0;  // canonical units per output pixel
    ChannelSelect channels = ChannelSelect::Gray;
    bool flip = false;
    std::size_t network_id = 0;
};

namespace detail {

inline double bilinear_sample(const Tensor& img, std::size_t channel, double x, double y) {
    const double h = static_cast<double>(img.shape()[1]);
    const double w = static_cast<double>(img.shape()[2]);
    // edge replication
    x = std::min(std::max(x, 0.0), w - 1.0);
    y = std::min(std::max(y, 0.0), h - 1.0);
    const std::size_t x0 = static_cast<std::size_t>(x);
    const std::size_t y0 = static_cast<std::size_t>(y);
    const std::size_t x1 = std::min(x0 + 1, img.shape()[2] - 1);
    const std::size_t y1 = std::min(y0 + 1, img.shape()[1] - 1);
    const double fx = x - static_cast<double>(x0);
    const double fy = y - static_cast<double>(y0);
    const double top = (1.0 - fx) * img.at3(channel, y0, x0) + fx * img.at3(channel, y0, x1);
    const double bot = (1.0 - fx) * img.at3(channel, y1, x0) + fx * img.at3(channel, y1, x1);
    return (1.0 - fy) * top + fy * bot;
}

}  // namespace detail

// Extracts the patch from the original image. `to_canonical` aligns image
// coordinates to the canonical frame; sampling walks the patch grid in
// canonical coordinates and pulls pixels through the inverse transform with
// bilinear interpolation and edge replication. The flip is applied last.
inline Tensor extract_patch(const Tensor& image, const PatchSpec& spec,
                            const SimilarityTransform& to_canonical,
                            std::array<double, 2> anchor_canonical) {
    check(image.rank() == 3, "extract_patch expects a rank-3 image");
    check(spec.out_h >= 1 && spec.out_w >= 1, "patch extents must be positive");
    check(spec.scale > 0.0, "patch scale must be positive, got ", spec.scale);
    const std::size_t img_channels = image.shape()[0];

    std::vector<std::size_t> src_channels;
    switch (spec.channels) {
        case ChannelSelect::All:
            for (std::size_t c = 0; c < img_channels; ++c) src_channels.push_back(c);
            break;
        case ChannelSelect::Gray:
            src_channels.push_back(img_channels);  // sentinel: average
            break;
        case ChannelSelect::Red:
        case ChannelSelect::Green:
        case ChannelSelect::Blue: {
            const std::size_t idx = static_cast<std::size_t>(spec.channels) -
                                    static_cast<std::size_t>(ChannelSelect::Red);
            check(img_channels == 3, "channel selection '",
                  channel_select_name(spec.channels), "' needs a 3-channel image, got ",
                  img_channels);
            src_channels.push_back(idx);
            break;
        }
    }

    const SimilarityTransform from_canonical = to_canonical.inverse();
    const double cx = anchor_canonical[0] + spec.offset_x;
    const double cy = anchor_canonical[1] + spec.offset_y;
    const double half_w = (static_cast<double>(spec.out_w) - 1.0) / 2.0;
    const double half_h = (static_cast<double>(spec.out_h) - 1.0) / 2.0;

    Tensor out({src_channels.size(), spec.out_h, spec.out_w});
    for (std::size_t oc = 0; oc < src_channels.size(); ++oc)
        for (std::size_t y = 0; y < spec.out_h; ++y)
            for (std::size_t x = 0; x < spec.out_w; ++x) {
                const double ux = cx + (static_cast<double>(x) - half_w) * spec.scale;
                const double uy = cy + (static_cast<double>(y) - half_h) * spec.scale;
                const auto p = from_canonical.apply(ux, uy);
                double v;
                if (src_channels[oc] == img_channels) {
                    double acc = 0.0;
                    for (std::size_t c = 0; c < img_channels; ++c)
                        acc += detail::bilinear_sample(image, c, p[0], p[1]);
                    v = acc / static_cast<double>(img_channels);
                } else {
                    v = detail::bilinear_sample(image, src_channels[oc], p[0], p[1]);
                }
                const std::size_t ox = spec.flip ? spec.out_w - 1 - x : x;
                out.at3(oc, y, ox) = v;
            }
    return out;
}

// Anchor position in canonical coordinates: a transformed landmark or the
// provided canonical center.
inline std::array<double, 2> patch_anchor(const PatchSpec& spec, const LandmarkSet& landmarks,
                                          const SimilarityTransform& to_canonical,
                                          std::array<double, 2> canonical_center) {
    if (spec.anchor_landmark < 0) return canonical_center;
    const std::size_t idx = static_cast<std::size_t>(spec.anchor_landmark);
    check(idx < landmarks.points.size(), "patch anchor landmark ", idx, " out of range (",
          landmarks.points.size(), " landmarks)");
    return to_canonical.apply(landmarks.points[idx][0], landmarks.points[idx][1]);
}

}  // namespace facekit
