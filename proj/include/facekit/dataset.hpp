#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "facekit/tensor.hpp"

namespace facekit {

struct LabeledDataset {
    std::vector<Tensor> images;       // [C,H,W], values in [0,1]
    std::vector<std::size_t> labels;  // dense, 0..n_identities-1
    std::vector<std::vector<std::array<double, 2>>> landmarks;  // optional, (x, y) per point
    std::vector<std::vector<std::size_t>> by_identity;

    std::size_t size() const { return images.size(); }
    std::size_t n_identities() const { return by_identity.size(); }
    bool has_landmarks() const { return !landmarks.empty(); }

    void rebuild_index() {
        by_identity.clear();
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] >= by_identity.size()) by_identity.resize(labels[i] + 1);
            by_identity[labels[i]].push_back(i);
        }
        for (const auto& group : by_identity)
            check(!group.empty(), "identity index has an empty group after densification");
    }
};

struct SyntheticSpec {
    std::size_t identities = 44;
    std::size_t samples_per_identity = 20;
    std::size_t channels = 1;
    std::size_t height = 28;
    std::size_t width = 24;
    double prototype_stddev = 0.22;   // contrast of the per-identity prototype
    std::size_t smooth_radius = 2;    // box smoothing of the prototype noise field
    double noise_stddev = 0.06;       // per-pixel perturbation
    int shift_range = 2;              // integer shifts in [-r, r] per axis
    double brightness_range = 0.18;   // additive whole-image jitter
    std::uint64_t seed = 1;
};

namespace detail {

inline void box_smooth(std::vector<double>& img, std::size_t h, std::size_t w,
                       std::size_t radius) {
    if (radius == 0) return;
    std::vector<double> tmp(img.size());
    const auto r = static_cast<long>(radius);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            double acc = 0.0;
            int count = 0;
            for (long dy = -r; dy <= r; ++dy)
                for (long dx = -r; dx <= r; ++dx) {
                    const long yy = static_cast<long>(y) + dy;
                    const long xx = static_cast<long>(x) + dx;
                    if (yy < 0 || xx < 0 || yy >= static_cast<long>(h) ||
                        xx >= static_cast<long>(w))
                        continue;
                    acc += img[yy * w + xx];
                    ++count;
                }
            tmp[y * w + x] = acc / count;
        }
    img.swap(tmp);
}

inline double quantize8(double v) {
    const double c = std::min(1.0, std::max(0.0, v));
    return std::round(c * 255.0) / 255.0;
}

}  // namespace detail

// Each identity is a smoothed random prototype; each sample is the prototype
// shifted, brightness-jittered, and noised, then quantized to the 8-bit grid
// so that writing to PGM/PPM and re-reading reproduces the dataset exactly.
// Landmarks are four fixed template points carried along with the shift.
inline LabeledDataset generate_dataset(const SyntheticSpec& spec) {
    check(spec.identities >= 1 && spec.samples_per_identity >= 1,
          "synthetic spec needs at least one identity and one sample");
    check(spec.channels == 1 || spec.channels == 3, "synthetic channels must be 1 or 3");
    check(spec.prototype_stddev >= 0 && spec.noise_stddev >= 0 && spec.brightness_range >= 0,
          "synthetic variances must be nonnegative");
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> shift(-spec.shift_range, spec.shift_range);
    std::uniform_real_distribution<double> bright(-spec.brightness_range, spec.brightness_range);

    const std::size_t h = spec.height, w = spec.width, c = spec.channels;
    const double x0 = static_cast<double>(w) / 4.0;
    const double x1 = 3.0 * static_cast<double>(w) / 4.0;
    const double y_eyes = static_cast<double>(h) / 3.0;
    const double y_mouth = 3.0 * static_cast<double>(h) / 4.0;
    const std::vector<std::array<double, 2>> template_points{
        {x0, y_eyes}, {x1, y_eyes}, {static_cast<double>(w) / 2.0, static_cast<double>(h) / 2.0},
        {static_cast<double>(w) / 2.0, y_mouth}};

    LabeledDataset ds;
    for (std::size_t id = 0; id < spec.identities; ++id) {
        std::vector<std::vector<double>> proto(c, std::vector<double>(h * w));
        for (auto& plane : proto) {
            for (double& v : plane) v = unit(rng);
            detail::box_smooth(plane, h, w, spec.smooth_radius);
            detail::box_smooth(plane, h, w, spec.smooth_radius);
            double mean = 0.0;
            for (double v : plane) mean += v;
            mean /= static_cast<double>(plane.size());
            double var = 0.0;
            for (double v : plane) var += (v - mean) * (v - mean);
            var /= static_cast<double>(plane.size());
            const double scale = var > 0 ? spec.prototype_stddev / std::sqrt(var) : 0.0;
            for (double& v : plane) v = 0.5 + (v - mean) * scale;
        }

        for (std::size_t s = 0; s < spec.samples_per_identity; ++s) {
            const int dy = spec.shift_range > 0 ? shift(rng) : 0;
            const int dx = spec.shift_range > 0 ? shift(rng) : 0;
            const double db = bright(rng);
            Tensor img({c, h, w});
            for (std::size_t ch = 0; ch < c; ++ch)
                for (std::size_t y = 0; y < h; ++y)
                    for (std::size_t x = 0; x < w; ++x) {
                        // edge-replicated lookup of the shifted prototype
                        long sy = static_cast<long>(y) - dy;
                        long sx = static_cast<long>(x) - dx;
                        sy = std::min(std::max(sy, 0l), static_cast<long>(h) - 1);
                        sx = std::min(std::max(sx, 0l), static_cast<long>(w) - 1);
                        double v = proto[ch][sy * w + sx] + db;
                        if (spec.noise_stddev > 0) v += spec.noise_stddev * unit(rng);
                        img.at3(ch, y, x) = detail::quantize8(v);
                    }
            ds.images.push_back(std::move(img));
            ds.labels.push_back(id);
            std::vector<std::array<double, 2>> pts = template_points;
            for (auto& p : pts) {
                p[0] += dx;
                p[1] += dy;
            }
            ds.landmarks.push_back(std::move(pts));
        }
    }
    ds.rebuild_index();
    return ds;
}

// Identity-level split: identities [0, first) stay in the first part.
inline std::pair<LabeledDataset, LabeledDataset> split_by_identity(const LabeledDataset& ds,
                                                                   std::size_t first) {
    check(first >= 1 && first < ds.n_identities(), "split point ", first,
          " must leave identities on both sides (", ds.n_identities(), " total)");
    LabeledDataset a, b;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        LabeledDataset& dst = ds.labels[i] < first ? a : b;
        dst.images.push_back(ds.images[i]);
        dst.labels.push_back(ds.labels[i] < first ? ds.labels[i] : ds.labels[i] - first);
        if (ds.has_landmarks()) dst.landmarks.push_back(ds.landmarks[i]);
    }
    a.rebuild_index();
    b.rebuild_index();
    return {std::move(a), std::move(b)};
}

// ---- PGM/PPM (binary variants, 8-bit) ----

inline void write_pnm(const std::string& path, const Tensor& img) {
    check(img.rank() == 3, "image tensor must be rank 3");
    const std::size_t c = img.shape()[0], h = img.shape()[1], w = img.shape()[2];
    check(c == 1 || c == 3, "PNM writer supports 1 or 3 channels, got ", c);
    std::ofstream os(path, std::ios::binary);
    check(os.good(), "cannot open '", path, "' for writing");
    os << (c == 1 ? "P5" : "P6") << "\n" << w << " " << h << "\n255\n";
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t ch = 0; ch < c; ++ch) {
                const double v = img.at3(ch, y, x);
                const int byte = static_cast<int>(std::lround(std::min(1.0, std::max(0.0, v)) * 255.0));
                os.put(static_cast<char>(byte));
            }
    check(os.good(), "write failed for '", path, "'");
}

inline Tensor read_pnm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    check(is.good(), "cannot open image '", path, "'");
    std::string magic;
    is >> magic;
    check(magic == "P5" || magic == "P6", "'", path, "' is not a binary PGM/PPM file");
    auto next_token = [&]() {
        std::string tok;
        while (is >> tok) {
            if (tok[0] == '#') {
                std::string rest;
                std::getline(is, rest);
                continue;
            }
            return tok;
        }
        fail("truncated PNM header in '", path, "'");
    };
    const std::size_t w = std::stoul(next_token());
    const std::size_t h = std::stoul(next_token());
    const std::size_t maxval = std::stoul(next_token());
    check(maxval == 255, "'", path, "' must use maxval 255, got ", maxval);
    is.get();  // single whitespace after maxval
    const std::size_t c = magic == "P5" ? 1 : 3;
    Tensor img({c, h, w});
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t ch = 0; ch < c; ++ch) {
                const int byte = is.get();
                check(byte != EOF, "truncated pixel data in '", path, "'");
                img.at3(ch, y, x) = static_cast<double>(byte) / 255.0;
            }
    return img;
}

// ---- manifest: one record per line, "relative-path<TAB>label[<TAB>x,y;x,y;...]" ----

inline std::string landmarks_to_field(const std::vector<std::array<double, 2>>& pts) {
    std::ostringstream os;
    char buf[40];
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i) os << ';';
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g", pts[i][0], pts[i][1]);
        os << buf;
    }
    return os.str();
}

inline std::vector<std::array<double, 2>> landmarks_from_field(const std::string& field) {
    std::vector<std::array<double, 2>> pts;
    std::istringstream is(field);
    std::string part;
    while (std::getline(is, part, ';')) {
        const auto comma = part.find(',');
        check(comma != std::string::npos, "malformed landmark entry '", part, "'");
        pts.push_back({std::stod(part.substr(0, comma)), std::stod(part.substr(comma + 1))});
    }
    return pts;
}

inline void write_dataset(const LabeledDataset& ds, const std::string& dir,
                          const std::string& manifest_name = "manifest.tsv") {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::ofstream manifest(fs::path(dir) / manifest_name);
    check(manifest.good(), "cannot write manifest in '", dir, "'");
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const std::size_t c = ds.images[i].shape()[0];
        const std::string name = format_msg("img_", i, c == 1 ? ".pgm" : ".ppm");
        write_pnm((fs::path(dir) / name).string(), ds.images[i]);
        manifest << name << '\t' << ds.labels[i];
        if (ds.has_landmarks() && !ds.landmarks[i].empty())
            manifest << '\t' << landmarks_to_field(ds.landmarks[i]);
        manifest << '\n';
    }
}

struct IngestReport {
    std::vector<std::string> warnings;
};

inline LabeledDataset ingest_dataset(const std::string& manifest_path,
                                     IngestReport* report = nullptr) {
    namespace fs = std::filesystem;
    std::ifstream is(manifest_path);
    check(is.good(), "cannot open manifest '", manifest_path, "'");
    const fs::path base = fs::path(manifest_path).parent_path();

    LabeledDataset ds;
    std::vector<std::string> seen_paths;
    std::vector<long> raw_labels;
    std::string line;
    std::size_t record = 0;
    while (std::getline(is, line)) {
        ++record;
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const auto tab = line.find('\t', start);
            fields.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        check(fields.size() >= 2, "manifest record ", record, ": expected path<TAB>label");

        bool duplicate = false;
        for (const auto& p : seen_paths)
            if (p == fields[0]) duplicate = true;
        if (duplicate) {
            if (report)
                report->warnings.push_back(
                    format_msg("record ", record, ": duplicate image '", fields[0], "' skipped"));
            continue;
        }
        seen_paths.push_back(fields[0]);

        const fs::path img_path = base / fields[0];
        check(fs::exists(img_path), "manifest record ", record, ": missing file '",
              img_path.string(), "'");
        Tensor img = read_pnm(img_path.string());
        if (!ds.images.empty())
            check(img.shape() == ds.images.front().shape(), "manifest record ", record,
                  ": image extents ", shape_str(img.shape()), " differ from first image ",
                  shape_str(ds.images.front().shape()));
        ds.images.push_back(std::move(img));

        long label;
        try {
            label = std::stol(fields[1]);
        } catch (const std::exception&) {
            fail("manifest record ", record, ": malformed label '", fields[1], "'");
        }
        raw_labels.push_back(label);
        ds.landmarks.push_back(fields.size() >= 3 ? landmarks_from_field(fields[2])
                                                  : std::vector<std::array<double, 2>>{});
    }
    check(!ds.images.empty(), "manifest '", manifest_path, "' lists no images");

    // densify labels in first-appearance order
    std::vector<long> distinct;
    for (long l : raw_labels) {
        bool known = false;
        for (long d : distinct)
            if (d == l) known = true;
        if (!known) distinct.push_back(l);
    }
    for (long l : raw_labels) {
        for (std::size_t k = 0; k < distinct.size(); ++k)
            if (distinct[k] == l) {
                ds.labels.push_back(k);
                break;
            }
    }
    bool any_landmarks = false;
    for (const auto& pts : ds.landmarks)
        if (!pts.empty()) any_landmarks = true;
    if (!any_landmarks) ds.landmarks.clear();
    ds.rebuild_index();
    return ds;
}

}  // namespace facekit
