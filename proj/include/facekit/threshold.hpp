#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "facekit/common.hpp"

namespace facekit {

struct ThresholdScan {
    double threshold = 0.0;
    std::size_t errors = 0;
    double accuracy = 1.0;
};

namespace detail {

struct ScoredLabel {
    double value;
    bool same;
};

inline std::vector<ScoredLabel> sorted_pairs(const std::vector<double>& values,
                                             const std::vector<bool>& same) {
    check(values.size() == same.size(), "threshold scan: ", values.size(), " values vs ",
          same.size(), " labels");
    check(!values.empty(), "threshold scan needs at least one pair");
    std::vector<ScoredLabel> v(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) v[i] = {values[i], static_cast<bool>(same[i])};
    std::stable_sort(v.begin(), v.end(),
                     [](const ScoredLabel& a, const ScoredLabel& b) { return a.value < b.value; });
    return v;
}

}  // namespace detail

// Margin scan for distances: predict "same" when distance < m. Candidate
// margins are the midpoints between consecutive distinct distances plus the
// minimum distance (predict nothing) and max + 1 (predict everything). Ties
// resolve to the smallest qualifying margin.
inline ThresholdScan best_margin_lower_same(const std::vector<double>& distances,
                                            const std::vector<bool>& same) {
    const auto v = detail::sorted_pairs(distances, same);
    const std::size_t n = v.size();
    std::size_t total_same = 0;
    for (const auto& e : v) total_same += e.same ? 1 : 0;

    // cut k: entries [0, k) are predicted same
    auto margin_at = [&](std::size_t k) {
        if (k == 0) return v.front().value;
        if (k == n) return v.back().value + 1.0;
        return 0.5 * (v[k - 1].value + v[k].value);
    };

    ThresholdScan best;
    std::size_t same_below = 0;  // same-labelled pairs with distance below the cut
    std::size_t diff_below = 0;
    bool have = false;
    for (std::size_t k = 0; k <= n; ++k) {
        const bool valid_cut = (k == 0 || k == n || v[k - 1].value < v[k].value);
        if (valid_cut) {
            const std::size_t errors = diff_below + (total_same - same_below);
            if (!have || errors < best.errors) {
                best.errors = errors;
                best.threshold = margin_at(k);
                have = true;
            }
        }
        if (k < n) (v[k].same ? same_below : diff_below) += 1;
    }
    best.accuracy = 1.0 - static_cast<double>(best.errors) / static_cast<double>(n);
    return best;
}

// Score scan: predict "same" when score > t. Candidates are midpoints between
// distinct consecutive scores plus min - 1 (predict everything) and the
// maximum score (predict nothing). Ties resolve to the smallest threshold.
inline ThresholdScan best_threshold_higher_same(const std::vector<double>& scores,
                                                const std::vector<bool>& same) {
    const auto v = detail::sorted_pairs(scores, same);
    const std::size_t n = v.size();
    std::size_t total_diff = 0;
    for (const auto& e : v) total_diff += e.same ? 0 : 1;

    // cut k: entries [0, k) are predicted different
    auto threshold_at = [&](std::size_t k) {
        if (k == 0) return v.front().value - 1.0;
        if (k == n) return v.back().value;
        return 0.5 * (v[k - 1].value + v[k].value);
    };

    ThresholdScan best;
    std::size_t same_below = 0;
    std::size_t diff_below = 0;
    bool have = false;
    for (std::size_t k = 0; k <= n; ++k) {
        const bool valid_cut = (k == 0 || k == n || v[k - 1].value < v[k].value);
        if (valid_cut) {
            const std::size_t errors = same_below + (total_diff - diff_below);
            if (!have || errors < best.errors) {
                best.errors = errors;
                best.threshold = threshold_at(k);
                have = true;
            }
        }
        if (k < n) (v[k].same ? same_below : diff_below) += 1;
    }
    best.accuracy = 1.0 - static_cast<double>(best.errors) / static_cast<double>(n);
    return best;
}

}  // namespace facekit
