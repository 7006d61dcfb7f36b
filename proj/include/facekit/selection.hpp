#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <vector>

#include "facekit/common.hpp"

namespace facekit {

struct SelectionConfig {
    std::size_t budget = 5;
    double epsilon_gain = 0.0;   // a forward step must gain strictly more than this
    double backward_rho = 0.5;   // remove when the removal cost undercuts rho * admission gain
};

struct SelectionStep {
    bool forward = true;
    std::size_t patch = 0;
    double gain = 0.0;      // admission gain (forward) or removal cost (backward)
    double accuracy = 0.0;  // evaluator accuracy after the step
};

struct SelectionState {
    std::vector<std::size_t> selected;
    std::vector<double> accuracy_log;  // per accepted forward step (after its backward sweep)
    std::vector<SelectionStep> steps;
    double final_accuracy = 0.0;
};

using SubsetEvaluator = std::function<double(const std::vector<std::size_t>&)>;

// Forward-backward greedy subset selection over a candidate pool. Each round
// admits the candidate with the best evaluator gain, then drops any selected
// member whose removal costs less than rho times what it gained on admission.
inline SelectionState select_patches(std::size_t pool_size, std::size_t budget,
                                     const SubsetEvaluator& evaluate,
                                     const SelectionConfig& cfg = {}) {
    check(pool_size >= 1, "selection pool is empty");
    check(budget >= 1 && budget <= pool_size, "selection budget ", budget,
          " must lie in [1, pool size ", pool_size, "]");

    SelectionState state;
    std::map<std::size_t, double> admission_gain;

    auto run_eval = [&](const std::vector<std::size_t>& subset) {
        try {
            return evaluate(subset);
        } catch (const std::exception& e) {
            std::string picked;
            for (std::size_t s : state.selected) picked += format_msg(" ", s);
            fail("selection evaluator failed after ", state.steps.size(),
                 " accepted steps (selected:", picked, "): ", e.what());
        }
    };

    double current = run_eval({});
    while (state.selected.size() < budget) {
        // forward step: best-gain candidate
        double best_acc = current;
        std::size_t best_patch = pool_size;
        for (std::size_t cand = 0; cand < pool_size; ++cand) {
            bool taken = false;
            for (std::size_t s : state.selected) taken |= (s == cand);
            if (taken) continue;
            std::vector<std::size_t> trial = state.selected;
            trial.push_back(cand);
            const double acc = run_eval(trial);
            if (acc > best_acc) {
                best_acc = acc;
                best_patch = cand;
            }
        }
        if (best_patch == pool_size || best_acc - current <= cfg.epsilon_gain) break;

        admission_gain[best_patch] = best_acc - current;
        state.selected.push_back(best_patch);
        state.steps.push_back({true, best_patch, best_acc - current, best_acc});
        current = best_acc;

        // backward sweep: drop near-free members
        bool removed = true;
        while (removed && state.selected.size() > 1) {
            removed = false;
            double min_cost = 0.0;
            std::size_t victim_pos = state.selected.size();
            double victim_acc = current;
            for (std::size_t pos = 0; pos < state.selected.size(); ++pos) {
                std::vector<std::size_t> trial;
                for (std::size_t k = 0; k < state.selected.size(); ++k)
                    if (k != pos) trial.push_back(state.selected[k]);
                const double acc = run_eval(trial);
                const double cost = current - acc;
                if (cost < cfg.backward_rho * admission_gain[state.selected[pos]] &&
                    (victim_pos == state.selected.size() || cost < min_cost)) {
                    min_cost = cost;
                    victim_pos = pos;
                    victim_acc = acc;
                }
            }
            if (victim_pos < state.selected.size()) {
                const std::size_t victim = state.selected[victim_pos];
                state.selected.erase(state.selected.begin() + victim_pos);
                state.steps.push_back({false, victim, min_cost, victim_acc});
                current = victim_acc;
                removed = true;
            }
        }
        state.accuracy_log.push_back(current);
    }
    state.final_accuracy = current;
    return state;
}

// Repeated selection into disjoint groups: each round runs the greedy
// selector over the patches not claimed by earlier groups.
inline std::vector<std::vector<std::size_t>> select_disjoint_groups(
    std::size_t pool_size, std::size_t budget, std::size_t groups,
    const SubsetEvaluator& evaluate, const SelectionConfig& cfg = {}) {
    check(groups >= 1, "need at least one group");
    std::vector<std::size_t> available(pool_size);
    for (std::size_t i = 0; i < pool_size; ++i) available[i] = i;

    std::vector<std::vector<std::size_t>> result;
    for (std::size_t g = 0; g < groups && !available.empty(); ++g) {
        const std::size_t round_budget = std::min(budget, available.size());
        const auto mapped = [&](const std::vector<std::size_t>& reduced) {
            std::vector<std::size_t> subset;
            subset.reserve(reduced.size());
            for (std::size_t r : reduced) subset.push_back(available[r]);
            return evaluate(subset);
        };
        const SelectionState st = select_patches(available.size(), round_budget, mapped, cfg);
        if (st.selected.empty()) break;
        std::vector<std::size_t> group;
        for (std::size_t r : st.selected) group.push_back(available[r]);
        std::sort(group.begin(), group.end());
        result.push_back(group);
        std::vector<std::size_t> remaining;
        for (std::size_t a : available) {
            bool taken = false;
            for (std::size_t s : group) taken |= (s == a);
            if (!taken) remaining.push_back(a);
        }
        available.swap(remaining);
    }
    check(!result.empty(), "group selection produced no groups");
    return result;
}

}  // namespace facekit
