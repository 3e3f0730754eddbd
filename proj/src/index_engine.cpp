#include "tcpindex/index_engine.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <tuple>

namespace tcpindex {

namespace {
constexpr double kIndexTol = 1e-9;  // monotonicity / positive-marginal tolerance
}

PolicySet PolicySet::full(int capacity) {
    PolicySet s(capacity);
    for (int n = 1; n <= capacity; ++n) s.insert(n);
    return s;
}

PolicySet PolicySet::from_mask(int capacity, std::uint64_t mask) {
    if (capacity > 64) throw std::invalid_argument("from_mask supports capacity <= 64");
    PolicySet s(capacity);
    if (!s.words_.empty()) s.words_[0] = mask;
    return s;
}

int PolicySet::size() const {
    int count = 0;
    for (auto w : words_) count += std::popcount(w);
    return count;
}

bool PolicySet::subset_of(const PolicySet& other) const {
    for (std::size_t i = 0; i < words_.size(); ++i) {
        std::uint64_t rhs = i < other.words_.size() ? other.words_[i] : 0;
        if (words_[i] & ~rhs) return false;
    }
    return true;
}

std::vector<int> PolicySet::states() const {
    std::vector<int> out;
    for (int n = 1; n <= capacity_; ++n)
        if (contains(n)) out.push_back(n);
    return out;
}

PolicyEvaluation evaluate_policy(const FlowMdp& mdp, const PolicySet& admit_set, int start) {
    const int n_states = mdp.state_count();
    const long double beta = mdp.params.beta;

    // The policy is deterministic, so the trajectory from `start` is a tail
    // followed by a cycle; both sum in closed form.
    std::vector<int> visit_pos(n_states + 1, -1);
    std::vector<int> path;
    path.reserve(n_states + 1);
    int s = start;
    while (visit_pos[s] < 0) {
        visit_pos[s] = static_cast<int>(path.size());
        path.push_back(s);
        s = admit_set.contains(s) ? mdp.succ1[s - 1] : mdp.succ0[s - 1];
    }
    const int cycle_start = visit_pos[s];
    const int cycle_len = static_cast<int>(path.size()) - cycle_start;

    long double tail_work = 0, tail_reward = 0, disc = 1.0L;
    for (int t = 0; t < cycle_start; ++t) {
        const int n = path[t];
        if (admit_set.contains(n)) {
            tail_work += disc * mdp.work1[n - 1];
            tail_reward += disc * mdp.reward1[n - 1];
        }
        disc *= beta;
    }
    long double cycle_work = 0, cycle_reward = 0, cycle_disc = 1.0L;
    for (int t = cycle_start; t < static_cast<int>(path.size()); ++t) {
        const int n = path[t];
        if (admit_set.contains(n)) {
            cycle_work += cycle_disc * mdp.work1[n - 1];
            cycle_reward += cycle_disc * mdp.reward1[n - 1];
        }
        cycle_disc *= beta;
    }
    // disc is now beta^cycle_start; 1 - beta^L via expm1 keeps precision at beta near 1
    const long double one_minus_beta_l = -std::expm1(cycle_len * std::log(beta));
    const long double repeat = disc / one_minus_beta_l;

    PolicyEvaluation eval;
    eval.total_work = static_cast<double>(tail_work + repeat * cycle_work);
    eval.total_reward = static_cast<double>(tail_reward + repeat * cycle_reward);
    return eval;
}

IndexTable compute_indices_adaptive_greedy(const FlowMdp& mdp) {
    const int n_states = mdp.state_count();
    const double beta = mdp.params.beta;

    IndexTable table;
    table.values.assign(n_states, 0.0);
    table.assignment_order.reserve(n_states);

    PolicySet active(n_states);
    std::vector<char> assigned(n_states + 1, 0);
    bool marginals_positive = true;
    bool order_nonincreasing = true;
    double prev_value = std::numeric_limits<double>::infinity();

    for (int round = 0; round < n_states; ++round) {
        std::vector<PolicyEvaluation> follow(n_states + 1);
        for (int n = 1; n <= n_states; ++n) follow[n] = evaluate_policy(mdp, active, n);

        // Marginal rate of switching state i on for one step, then following
        // the current active set. Argmax with ties to the lowest state.
        int best_state = -1;
        double best_rate = 0, best_work = 0;
        int fallback_state = -1;
        double fallback_rate = 0, fallback_work = 0;
        for (int i = 1; i <= n_states; ++i) {
            if (assigned[i]) continue;
            const int up = mdp.succ1[i - 1], down = mdp.succ0[i - 1];
            const double marg_work =
                mdp.work1[i - 1] + beta * (follow[up].total_work - follow[down].total_work);
            const double marg_reward =
                mdp.reward1[i - 1] + beta * (follow[up].total_reward - follow[down].total_reward);
            double rate;
            if (marg_work != 0.0)
                rate = marg_reward / marg_work;
            else
                rate = marg_reward > 0 ? std::numeric_limits<double>::infinity()
                                       : -std::numeric_limits<double>::infinity();
            if (marg_work > kIndexTol) {
                if (best_state < 0 || rate > best_rate) {
                    best_state = i;
                    best_rate = rate;
                    best_work = marg_work;
                }
            } else if (fallback_state < 0) {
                fallback_state = i;
                fallback_rate = rate;
                fallback_work = marg_work;
            }
        }
        if (best_state < 0) {  // no candidate with positive marginal work
            best_state = fallback_state;
            best_rate = fallback_rate;
            best_work = fallback_work;
        }
        if (best_work <= kIndexTol) marginals_positive = false;
        if (best_rate > prev_value + kIndexTol) order_nonincreasing = false;

        table.values[best_state - 1] = best_rate;
        table.assignment_order.push_back(best_state);
        assigned[best_state] = 1;
        active.insert(best_state);
        prev_value = best_rate;
    }

    table.indexable = marginals_positive && order_nonincreasing;
    table.monotone_nonincreasing = true;
    for (int n = 2; n <= n_states; ++n)
        if (table.values[n - 1] > table.values[n - 2] + kIndexTol) {
            table.monotone_nonincreasing = false;
            break;
        }
    return table;
}

namespace {

IndexTable table_from_values(std::vector<double> values) {
    IndexTable table;
    table.values = std::move(values);
    const int n_states = static_cast<int>(table.values.size());
    table.assignment_order.resize(n_states);
    for (int n = 1; n <= n_states; ++n) table.assignment_order[n - 1] = n;
    std::stable_sort(table.assignment_order.begin(), table.assignment_order.end(),
                     [&](int a, int b) { return table.values[a - 1] > table.values[b - 1]; });
    table.indexable = true;
    table.monotone_nonincreasing = true;
    for (int n = 2; n <= n_states; ++n)
        if (table.values[n - 1] > table.values[n - 2] + kIndexTol)
            table.monotone_nonincreasing = false;
    return table;
}

double max_abs_gap(const std::vector<double>& a, const std::vector<double>& b) {
    double gap = 0;
    for (std::size_t i = 0; i < a.size(); ++i) gap = std::max(gap, std::abs(a[i] - b[i]));
    return gap;
}

}  // namespace

std::optional<IndexTable> closed_form_indices(const FlowMdp& mdp) {
    const int n_states = mdp.state_count();
    if (n_states > 3) return std::nullopt;

    const double beta = mdp.params.beta;
    const auto& r = mdp.reward1;
    const auto& w = mdp.work1;

    if (n_states == 1) return table_from_values({r[0] / w[0]});

    const double value1 = r[0] / w[0];
    const double value2_chain =
        (r[1] + beta * (r[1] - r[0])) / (w[1] + beta * (w[1] - w[0]));
    if (n_states == 2) return table_from_values({value1, value2_chain});

    if (mdp.succ0[2] == 1) {
        // gamma < 2/3: every rejection restarts at window 1
        const double value3 =
            (r[2] + beta * (r[2] - r[0]) + beta * beta * (r[2] - r[1])) /
            (w[2] + beta * (w[2] - w[0]) + beta * beta * (w[2] - w[1]));
        return table_from_values({value1, value2_chain, value3});
    }

    // gamma >= 2/3: rejection at window 3 only steps down to 2. Two candidate
    // triples exist and the applicable one depends on beta; detect it against
    // the greedy computation. The second triple's third value is the state-3
    // indifference solution ((1+b)R3 - b^2 R1)/((1+b)W3 - b^2 W1); note the
    // (1+b) factors, without which the triple contradicts its own ordering.
    const std::vector<double> threshold_triple = {
        value1,
        (r[1] - beta * r[0]) / (w[1] - beta * w[0]),
        (r[2] + beta * (r[2] - r[1])) / (w[2] + beta * (w[2] - w[1]))};
    const std::vector<double> swapped_triple = {
        value1,
        (r[1] + beta * (r[2] - r[0]) + beta * beta * (r[2] - r[1])) /
            (w[1] + beta * (w[2] - w[0]) + beta * beta * (w[2] - w[1])),
        ((1 + beta) * r[2] - beta * beta * r[0]) /
            ((1 + beta) * w[2] - beta * beta * w[0])};

    const IndexTable greedy = compute_indices_adaptive_greedy(mdp);
    if (max_abs_gap(threshold_triple, greedy.values) <=
        max_abs_gap(swapped_triple, greedy.values))
        return table_from_values(threshold_triple);
    return table_from_values(swapped_triple);
}

const IndexTable& cached_index_table(const FlowParams& params) {
    params.validate();
    using Key = std::tuple<int, double, double, double>;
    static std::mutex cache_mutex;
    static std::map<Key, std::unique_ptr<const IndexTable>> cache;

    const Key key{params.max_window, params.gamma, params.alpha, params.beta};
    std::lock_guard lock(cache_mutex);
    auto it = cache.find(key);
    if (it == cache.end()) {
        auto table =
            std::make_unique<const IndexTable>(compute_indices_adaptive_greedy(build_mdp(params)));
        it = cache.emplace(key, std::move(table)).first;
    }
    return *it->second;
}

std::vector<double> index_lookup_table(const FlowParams& params) {
    return cached_index_table(params).values;
}

void write_index_csv(std::ostream& out, const IndexTable& table) {
    out << "state,index_value\n";
    const auto old_precision = out.precision(17);
    for (std::size_t n = 0; n < table.values.size(); ++n)
        out << n + 1 << ',' << table.values[n] << '\n';
    out.precision(old_precision);
}

}  // namespace tcpindex
