#include "tcpindex/mdp_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace tcpindex {

namespace {

// Exact discounted value of a fixed admission set under the charged reward
// r - nu*w, for every state at once. Same tail+cycle closed form as
// evaluate_policy, kept in long double.
std::vector<long double> evaluate_charged(const FlowMdp& mdp, const PolicySet& admit_set,
                                          long double nu) {
    const int n_states = mdp.state_count();
    const long double beta = mdp.params.beta;
    std::vector<long double> value(n_states + 1, 0.0L);
    std::vector<char> solved(n_states + 1, 0);

    auto charged = [&](int n) -> long double {
        if (!admit_set.contains(n)) return 0.0L;
        return static_cast<long double>(mdp.reward1[n - 1]) - nu * mdp.work1[n - 1];
    };
    auto next = [&](int n) { return admit_set.contains(n) ? mdp.succ1[n - 1] : mdp.succ0[n - 1]; };

    std::vector<int> visit_pos(n_states + 1, -1);
    std::vector<int> path;
    for (int start = 1; start <= n_states; ++start) {
        if (solved[start]) continue;
        path.clear();
        int s = start;
        while (visit_pos[s] < 0 && !solved[s]) {
            visit_pos[s] = static_cast<int>(path.size());
            path.push_back(s);
            s = next(s);
        }
        long double continuation;
        int resolved_from;
        if (!solved[s]) {
            // ran into the current path: fold the fresh cycle first
            const int cycle_start = visit_pos[s];
            const int cycle_len = static_cast<int>(path.size()) - cycle_start;
            long double cycle_sum = 0, disc = 1.0L;
            for (int t = cycle_start; t < static_cast<int>(path.size()); ++t) {
                cycle_sum += disc * charged(path[t]);
                disc *= beta;
            }
            const long double denom = -std::expm1(cycle_len * std::log(beta));
            value[s] = cycle_sum / denom;
            solved[s] = 1;
            continuation = value[s];
            resolved_from = cycle_start;
        } else {
            continuation = value[s];  // an already-solved state
            resolved_from = static_cast<int>(path.size());
        }
        for (int t = resolved_from - 1; t >= 0; --t) {
            const int n = path[t];
            value[n] = charged(n) + beta * continuation;
            solved[n] = 1;
            continuation = value[n];
        }
        for (int n : path) visit_pos[n] = -1;
    }
    return value;
}

struct QPair {
    long double admit, reject;
};

QPair action_values(const FlowMdp& mdp, const std::vector<long double>& value, int n,
                    long double nu) {
    const long double beta = mdp.params.beta;
    QPair q;
    q.admit = static_cast<long double>(mdp.reward1[n - 1]) - nu * mdp.work1[n - 1] +
              beta * value[mdp.succ1[n - 1]];
    q.reject = beta * value[mdp.succ0[n - 1]];
    return q;
}

struct ExactSolve {
    std::vector<long double> value;
    PolicySet admit;
};

// Policy iteration with exact evaluation; switches only on strict Q
// improvement so exact ties cannot cycle.
ExactSolve solve_exact(const FlowMdp& mdp, long double nu) {
    const int n_states = mdp.state_count();
    PolicySet policy(n_states);
    std::vector<long double> value = evaluate_charged(mdp, policy, nu);

    const int max_rounds = 4 * n_states + 64;
    for (int round = 0; round < max_rounds; ++round) {
        bool changed = false;
        for (int n = 1; n <= n_states; ++n) {
            const QPair q = action_values(mdp, value, n, nu);
            const long double margin =
                1e-15L * (1.0L + std::abs(q.admit) + std::abs(q.reject));
            if (!policy.contains(n) && q.admit > q.reject + margin) {
                policy.insert(n);
                changed = true;
            } else if (policy.contains(n) && q.reject > q.admit + margin) {
                policy.erase(n);
                changed = true;
            }
        }
        if (!changed) break;
        value = evaluate_charged(mdp, policy, nu);
    }

    // Greedy action from the converged values, ties admit.
    PolicySet admit(n_states);
    for (int n = 1; n <= n_states; ++n) {
        const QPair q = action_values(mdp, value, n, nu);
        if (q.admit >= q.reject) admit.insert(n);
    }
    return {std::move(value), std::move(admit)};
}

}  // namespace

ValueSolution solve_value_iteration(const NuProblem& problem, double tol) {
    if (!(tol > 0)) throw std::invalid_argument("tol must be positive");
    const FlowMdp& mdp = problem.mdp;
    const int n_states = mdp.state_count();
    const long double beta = mdp.params.beta;
    const long double nu = problem.transmission_cost;

    ExactSolve exact = solve_exact(mdp, nu);
    std::vector<long double> value = std::move(exact.value);

    // Polish with Bellman sweeps until the spec'd stopping threshold or the
    // floating-point floor, whichever comes first.
    const long double threshold = tol * (1.0L - beta) / (2.0L * beta);
    long double prev_delta = std::numeric_limits<long double>::infinity();
    int sweeps = 0;
    for (; sweeps < 64; ++sweeps) {
        long double delta = 0;
        std::vector<long double> updated(value.size());
        for (int n = 1; n <= n_states; ++n) {
            const QPair q = action_values(mdp, value, n, nu);
            updated[n] = std::max(q.admit, q.reject);
            delta = std::max(delta, std::abs(updated[n] - value[n]));
        }
        updated[0] = value[0];
        value = std::move(updated);
        if (delta < threshold || delta >= prev_delta) break;
        prev_delta = delta;
    }

    ValueSolution out;
    out.value.resize(n_states);
    for (int n = 1; n <= n_states; ++n) out.value[n - 1] = static_cast<double>(value[n]);
    out.optimal_admit = PolicySet(n_states);
    for (int n = 1; n <= n_states; ++n) {
        const QPair q = action_values(mdp, value, n, nu);
        if (q.admit >= q.reject) out.optimal_admit.insert(n);
    }
    out.sweeps = sweeps;
    return out;
}

double policy_objective(const FlowMdp& mdp, const PolicySet& admit_set, int start, double nu) {
    const std::vector<long double> value = evaluate_charged(mdp, admit_set, nu);
    return static_cast<double>(value[start]);
}

PolicySet enumerate_optimal_policy(const NuProblem& problem, int start) {
    const int n_states = problem.mdp.state_count();
    if (n_states > 14)
        throw std::length_error("enumerate_optimal_policy: 2^N search needs N <= 14, got N = " +
                                std::to_string(n_states));
    if (start < 1 || start > n_states) throw std::invalid_argument("start state out of range");

    long double best = -std::numeric_limits<long double>::infinity();
    std::uint64_t best_mask = 0;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n_states); ++mask) {
        const PolicySet admit = PolicySet::from_mask(n_states, mask);
        const std::vector<long double> value =
            evaluate_charged(problem.mdp, admit, problem.transmission_cost);
        if (value[start] > best) {
            best = value[start];
            best_mask = mask;
        }
    }
    return PolicySet::from_mask(n_states, best_mask);
}

double index_by_bisection(const FlowMdp& mdp, int state, double tol) {
    const int n_states = mdp.state_count();
    if (state < 1 || state > n_states) throw std::invalid_argument("state out of range");
    if (!(tol > 0)) throw std::invalid_argument("tol must be positive");

    const double hi_bound = mdp.reward1[n_states - 1] + 1.0;

    // Indexability evidence: the optimal action at `state` must flip exactly
    // once over a nu sweep.
    constexpr int scan_points = 129;
    bool admitting = true;
    int flips = 0;
    for (int k = 0; k < scan_points; ++k) {
        const double nu = hi_bound * k / (scan_points - 1);
        const bool admit = solve_exact(mdp, nu).admit.contains(state);
        if (k == 0) {
            admitting = admit;
        } else if (admit != admitting) {
            ++flips;
            admitting = admit;
        }
    }
    if (flips > 1)
        throw std::runtime_error("index_by_bisection: action at state " + std::to_string(state) +
                                 " flips more than once over the nu scan");

    double lo = 0.0, hi = hi_bound;
    for (int it = 0; it < 200 && hi - lo > tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (solve_exact(mdp, mid).admit.contains(state))
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace tcpindex
