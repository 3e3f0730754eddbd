#include "tcpindex/slotted.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

namespace tcpindex {

void MultiFlowSystem::validate() const {
    if (flows.empty()) throw std::invalid_argument("system needs at least one flow");
    if (windows.size() != flows.size())
        throw std::invalid_argument("windows/flows size mismatch");
    for (std::size_t k = 0; k < flows.size(); ++k) {
        const int n_states = flows[k].mdp.state_count();
        if (static_cast<int>(flows[k].indices.size()) != n_states)
            throw std::invalid_argument("flow " + std::to_string(k + 1) + ": index table size");
        if (windows[k] < 1 || windows[k] > n_states)
            throw std::invalid_argument("flow " + std::to_string(k + 1) + ": window out of range");
    }
    if (buffer_capacity < 1) throw std::invalid_argument("buffer_capacity must be >= 1");
    if (!(target_throughput > 0.0) || target_throughput > buffer_capacity)
        throw std::invalid_argument("target_throughput must be in (0, buffer_capacity]");
}

MultiFlowSystem MultiFlowSystem::make(const std::vector<FlowParams>& params, int buffer_capacity,
                                      double target_throughput) {
    MultiFlowSystem sys;
    for (const FlowParams& p : params) {
        MultiFlowSystem::Flow flow;
        flow.mdp = build_mdp(p);
        flow.indices = index_lookup_table(p);
        sys.flows.push_back(std::move(flow));
        sys.windows.push_back(p.initial_window);
    }
    sys.buffer_capacity = buffer_capacity;
    sys.target_throughput = target_throughput;
    sys.validate();
    return sys;
}

namespace {

std::vector<int> heuristic_actions(const MultiFlowSystem& sys) {
    const int n_flows = static_cast<int>(sys.flows.size());
    std::vector<int> order(n_flows);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double ia = sys.flows[a].indices[sys.windows[a] - 1];
        const double ib = sys.flows[b].indices[sys.windows[b] - 1];
        if (ia != ib) return ia > ib;
        return a < b;
    });
    std::vector<int> actions(n_flows, 0);
    int admitted_work = 0;
    for (int k : order) {
        if (admitted_work + sys.windows[k] <= sys.buffer_capacity) {
            actions[k] = 1;
            admitted_work += sys.windows[k];
        }
    }
    return actions;
}

struct SlotTotals {
    double reward = 0.0;
    int work = 0;
};

SlotTotals apply_actions(MultiFlowSystem& sys, const std::vector<int>& actions) {
    SlotTotals totals;
    for (std::size_t k = 0; k < sys.flows.size(); ++k) {
        const int window = sys.windows[k];
        const int action = actions[k];
        totals.reward += sys.flows[k].mdp.reward(action, window);
        if (action) totals.work += window;
        sys.windows[k] = sys.flows[k].mdp.successor(action, window);
    }
    return totals;
}

}  // namespace

SlotResult heuristic_step(MultiFlowSystem& sys) {
    sys.validate();
    SlotResult result;
    result.actions = heuristic_actions(sys);
    const SlotTotals totals = apply_actions(sys, result.actions);
    result.reward = totals.reward;
    result.work = totals.work;
    return result;
}

RunTotals evaluate_discounted_run(MultiFlowSystem sys, const SlotPolicyFn& policy, int horizon,
                                  double beta, std::ostream* trace_csv) {
    sys.validate();
    if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta must be in (0, 1)");
    if (std::pow(beta, horizon) >= 1e-8)
        throw std::invalid_argument("horizon too short: beta^T must be < 1e-8");

    if (trace_csv) {
        *trace_csv << "t";
        for (std::size_t k = 1; k <= sys.flows.size(); ++k) *trace_csv << ",X_" << k;
        for (std::size_t k = 1; k <= sys.flows.size(); ++k) *trace_csv << ",a_" << k;
        *trace_csv << ",slot_reward,slot_work\n";
    }

    RunTotals totals;
    double disc = 1.0;
    for (int t = 0; t < horizon; ++t) {
        const std::vector<int> actions = policy(sys);
        if (actions.size() != sys.flows.size())
            throw std::invalid_argument("policy returned wrong action count");
        const std::vector<int> windows_before = sys.windows;
        const SlotTotals slot = apply_actions(sys, actions);
        totals.total_reward += disc * slot.reward;
        totals.total_work += disc * slot.work;
        disc *= beta;
        if (trace_csv) {
            *trace_csv << t;
            for (int x : windows_before) *trace_csv << ',' << x;
            for (int a : actions) *trace_csv << ',' << a;
            *trace_csv << ',' << slot.reward << ',' << slot.work << '\n';
        }
    }
    return totals;
}

RunTotals evaluate_discounted_run(MultiFlowSystem sys, SlottedPolicy policy, int horizon,
                                  double beta, std::ostream* trace_csv) {
    SlotPolicyFn fn;
    switch (policy) {
        case SlottedPolicy::Heuristic:
            fn = [](const MultiFlowSystem& s) { return heuristic_actions(s); };
            break;
        case SlottedPolicy::AlwaysAdmit:
            fn = [](const MultiFlowSystem& s) { return std::vector<int>(s.flows.size(), 1); };
            break;
        case SlottedPolicy::AlwaysReject:
            fn = [](const MultiFlowSystem& s) { return std::vector<int>(s.flows.size(), 0); };
            break;
    }
    return evaluate_discounted_run(std::move(sys), fn, horizon, beta, trace_csv);
}

bool is_overloaded(const MultiFlowSystem& sys, double beta, int horizon) {
    const RunTotals totals = evaluate_discounted_run(sys, SlottedPolicy::AlwaysAdmit, horizon, beta);
    return totals.total_work > sys.target_throughput / (1.0 - beta);
}

double joint_optimal_small(const MultiFlowSystem& sys, double beta) {
    sys.validate();
    if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta must be in (0, 1)");
    const int n_flows = static_cast<int>(sys.flows.size());

    long long product = 1;
    for (const auto& flow : sys.flows) {
        product *= flow.mdp.state_count();
        if (product > 100000)
            throw std::length_error("joint_optimal_small: product state space exceeds 1e5");
    }
    const int n_joint = static_cast<int>(product);

    std::vector<int> stride(n_flows);
    int acc = 1;
    for (int k = 0; k < n_flows; ++k) {
        stride[k] = acc;
        acc *= sys.flows[k].mdp.state_count();
    }
    auto decode = [&](int idx, int k) {
        return (idx / stride[k]) % sys.flows[k].mdp.state_count() + 1;
    };

    const int n_masks = 1 << n_flows;
    std::vector<double> value(n_joint, 0.0), updated(n_joint);
    const double threshold = 1e-10 * (1.0 - beta);
    const int max_iters = 2000000;
    for (int it = 0; it < max_iters; ++it) {
        double delta = 0.0;
        for (int idx = 0; idx < n_joint; ++idx) {
            double best = -std::numeric_limits<double>::infinity();
            for (int mask = 0; mask < n_masks; ++mask) {
                int work = 0, next_idx = 0;
                double reward = 0.0;
                for (int k = 0; k < n_flows; ++k) {
                    const int window = decode(idx, k);
                    const int action = (mask >> k) & 1;
                    if (action) work += window;
                    reward += sys.flows[k].mdp.reward(action, window);
                    next_idx += (sys.flows[k].mdp.successor(action, window) - 1) * stride[k];
                }
                if (work > sys.buffer_capacity) continue;
                best = std::max(best, reward + beta * value[next_idx]);
            }
            updated[idx] = best;
            delta = std::max(delta, std::abs(best - value[idx]));
        }
        value.swap(updated);
        if (delta < threshold) break;
    }

    int start_idx = 0;
    for (int k = 0; k < n_flows; ++k) start_idx += (sys.windows[k] - 1) * stride[k];
    return value[start_idx];
}

}  // namespace tcpindex
