#ifndef TCPINDEX_SLOTTED_HPP
#define TCPINDEX_SLOTTED_HPP

#include <functional>
#include <iosfwd>
#include <vector>

#include "tcpindex/flow_model.hpp"
#include "tcpindex/index_engine.hpp"

namespace tcpindex {

// K AIMD flows sharing one RTT-slotted buffer of B packets.
struct MultiFlowSystem {
    struct Flow {
        FlowMdp mdp;
        std::vector<double> indices;  // per-state transmission index
    };
    std::vector<Flow> flows;
    std::vector<int> windows;        // current congestion windows X_k
    int buffer_capacity = 0;         // B, the per-slot admitted-work bound
    double target_throughput = 0.0;  // bandwidth-delay product, diagnostics only

    void validate() const;  // throws std::invalid_argument

    static MultiFlowSystem make(const std::vector<FlowParams>& flows, int buffer_capacity,
                                double target_throughput);
};

struct SlotResult {
    std::vector<int> actions;  // 0/1 per flow
    double reward = 0.0;       // aggregate alpha-fair reward earned this slot
    int work = 0;              // total admitted packets
};

// One slot of the index heuristic: admit flows in decreasing current-index
// order (ties to the lower flow id), greedily skipping flows that no longer
// fit, then advance every flow's window. Never exceeds buffer_capacity.
SlotResult heuristic_step(MultiFlowSystem& sys);

enum class SlottedPolicy { Heuristic, AlwaysAdmit, AlwaysReject };

// Per-slot decision rule; returns the action vector for the current windows.
using SlotPolicyFn = std::function<std::vector<int>(const MultiFlowSystem&)>;

struct RunTotals {
    double total_reward = 0.0;
    double total_work = 0.0;
};

// Discounted totals along the deterministic trajectory over `horizon` slots.
// Requires beta^horizon < 1e-8 so the truncation is negligible. AlwaysAdmit
// ignores the buffer bound (it is the overload diagnostic of the model);
// the heuristic never does. Passing trace_csv emits one row per slot:
// t, X_1..X_K, a_1..a_K, slot_reward, slot_work.
RunTotals evaluate_discounted_run(MultiFlowSystem sys, SlottedPolicy policy, int horizon,
                                  double beta, std::ostream* trace_csv = nullptr);
RunTotals evaluate_discounted_run(MultiFlowSystem sys, const SlotPolicyFn& policy, int horizon,
                                  double beta, std::ostream* trace_csv = nullptr);

// True iff always-admit discounted work exceeds target_throughput/(1-beta),
// i.e. the instance satisfies the model's overload precondition.
bool is_overloaded(const MultiFlowSystem& sys, double beta, int horizon);

// Exact optimum of the joint problem by value iteration over the product
// state space, with per-slot actions restricted to admitted work <= B.
// Throws std::length_error when the product space exceeds 1e5 states.
double joint_optimal_small(const MultiFlowSystem& sys, double beta);

}  // namespace tcpindex

#endif
