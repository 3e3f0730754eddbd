#ifndef TCPINDEX_MDP_ORACLE_HPP
#define TCPINDEX_MDP_ORACLE_HPP

#include <vector>

#include "tcpindex/flow_model.hpp"
#include "tcpindex/index_engine.hpp"

namespace tcpindex {

// Single-flow problem charged with a per-packet transmission cost nu:
// maximize expected discounted sum of (reward - nu * work).
struct NuProblem {
    FlowMdp mdp;
    double transmission_cost = 0.0;
};

struct ValueSolution {
    std::vector<double> value;  // value[n-1] = optimal objective starting from state n
    PolicySet optimal_admit;    // states where admitting is maximal (ties admit)
    int sweeps = 0;             // Bellman sweeps performed in the polish phase
};

// Exact solve of the charged problem. Internally runs policy iteration with
// exact path-following evaluation, then Bellman sweeps until the spec'd
// sup-norm threshold tol*(1-beta)/(2*beta) or the floating-point floor.
ValueSolution solve_value_iteration(const NuProblem& problem, double tol = 1e-10);

// Discounted objective reward - nu * work of a fixed admission set.
double policy_objective(const FlowMdp& mdp, const PolicySet& admit_set, int start, double nu);

// Exhaustive argmax over all 2^N admission sets, from `start`. Throws
// std::length_error for N > 14.
PolicySet enumerate_optimal_policy(const NuProblem& problem, int start);

// Whittle index of `state` recovered straight from the definition: bisection
// on nu over [0, max reward + 1] for the point where the optimal action
// flips. Throws std::runtime_error if a pre-scan sees the action flip more
// than once (indexability violation evidence).
double index_by_bisection(const FlowMdp& mdp, int state, double tol = 1e-8);

}  // namespace tcpindex

#endif
