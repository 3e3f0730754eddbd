#ifndef TCPINDEX_FLOW_MODEL_HPP
#define TCPINDEX_FLOW_MODEL_HPP

#include <vector>

namespace tcpindex {

// Parameters of one AIMD flow: the MDP is defined entirely by these.
struct FlowParams {
    int max_window = 1;       // N, largest advertised congestion window (packets)
    double gamma = 0.5;       // multiplicative decrease factor, 0 <= gamma < 1
    double alpha = 1.0;       // fairness parameter of the alpha-fair utility, >= 0
    double beta = 0.9999;     // one-period discount factor, 0 < beta < 1
    int initial_window = 1;   // starting congestion window, in [1, max_window]

    void validate() const;    // throws std::invalid_argument on any bad field
    bool operator==(const FlowParams&) const = default;
};

// Generalized alpha-fair utility of transmitting at window n:
// ((1+n)^(1-alpha) - 1)/(1-alpha), with the log(1+n) branch at alpha = 1.
double alpha_fair_reward(int window, double alpha);

// max(floor(gamma * n), 1). A 1e-9 guard keeps products like (2/3)*3 from
// rounding below the exact integer.
int multiplicative_decrease(double gamma, int window);

// Per-ACK congestion avoidance update on a fractional window:
// min(cwnd + 1/floor(cwnd), N).
double cwnd_ack_update(double cwnd, int max_window);

// Window cut on a loss event: max(floor(gamma * cwnd), 1).
double cwnd_loss_update(double cwnd, double gamma);

// Materialized single-flow MDP. States are congestion windows 1..N;
// action 1 admits the flow's packets for the slot, action 0 rejects.
// Vectors are stored 0-based (state n lives at [n-1]); the accessors and
// successor maps speak 1-based states.
struct FlowMdp {
    FlowParams params;
    std::vector<double> work0, work1;      // W^0 = 0, W^1_n = n
    std::vector<double> reward0, reward1;  // R^0 = 0, R^1_n alpha-fair
    std::vector<int> succ0, succ1;         // reject / admit successor states

    int state_count() const { return params.max_window; }
    double work(int action, int state) const {
        return action ? work1[state - 1] : work0[state - 1];
    }
    double reward(int action, int state) const {
        return action ? reward1[state - 1] : reward0[state - 1];
    }
    int successor(int action, int state) const {
        return action ? succ1[state - 1] : succ0[state - 1];
    }
};

FlowMdp build_mdp(const FlowParams& params);

}  // namespace tcpindex

#endif
