#include "tcpindex/flow_model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace tcpindex {

namespace {
constexpr double kFloorGuard = 1e-9;
}

void FlowParams::validate() const {
    if (max_window < 1)
        throw std::invalid_argument("max_window must be >= 1, got " + std::to_string(max_window));
    if (!(gamma >= 0.0 && gamma < 1.0))
        throw std::invalid_argument("gamma must be in [0, 1), got " + std::to_string(gamma));
    if (!(alpha >= 0.0))
        throw std::invalid_argument("alpha must be >= 0, got " + std::to_string(alpha));
    if (!(beta > 0.0 && beta < 1.0))
        throw std::invalid_argument("beta must be in (0, 1), got " + std::to_string(beta));
    if (initial_window < 1 || initial_window > max_window)
        throw std::invalid_argument("initial_window must be in [1, max_window], got " +
                                    std::to_string(initial_window));
}

double alpha_fair_reward(int window, double alpha) {
    if (alpha == 1.0) return std::log1p(static_cast<double>(window));
    return (std::pow(1.0 + window, 1.0 - alpha) - 1.0) / (1.0 - alpha);
}

int multiplicative_decrease(double gamma, int window) {
    int cut = static_cast<int>(std::floor(gamma * window + kFloorGuard));
    return cut < 1 ? 1 : cut;
}

double cwnd_ack_update(double cwnd, int max_window) {
    double next = cwnd + 1.0 / std::floor(cwnd);
    return next > max_window ? static_cast<double>(max_window) : next;
}

double cwnd_loss_update(double cwnd, double gamma) {
    double cut = std::floor(gamma * cwnd + kFloorGuard);
    return cut < 1.0 ? 1.0 : cut;
}

FlowMdp build_mdp(const FlowParams& params) {
    params.validate();
    const int n_states = params.max_window;

    FlowMdp mdp;
    mdp.params = params;
    mdp.work0.assign(n_states, 0.0);
    mdp.reward0.assign(n_states, 0.0);
    mdp.work1.resize(n_states);
    mdp.reward1.resize(n_states);
    mdp.succ0.resize(n_states);
    mdp.succ1.resize(n_states);

    for (int n = 1; n <= n_states; ++n) {
        mdp.work1[n - 1] = static_cast<double>(n);
        mdp.reward1[n - 1] = alpha_fair_reward(n, params.alpha);
        mdp.succ1[n - 1] = n < n_states ? n + 1 : n_states;
        mdp.succ0[n - 1] = multiplicative_decrease(params.gamma, n);
    }
    return mdp;
}

}  // namespace tcpindex
