#ifndef TCPINDEX_PACKET_SIM_HPP
#define TCPINDEX_PACKET_SIM_HPP

#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tcpindex/flow_model.hpp"
#include "tcpindex/metrics.hpp"

namespace tcpindex {

// Simulation clock: integer picoseconds, so event ordering is exact.
using TimePs = std::uint64_t;

TimePs time_from_seconds(double s);
double time_to_seconds(TimePs t);

struct Packet {
    int flow_id = 0;               // 1-based
    long long sequence_number = 0;
    int size_bytes = 576;
    double index_value = 0.0;      // transmission index stamped at send time
    TimePs enqueue_time = 0;       // set when the router accepts the packet
    TimePs send_time = 0;          // echoed back in the ACK for RTT sampling
    bool retransmit = false;
};

enum class QueuePolicy { DropTail, Red, Index };
std::string_view to_string(QueuePolicy policy);
std::optional<QueuePolicy> policy_from_string(std::string_view name);

struct RedParams {
    int min_threshold = 0;   // packets; 0 means "derive defaults from the buffer"
    int max_threshold = 0;
    double queue_weight = 0.002;
    double max_drop_probability = 0.1;

    void validate(int buffer_packets) const;
    static RedParams defaults_for(int buffer_packets);
};

struct RouterSpec {
    int buffer_packets = 1;
    QueuePolicy policy = QueuePolicy::DropTail;
    RedParams red;           // consulted only when policy == Red
    LinkSpec egress;

    void validate() const;
};

// RED averaging state, exposed so the drop law is testable in isolation.
struct RedState {
    double average = 0.0;
    int count_since_drop = -1;
    TimePs idle_since = 0;
    bool idle = true;
};

// max_p * (avg - min_th)/(max_th - min_th), clamped to [0, 1].
double red_base_drop_probability(const RedParams& params, double average);
// Floyd's count rule: p_b / (1 - count * p_b), clamped to [0, 1].
double red_scaled_drop_probability(double base_probability, int count_since_drop);

// The bottleneck buffer with the three drop disciplines. offer() returns the
// dropped packet if the arrival caused one (either the arrival itself or an
// evicted queued packet, under the Index policy).
class RouterQueue {
  public:
    RouterQueue(const RouterSpec& spec, std::uint64_t seed, TimePs mean_service_time);

    std::optional<Packet> offer(Packet pkt, TimePs now);
    Packet pop(TimePs now);  // caller guarantees non-empty
    int size() const { return static_cast<int>(queue_.size()); }
    bool empty() const { return queue_.empty(); }
    const RedState& red_state() const { return red_state_; }

  private:
    std::optional<Packet> droptail_on_arrival(Packet pkt, TimePs now);
    std::optional<Packet> red_on_arrival(Packet pkt, TimePs now);
    std::optional<Packet> index_on_arrival(Packet pkt, TimePs now);
    void enqueue(Packet pkt, TimePs now);

    RouterSpec spec_;
    RedParams red_;
    TimePs mean_service_time_;
    std::deque<Packet> queue_;
    RedState red_state_;
    std::mt19937_64 rng_;
};

struct ScenarioFlowSpec {
    FlowParams params;
    LinkSpec access;
};

struct ScenarioSpec {
    std::string name = "scenario";
    std::vector<ScenarioFlowSpec> flows;
    RouterSpec router;
    double sim_duration_s = 25.0;
    double warmup_s = 5.0;
    double measure_s = 20.0;
    std::uint64_t seed = 1;
    int packet_bytes = 576;

    void validate() const;
};

struct FlowCounters {
    long long sent = 0;          // copies emitted, retransmits included
    long long delivered = 0;     // copies that reached the sink
    long long dropped = 0;       // copies dropped at the router
    long long in_network = 0;    // copies still in flight when the run ended
    long long retransmits = 0;
    long long probe_retransmits = 0;   // stall-revival probes (liveness flag)
    long long distinct_delivered = 0;  // unique sequence numbers at the sink
};

struct TraceBundle {
    double sample_interval_s = 0.01;
    std::vector<double> sample_time_s;
    std::vector<std::vector<double>> cwnd;           // [flow][sample]
    std::vector<std::vector<double>> stamped_index;  // [flow][sample]
    std::vector<int> queue_length;                   // [sample]
    StepTrace queue_trace;                           // full-resolution queue length
    std::vector<FlowCounters> counters;              // [flow]
    int max_queue_seen = 0;

    // cwnd series restricted to the measurement window, for sync diagnostics
    std::vector<double> measurement_cwnd(int flow, const ScenarioSpec& spec) const;
};

struct SimulationResult {
    MetricsReport metrics;
    TraceBundle trace;
};

SimulationResult run_scenario(const ScenarioSpec& spec);

// Pearson correlation; NaN if either series is constant.
double pearson_correlation(std::span<const double> a, std::span<const double> b);

}  // namespace tcpindex

#endif
