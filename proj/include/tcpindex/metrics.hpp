#ifndef TCPINDEX_METRICS_HPP
#define TCPINDEX_METRICS_HPP

#include <span>
#include <vector>

namespace tcpindex {

struct LinkSpec {
    double bandwidth_bps = 0.0;
    double propagation_delay_s = 0.0;

    void validate() const;  // both strictly positive
};

// Evaluation quantities over one measurement window.
struct MetricsReport {
    double utilization = 0.0;       // fraction of bottleneck capacity delivered
    double jain_fairness = 0.0;     // (sum x)^2 / (K sum x^2)
    double mean_queue_size = 0.0;   // time-weighted packets
    std::vector<double> per_flow_rtt_s;        // mean send->ACK interval per flow
    std::vector<double> per_flow_goodput_pps;  // delivered packets per second per flow
};

// Jain's fairness index; 1 is perfect fairness, 1/K one user taking all.
// Throws std::domain_error when every throughput is zero.
double jain_index(std::span<const double> throughputs);

double utilization(long long delivered_packets, double window_s, const LinkSpec& bottleneck,
                   int packet_bytes);

// Right-continuous step function of queue length: value[i] holds from
// time_s[i] until time_s[i+1].
struct StepTrace {
    std::vector<double> time_s;
    std::vector<int> value;
};

// Time-weighted mean of the step trace over [window_start_s, window_end_s].
// Throws std::invalid_argument on an empty trace or empty window.
double mean_queue_size(const StepTrace& trace, double window_start_s, double window_end_s);

// Arithmetic mean; throws std::invalid_argument on an empty sample set.
double mean_rtt(std::span<const double> rtt_samples_s);

}  // namespace tcpindex

#endif
