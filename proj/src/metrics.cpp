#include "tcpindex/metrics.hpp"

#include <algorithm>
#include <stdexcept>

namespace tcpindex {

void LinkSpec::validate() const {
    if (!(bandwidth_bps > 0.0)) throw std::invalid_argument("link bandwidth must be positive");
    if (!(propagation_delay_s > 0.0)) throw std::invalid_argument("link delay must be positive");
}

double jain_index(std::span<const double> throughputs) {
    if (throughputs.empty()) throw std::domain_error("jain_index: no flows");
    double sum = 0.0, sum_sq = 0.0;
    for (double x : throughputs) {
        sum += x;
        sum_sq += x * x;
    }
    if (sum_sq == 0.0) throw std::domain_error("jain_index: all throughputs are zero");
    return sum * sum / (static_cast<double>(throughputs.size()) * sum_sq);
}

double utilization(long long delivered_packets, double window_s, const LinkSpec& bottleneck,
                   int packet_bytes) {
    bottleneck.validate();
    if (!(window_s > 0.0)) throw std::invalid_argument("utilization: window must be positive");
    const double bits = static_cast<double>(delivered_packets) * packet_bytes * 8.0;
    return std::clamp(bits / (bottleneck.bandwidth_bps * window_s), 0.0, 1.0);
}

double mean_queue_size(const StepTrace& trace, double window_start_s, double window_end_s) {
    if (trace.time_s.empty() || trace.time_s.size() != trace.value.size())
        throw std::invalid_argument("mean_queue_size: empty or inconsistent trace");
    if (!(window_end_s > window_start_s))
        throw std::invalid_argument("mean_queue_size: empty window");

    double area = 0.0;
    for (std::size_t i = 0; i < trace.time_s.size(); ++i) {
        const double seg_start = std::max(trace.time_s[i], window_start_s);
        const double seg_end = std::min(
            i + 1 < trace.time_s.size() ? trace.time_s[i + 1] : window_end_s, window_end_s);
        if (seg_end > seg_start) area += trace.value[i] * (seg_end - seg_start);
    }
    return area / (window_end_s - window_start_s);
}

double mean_rtt(std::span<const double> rtt_samples_s) {
    if (rtt_samples_s.empty()) throw std::invalid_argument("mean_rtt: no samples");
    double sum = 0.0;
    for (double s : rtt_samples_s) sum += s;
    return sum / static_cast<double>(rtt_samples_s.size());
}

}  // namespace tcpindex
