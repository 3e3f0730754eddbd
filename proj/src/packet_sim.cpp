#include "tcpindex/packet_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>
#include <stdexcept>

#include "tcpindex/index_engine.hpp"

namespace tcpindex {

TimePs time_from_seconds(double s) {
    return static_cast<TimePs>(std::llround(s * 1e12));
}

double time_to_seconds(TimePs t) {
    return static_cast<double>(t) * 1e-12;
}

std::string_view to_string(QueuePolicy policy) {
    switch (policy) {
        case QueuePolicy::DropTail: return "droptail";
        case QueuePolicy::Red: return "red";
        case QueuePolicy::Index: return "index";
    }
    return "?";
}

std::optional<QueuePolicy> policy_from_string(std::string_view name) {
    if (name == "droptail") return QueuePolicy::DropTail;
    if (name == "red") return QueuePolicy::Red;
    if (name == "index") return QueuePolicy::Index;
    return std::nullopt;
}

void RedParams::validate(int buffer_packets) const {
    if (!(min_threshold > 0 && min_threshold < max_threshold &&
          max_threshold <= buffer_packets))
        throw std::invalid_argument("RED thresholds need 0 < min_th < max_th <= buffer");
    if (!(queue_weight > 0.0 && queue_weight <= 1.0))
        throw std::invalid_argument("RED queue_weight must be in (0, 1]");
    if (!(max_drop_probability > 0.0 && max_drop_probability <= 1.0))
        throw std::invalid_argument("RED max_drop_probability must be in (0, 1]");
}

RedParams RedParams::defaults_for(int buffer_packets) {
    RedParams params;
    params.min_threshold = (buffer_packets + 3) / 4;       // ceil(B/4)
    params.max_threshold = (3 * buffer_packets + 3) / 4;   // ceil(3B/4)
    return params;
}

void RouterSpec::validate() const {
    if (buffer_packets < 1) throw std::invalid_argument("buffer must hold at least one packet");
    egress.validate();
    if (policy == QueuePolicy::Red) {
        RedParams resolved = red;
        if (resolved.min_threshold == 0 && resolved.max_threshold == 0)
            resolved = RedParams::defaults_for(buffer_packets);
        resolved.validate(buffer_packets);
    }
}

void ScenarioSpec::validate() const {
    if (flows.empty()) throw std::invalid_argument("scenario needs at least one flow");
    for (const auto& flow : flows) {
        flow.params.validate();
        flow.access.validate();
    }
    router.validate();
    if (!(sim_duration_s > 0.0)) throw std::invalid_argument("sim_duration must be positive");
    if (!(warmup_s >= 0.0 && measure_s > 0.0 && warmup_s + measure_s <= sim_duration_s))
        throw std::invalid_argument("need warmup + measure window <= sim_duration");
    if (packet_bytes < 1) throw std::invalid_argument("packet_bytes must be positive");
}

double red_base_drop_probability(const RedParams& params, double average) {
    if (average < params.min_threshold) return 0.0;
    if (average >= params.max_threshold) return 1.0;
    const double ramp = (average - params.min_threshold) /
                        (params.max_threshold - params.min_threshold);
    return std::clamp(params.max_drop_probability * ramp, 0.0, 1.0);
}

double red_scaled_drop_probability(double base_probability, int count_since_drop) {
    if (base_probability <= 0.0) return 0.0;
    const double denom = 1.0 - count_since_drop * base_probability;
    if (denom <= base_probability) return 1.0;
    return base_probability / denom;
}

RouterQueue::RouterQueue(const RouterSpec& spec, std::uint64_t seed, TimePs mean_service_time)
    : spec_(spec), red_(spec.red), mean_service_time_(mean_service_time), rng_(seed) {
    spec_.validate();
    if (spec_.policy == QueuePolicy::Red) {
        if (red_.min_threshold == 0 && red_.max_threshold == 0)
            red_ = RedParams::defaults_for(spec_.buffer_packets);
        red_.validate(spec_.buffer_packets);
    }
}

void RouterQueue::enqueue(Packet pkt, TimePs now) {
    pkt.enqueue_time = now;
    queue_.push_back(pkt);
    red_state_.idle = false;
}

std::optional<Packet> RouterQueue::offer(Packet pkt, TimePs now) {
    switch (spec_.policy) {
        case QueuePolicy::DropTail: return droptail_on_arrival(std::move(pkt), now);
        case QueuePolicy::Red: return red_on_arrival(std::move(pkt), now);
        case QueuePolicy::Index: return index_on_arrival(std::move(pkt), now);
    }
    return std::nullopt;
}

std::optional<Packet> RouterQueue::droptail_on_arrival(Packet pkt, TimePs now) {
    if (size() < spec_.buffer_packets) {
        enqueue(std::move(pkt), now);
        return std::nullopt;
    }
    return pkt;
}

std::optional<Packet> RouterQueue::red_on_arrival(Packet pkt, TimePs now) {
    if (!queue_.empty()) {
        red_state_.average = (1.0 - red_.queue_weight) * red_state_.average +
                             red_.queue_weight * static_cast<double>(size());
    } else if (red_state_.idle) {
        const double idle_packets = static_cast<double>(now - red_state_.idle_since) /
                                    static_cast<double>(mean_service_time_);
        red_state_.average *= std::pow(1.0 - red_.queue_weight, idle_packets);
    }

    if (size() >= spec_.buffer_packets || red_state_.average >= red_.max_threshold) {
        red_state_.count_since_drop = 0;
        return pkt;
    }
    if (red_state_.average >= red_.min_threshold) {
        ++red_state_.count_since_drop;
        const double base = red_base_drop_probability(red_, red_state_.average);
        const double prob = red_scaled_drop_probability(base, red_state_.count_since_drop);
        if (std::uniform_real_distribution<double>{0.0, 1.0}(rng_) < prob) {
            red_state_.count_since_drop = 0;
            return pkt;
        }
        enqueue(std::move(pkt), now);
        return std::nullopt;
    }
    red_state_.count_since_drop = -1;
    enqueue(std::move(pkt), now);
    return std::nullopt;
}

std::optional<Packet> RouterQueue::index_on_arrival(Packet pkt, TimePs now) {
    if (size() < spec_.buffer_packets) {
        enqueue(std::move(pkt), now);
        return std::nullopt;
    }
    // Buffer full: the victim is the smallest index among queued packets and
    // the arrival; ties go to the packet longest in the queue (head first),
    // so the arrival loses a tie against any queued packet.
    auto victim = queue_.begin();
    for (auto it = std::next(queue_.begin()); it != queue_.end(); ++it)
        if (it->index_value < victim->index_value) victim = it;
    if (pkt.index_value < victim->index_value) return pkt;
    Packet evicted = *victim;
    queue_.erase(victim);
    enqueue(std::move(pkt), now);
    return evicted;
}

Packet RouterQueue::pop(TimePs now) {
    Packet pkt = queue_.front();
    queue_.pop_front();
    if (queue_.empty()) {
        red_state_.idle = true;
        red_state_.idle_since = now;
    }
    return pkt;
}

std::vector<double> TraceBundle::measurement_cwnd(int flow, const ScenarioSpec& spec) const {
    std::vector<double> out;
    for (std::size_t i = 0; i < sample_time_s.size(); ++i) {
        const double t = sample_time_s[i];
        if (t >= spec.warmup_s && t < spec.warmup_s + spec.measure_s)
            out.push_back(cwnd[flow - 1][i]);
    }
    return out;
}

double pearson_correlation(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty())
        throw std::invalid_argument("pearson_correlation: mismatched series");
    const double n = static_cast<double>(a.size());
    double mean_a = 0, mean_b = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        mean_a += a[i];
        mean_b += b[i];
    }
    mean_a /= n;
    mean_b /= n;
    double cov = 0, var_a = 0, var_b = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - mean_a, db = b[i] - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if (var_a == 0.0 || var_b == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return cov / std::sqrt(var_a * var_b);
}

namespace {

struct Event {
    enum Kind { RouterArrival, ServiceComplete, SinkArrival, AckArrival, ProbeTimer, Sample };
    TimePs t = 0;
    std::uint64_t order = 0;
    Kind kind = Sample;
    Packet pkt;
    int flow = 0;                  // AckArrival / ProbeTimer
    long long ack_seq = 0;         // AckArrival: receiver's next expected seq
    TimePs echo_send_time = 0;     // AckArrival: send timestamp of the ACKed copy
    std::uint64_t generation = 0;  // ProbeTimer
};

struct EventAfter {
    bool operator()(const Event& a, const Event& b) const {
        if (a.t != b.t) return a.t > b.t;
        return a.order > b.order;
    }
};

struct Source {
    FlowParams params;
    const std::vector<double>* index_values = nullptr;
    double cwnd = 1.0;
    long long snd_nxt = 0;
    long long snd_una = 0;
    int dup_acks = 0;
    TimePs access_free = 0;
    TimePs access_serialization = 0;
    TimePs access_prop = 0;
    bool decreased_once = false;
    TimePs last_decrease = 0;
    bool srtt_valid = false;
    double srtt_s = 0.0;
    std::uint64_t probe_generation = 0;

    long long in_flight() const { return snd_nxt - snd_una; }
    int int_window() const { return static_cast<int>(std::floor(cwnd)); }
};

struct Receiver {
    long long next_expected = 0;
    std::set<long long> out_of_order;
};

class Simulator {
  public:
    explicit Simulator(const ScenarioSpec& spec)
        : spec_(spec),
          end_(time_from_seconds(spec.sim_duration_s)),
          window_start_(time_from_seconds(spec.warmup_s)),
          window_end_(time_from_seconds(spec.warmup_s + spec.measure_s)),
          bottleneck_serialization_(packet_time(spec.router.egress, spec.packet_bytes)),
          bottleneck_prop_(time_from_seconds(spec.router.egress.propagation_delay_s)),
          router_(spec.router, spec.seed, bottleneck_serialization_) {
        const int n_flows = static_cast<int>(spec.flows.size());
        sources_.resize(n_flows);
        receivers_.resize(n_flows);
        window_delivered_.assign(n_flows, 0);
        rtt_samples_.resize(n_flows);
        trace_.counters.assign(n_flows, FlowCounters{});
        trace_.cwnd.assign(n_flows, {});
        trace_.stamped_index.assign(n_flows, {});
        for (int k = 0; k < n_flows; ++k) {
            Source& src = sources_[k];
            src.params = spec.flows[k].params;
            src.index_values = &cached_index_table(src.params).values;
            src.cwnd = src.params.initial_window;
            src.access_serialization = packet_time(spec.flows[k].access, spec.packet_bytes);
            src.access_prop = time_from_seconds(spec.flows[k].access.propagation_delay_s);
        }
        record_queue(0);
    }

    SimulationResult run() {
        for (std::size_t k = 0; k < sources_.size(); ++k) {
            try_send(static_cast<int>(k) + 1, 0);
            schedule_probe(static_cast<int>(k) + 1, 0);
        }
        push_sample(0);

        while (!events_.empty()) {
            const Event evt = events_.top();
            if (evt.t > end_) break;
            events_.pop();
            dispatch(evt);
        }
        return finish();
    }

  private:
    static TimePs packet_time(const LinkSpec& link, int packet_bytes) {
        return time_from_seconds(packet_bytes * 8.0 / link.bandwidth_bps);
    }

    void push(Event evt) {
        evt.order = next_order_++;
        events_.push(evt);
    }

    void push_sample(TimePs t) {
        Event evt;
        evt.t = t;
        evt.kind = Event::Sample;
        push(evt);
    }

    void record_queue(TimePs t) {
        const double t_s = time_to_seconds(t);
        const int len = router_.size();
        auto& tr = trace_.queue_trace;
        if (!tr.time_s.empty() && tr.time_s.back() == t_s) {
            tr.value.back() = len;
        } else if (tr.value.empty() || tr.value.back() != len) {
            tr.time_s.push_back(t_s);
            tr.value.push_back(len);
        }
        trace_.max_queue_seen = std::max(trace_.max_queue_seen, len);
    }

    void emit(int flow, long long seq, bool is_retransmit, bool is_probe, TimePs now) {
        Source& src = sources_[flow - 1];
        Packet pkt;
        pkt.flow_id = flow;
        pkt.sequence_number = seq;
        pkt.size_bytes = spec_.packet_bytes;
        pkt.index_value = (*src.index_values)[src.int_window() - 1];
        pkt.send_time = now;
        pkt.retransmit = is_retransmit;

        const TimePs start = std::max(now, src.access_free);
        src.access_free = start + src.access_serialization;

        Event evt;
        evt.t = src.access_free + src.access_prop;
        evt.kind = Event::RouterArrival;
        evt.pkt = pkt;
        push(evt);

        FlowCounters& counters = trace_.counters[flow - 1];
        ++counters.sent;
        if (is_retransmit) ++counters.retransmits;
        if (is_probe) ++counters.probe_retransmits;
    }

    void try_send(int flow, TimePs now) {
        Source& src = sources_[flow - 1];
        while (src.in_flight() < src.int_window()) emit(flow, src.snd_nxt++, false, false, now);
    }

    void schedule_probe(int flow, TimePs now) {
        Source& src = sources_[flow - 1];
        ++src.probe_generation;
        const double interval_s = src.srtt_valid ? 2.0 * src.srtt_s : 0.1;
        Event evt;
        evt.t = now + time_from_seconds(interval_s);
        evt.kind = Event::ProbeTimer;
        evt.flow = flow;
        evt.generation = src.probe_generation;
        push(evt);
    }

    void start_service(TimePs now) {
        Event evt;
        evt.t = now + bottleneck_serialization_;
        evt.kind = Event::ServiceComplete;
        evt.pkt = router_.pop(now);
        push(evt);
        egress_busy_ = true;
    }

    void dispatch(const Event& evt) {
        switch (evt.kind) {
            case Event::RouterArrival: on_router_arrival(evt); break;
            case Event::ServiceComplete: on_service_complete(evt); break;
            case Event::SinkArrival: on_sink_arrival(evt); break;
            case Event::AckArrival: on_ack_arrival(evt); break;
            case Event::ProbeTimer: on_probe_timer(evt); break;
            case Event::Sample: on_sample(evt); break;
        }
    }

    void on_router_arrival(const Event& evt) {
        const std::optional<Packet> dropped = router_.offer(evt.pkt, evt.t);
        if (dropped) ++trace_.counters[dropped->flow_id - 1].dropped;
        if (!egress_busy_ && !router_.empty()) start_service(evt.t);
        record_queue(evt.t);
    }

    void on_service_complete(const Event& evt) {
        Event sink;
        sink.t = evt.t + bottleneck_prop_;
        sink.kind = Event::SinkArrival;
        sink.pkt = evt.pkt;
        push(sink);
        if (!router_.empty())
            start_service(evt.t);
        else
            egress_busy_ = false;
        record_queue(evt.t);
    }

    void on_sink_arrival(const Event& evt) {
        const int flow = evt.pkt.flow_id;
        Receiver& rcv = receivers_[flow - 1];
        FlowCounters& counters = trace_.counters[flow - 1];
        ++counters.delivered;

        const long long seq = evt.pkt.sequence_number;
        bool first_time = false;
        if (seq == rcv.next_expected) {
            ++rcv.next_expected;
            first_time = true;
            while (rcv.out_of_order.erase(rcv.next_expected)) ++rcv.next_expected;
        } else if (seq > rcv.next_expected) {
            first_time = rcv.out_of_order.insert(seq).second;
        }
        if (first_time) {
            ++counters.distinct_delivered;
            if (evt.t >= window_start_ && evt.t < window_end_) ++window_delivered_[flow - 1];
        }

        Event ack;
        ack.t = evt.t + bottleneck_prop_ + sources_[flow - 1].access_prop;
        ack.kind = Event::AckArrival;
        ack.flow = flow;
        ack.ack_seq = rcv.next_expected;
        ack.echo_send_time = evt.pkt.send_time;
        push(ack);
    }

    void on_ack_arrival(const Event& evt) {
        Source& src = sources_[evt.flow - 1];
        const double rtt_s = time_to_seconds(evt.t - evt.echo_send_time);
        if (src.srtt_valid)
            src.srtt_s = 0.875 * src.srtt_s + 0.125 * rtt_s;
        else {
            src.srtt_s = rtt_s;
            src.srtt_valid = true;
        }
        if (evt.t >= window_start_ && evt.t < window_end_)
            rtt_samples_[evt.flow - 1].push_back(rtt_s);

        if (evt.ack_seq > src.snd_una) {
            src.snd_una = evt.ack_seq;
            src.dup_acks = 0;
            src.cwnd = cwnd_ack_update(src.cwnd, src.params.max_window);
            try_send(evt.flow, evt.t);
        } else if (evt.ack_seq == src.snd_una && src.in_flight() > 0) {
            ++src.dup_acks;
            if (src.dup_acks == 3) {
                // fast retransmit; the window cut itself happens at most once
                // per RTT no matter how many loss episodes land inside one
                if (!src.decreased_once ||
                    evt.t - src.last_decrease >= time_from_seconds(src.srtt_s)) {
                    src.cwnd = cwnd_loss_update(src.cwnd, src.params.gamma);
                    src.last_decrease = evt.t;
                    src.decreased_once = true;
                }
                emit(evt.flow, src.snd_una, true, false, evt.t);
            }
        }
        schedule_probe(evt.flow, evt.t);
    }

    void on_probe_timer(const Event& evt) {
        Source& src = sources_[evt.flow - 1];
        if (evt.generation != src.probe_generation) return;  // superseded
        if (src.in_flight() > 0) {
            emit(evt.flow, src.snd_una, true, true, evt.t);
        } else {
            try_send(evt.flow, evt.t);
        }
        schedule_probe(evt.flow, evt.t);
    }

    void on_sample(const Event& evt) {
        trace_.sample_time_s.push_back(time_to_seconds(evt.t));
        for (std::size_t k = 0; k < sources_.size(); ++k) {
            const Source& src = sources_[k];
            trace_.cwnd[k].push_back(src.cwnd);
            trace_.stamped_index[k].push_back((*src.index_values)[src.int_window() - 1]);
        }
        trace_.queue_length.push_back(router_.size());
        const TimePs next = evt.t + time_from_seconds(trace_.sample_interval_s);
        if (next <= end_) push_sample(next);
    }

    SimulationResult finish() {
        const int n_flows = static_cast<int>(sources_.size());
        for (int k = 0; k < n_flows; ++k) {
            FlowCounters& counters = trace_.counters[k];
            counters.in_network = counters.sent - counters.delivered - counters.dropped;
        }

        MetricsReport metrics;
        long long total_delivered = 0;
        std::vector<double> goodputs(n_flows);
        for (int k = 0; k < n_flows; ++k) {
            goodputs[k] = window_delivered_[k] / spec_.measure_s;
            total_delivered += window_delivered_[k];
        }
        metrics.per_flow_goodput_pps = goodputs;
        metrics.utilization =
            utilization(total_delivered, spec_.measure_s, spec_.router.egress, spec_.packet_bytes);
        metrics.jain_fairness = jain_index(goodputs);
        metrics.mean_queue_size = mean_queue_size(trace_.queue_trace, spec_.warmup_s,
                                                  spec_.warmup_s + spec_.measure_s);
        metrics.per_flow_rtt_s.resize(n_flows);
        for (int k = 0; k < n_flows; ++k)
            metrics.per_flow_rtt_s[k] = rtt_samples_[k].empty()
                                            ? std::numeric_limits<double>::quiet_NaN()
                                            : mean_rtt(rtt_samples_[k]);

        return {std::move(metrics), std::move(trace_)};
    }

    ScenarioSpec spec_;
    TimePs end_, window_start_, window_end_;
    TimePs bottleneck_serialization_, bottleneck_prop_;
    RouterQueue router_;
    bool egress_busy_ = false;
    std::uint64_t next_order_ = 0;
    std::priority_queue<Event, std::vector<Event>, EventAfter> events_;
    std::vector<Source> sources_;
    std::vector<Receiver> receivers_;
    std::vector<long long> window_delivered_;
    std::vector<std::vector<double>> rtt_samples_;
    TraceBundle trace_;
};

}  // namespace

SimulationResult run_scenario(const ScenarioSpec& spec) {
    spec.validate();
    Simulator sim(spec);
    return sim.run();
}

}  // namespace tcpindex
