#include "tcpindex/scenario.hpp"

#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace tcpindex {

namespace {

std::string trim(std::string_view s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string_view::npos) return {};
    const auto end = s.find_last_not_of(" \t\r");
    return std::string(s.substr(begin, end - begin + 1));
}

}  // namespace

KeyValueMap parse_key_values(std::string_view text) {
    KeyValueMap kv;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("scenario line " + std::to_string(line_no) +
                                        ": expected key = value");
        const std::string key = trim(std::string_view(stripped).substr(0, eq));
        const std::string value = trim(std::string_view(stripped).substr(eq + 1));
        if (key.empty() || value.empty())
            throw std::invalid_argument("scenario line " + std::to_string(line_no) +
                                        ": empty key or value");
        kv[key] = value;
    }
    return kv;
}

void apply_overrides(KeyValueMap& kv, const std::vector<std::string>& overrides) {
    for (const std::string& item : overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("override '" + item + "' is not key=value");
        const std::string key = trim(std::string_view(item).substr(0, eq));
        const std::string value = trim(std::string_view(item).substr(eq + 1));
        if (key.empty() || value.empty())
            throw std::invalid_argument("override '" + item + "' is not key=value");
        kv[key] = value;
    }
}

namespace {

class KeyReader {
  public:
    explicit KeyReader(const KeyValueMap& kv) : kv_(kv) {}

    bool has(const std::string& key) const { return kv_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& fallback) {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        used_.insert(key);
        return it->second;
    }

    double get_double(const std::string& key, double fallback) {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        used_.insert(key);
        return parse_double(key, it->second);
    }

    double require_double(const std::string& key) {
        auto it = kv_.find(key);
        if (it == kv_.end()) throw std::invalid_argument("scenario: missing key '" + key + "'");
        used_.insert(key);
        return parse_double(key, it->second);
    }

    long long get_int(const std::string& key, long long fallback) {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        used_.insert(key);
        return parse_int(key, it->second);
    }

    long long require_int(const std::string& key) {
        auto it = kv_.find(key);
        if (it == kv_.end()) throw std::invalid_argument("scenario: missing key '" + key + "'");
        used_.insert(key);
        return parse_int(key, it->second);
    }

    void check_all_used() const {
        for (const auto& [key, value] : kv_)
            if (!used_.count(key))
                throw std::invalid_argument("scenario: unknown key '" + key + "'");
    }

  private:
    static double parse_double(const std::string& key, const std::string& value) {
        std::size_t consumed = 0;
        double out;
        try {
            out = std::stod(value, &consumed);
        } catch (const std::exception&) {
            throw std::invalid_argument("scenario: key '" + key + "': bad number '" + value + "'");
        }
        if (consumed != value.size())
            throw std::invalid_argument("scenario: key '" + key + "': bad number '" + value + "'");
        return out;
    }

    static long long parse_int(const std::string& key, const std::string& value) {
        std::size_t consumed = 0;
        long long out;
        try {
            out = std::stoll(value, &consumed);
        } catch (const std::exception&) {
            throw std::invalid_argument("scenario: key '" + key + "': bad integer '" + value +
                                        "'");
        }
        if (consumed != value.size())
            throw std::invalid_argument("scenario: key '" + key + "': bad integer '" + value +
                                        "'");
        return out;
    }

    const KeyValueMap& kv_;
    std::set<std::string> used_;
};

}  // namespace

ScenarioSpec scenario_from_key_values(const KeyValueMap& kv, std::string fallback_name) {
    KeyReader reader(kv);
    ScenarioSpec spec;
    spec.name = reader.get_string("name", fallback_name);
    spec.sim_duration_s = reader.get_double("sim_duration_s", spec.sim_duration_s);
    spec.warmup_s = reader.get_double("warmup_s", spec.warmup_s);
    spec.measure_s = reader.get_double("measure_s", spec.measure_s);
    spec.seed = static_cast<std::uint64_t>(reader.get_int("seed", 1));
    spec.packet_bytes = static_cast<int>(reader.get_int("packet_bytes", 576));

    const double alpha = reader.get_double("alpha", 1.0);
    const double beta = reader.get_double("beta", 0.9999);

    spec.router.egress.bandwidth_bps = reader.require_double("bottleneck.bandwidth_bps");
    spec.router.egress.propagation_delay_s = reader.require_double("bottleneck.delay_s");
    spec.router.buffer_packets = static_cast<int>(reader.require_int("buffer_packets"));

    const std::string policy_name = reader.get_string("policy", "droptail");
    const auto policy = policy_from_string(policy_name);
    if (!policy) throw std::invalid_argument("scenario: unknown policy '" + policy_name + "'");
    spec.router.policy = *policy;

    spec.router.red.min_threshold = static_cast<int>(reader.get_int("red.min_threshold", 0));
    spec.router.red.max_threshold = static_cast<int>(reader.get_int("red.max_threshold", 0));
    spec.router.red.queue_weight = reader.get_double("red.queue_weight", 0.002);
    spec.router.red.max_drop_probability = reader.get_double("red.max_drop_probability", 0.1);

    const int n_flows = static_cast<int>(reader.require_int("flows"));
    if (n_flows < 1) throw std::invalid_argument("scenario: flows must be >= 1");
    for (int k = 1; k <= n_flows; ++k) {
        const std::string prefix = "flow" + std::to_string(k) + ".";
        ScenarioFlowSpec flow;
        flow.params.gamma = reader.require_double(prefix + "gamma");
        flow.params.max_window = static_cast<int>(reader.get_int(prefix + "max_window", 70));
        flow.params.initial_window =
            static_cast<int>(reader.get_int(prefix + "initial_window", 1));
        flow.params.alpha = reader.get_double(prefix + "alpha", alpha);
        flow.params.beta = reader.get_double(prefix + "beta", beta);
        flow.access.bandwidth_bps = reader.require_double(prefix + "access.bandwidth_bps");
        flow.access.propagation_delay_s = reader.require_double(prefix + "access.delay_s");
        spec.flows.push_back(flow);
    }

    reader.check_all_used();
    spec.validate();
    return spec;
}

ScenarioSpec parse_scenario_text(std::string_view text, std::string fallback_name,
                                 const std::vector<std::string>& overrides) {
    KeyValueMap kv = parse_key_values(text);
    apply_overrides(kv, overrides);
    return scenario_from_key_values(kv, std::move(fallback_name));
}

ScenarioSpec load_scenario_file(const std::filesystem::path& path,
                                const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open scenario file: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_scenario_text(buffer.str(), path.stem().string(), overrides);
}

ScenarioSpec builtin_scenario(int id) {
    if (id < 0 || id > 4) throw std::invalid_argument("builtin scenario id must be 0..4");

    ScenarioSpec spec;
    spec.name = "scenario" + std::to_string(id);
    spec.sim_duration_s = 25.0;
    spec.warmup_s = 5.0;
    spec.measure_s = 20.0;
    spec.seed = 1;
    spec.packet_bytes = 576;
    spec.router.egress = {1'500'000.0, 0.010};
    spec.router.buffer_packets = id == 1 ? 6 : 13;
    spec.router.policy = QueuePolicy::DropTail;

    for (int k = 0; k < 2; ++k) {
        ScenarioFlowSpec flow;
        flow.params = {.max_window = 70,
                       .gamma = 0.5,
                       .alpha = 1.0,
                       .beta = 0.9999,
                       .initial_window = 1};
        flow.access = {5'000'000.0, 0.010};
        spec.flows.push_back(flow);
    }
    if (id == 2) spec.flows[0].params.gamma = 0.0;
    if (id == 3) spec.flows[0].params.gamma = 0.9;
    if (id == 4) spec.flows[0].access.propagation_delay_s = 0.050;

    spec.validate();
    return spec;
}

void write_metrics_csv(std::ostream& out, const std::vector<ScenarioRunRow>& rows) {
    std::size_t n_flows = 0;
    for (const auto& row : rows) n_flows = std::max(n_flows, row.metrics.per_flow_rtt_s.size());
    out << "scenario,policy,utilization,jain_fairness,mean_queue_size";
    for (std::size_t k = 1; k <= n_flows; ++k) out << ",rtt_flow" << k << "_s";
    out << '\n';
    const auto old_precision = out.precision(10);
    for (const auto& row : rows) {
        out << row.scenario << ',' << row.policy << ',' << row.metrics.utilization << ','
            << row.metrics.jain_fairness << ',' << row.metrics.mean_queue_size;
        for (std::size_t k = 0; k < n_flows; ++k) {
            out << ',';
            if (k < row.metrics.per_flow_rtt_s.size()) out << row.metrics.per_flow_rtt_s[k];
        }
        out << '\n';
    }
    out.precision(old_precision);
}

void write_trace_csv(std::ostream& out, const TraceBundle& trace) {
    const std::size_t n_flows = trace.cwnd.size();
    out << "time_s";
    for (std::size_t k = 1; k <= n_flows; ++k) out << ",cwnd_" << k;
    out << ",queue_length";
    for (std::size_t k = 1; k <= n_flows; ++k) out << ",index_" << k;
    out << '\n';
    const auto old_precision = out.precision(10);
    for (std::size_t i = 0; i < trace.sample_time_s.size(); ++i) {
        out << trace.sample_time_s[i];
        for (std::size_t k = 0; k < n_flows; ++k) out << ',' << trace.cwnd[k][i];
        out << ',' << trace.queue_length[i];
        for (std::size_t k = 0; k < n_flows; ++k) out << ',' << trace.stamped_index[k][i];
        out << '\n';
    }
    out.precision(old_precision);
}

}  // namespace tcpindex
