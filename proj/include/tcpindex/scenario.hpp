#ifndef TCPINDEX_SCENARIO_HPP
#define TCPINDEX_SCENARIO_HPP

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "tcpindex/packet_sim.hpp"

namespace tcpindex {

// Scenario files are flat "key = value" text with '#' comments. Keys mirror
// ScenarioSpec: global alpha/beta, bottleneck.*, buffer_packets, policy,
// flows = K plus flowK.* blocks, optional red.* overrides.
using KeyValueMap = std::map<std::string, std::string>;

KeyValueMap parse_key_values(std::string_view text);

// "key=value" strings layered on top of the file contents.
void apply_overrides(KeyValueMap& kv, const std::vector<std::string>& overrides);

ScenarioSpec scenario_from_key_values(const KeyValueMap& kv, std::string fallback_name);
ScenarioSpec parse_scenario_text(std::string_view text, std::string fallback_name,
                                 const std::vector<std::string>& overrides = {});
ScenarioSpec load_scenario_file(const std::filesystem::path& path,
                                const std::vector<std::string>& overrides = {});

// The five experiments, with the benchmark parameters baked in.
ScenarioSpec builtin_scenario(int id);

struct ScenarioRunRow {
    std::string scenario;
    std::string policy;
    MetricsReport metrics;
};

void write_metrics_csv(std::ostream& out, const std::vector<ScenarioRunRow>& rows);
void write_trace_csv(std::ostream& out, const TraceBundle& trace);

}  // namespace tcpindex

#endif
