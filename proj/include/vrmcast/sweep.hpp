#ifndef VRMCAST_SWEEP_HPP
#define VRMCAST_SWEEP_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "vrmcast/config.hpp"
#include "vrmcast/simcore.hpp"

namespace vrmcast::sweep {

struct SweepSpec {
    std::string param;                   // config key, or "preset" to swap whole scenarios
    std::vector<nlohmann::json> values;
    std::vector<Scheme> schemes;
    std::vector<std::uint64_t> seeds;
    int workers = 0;                     // 0: hardware concurrency
};

struct SweepRow {
    std::string param;
    std::string value;  // JSON text of the swept value
    std::string scheme;
    std::uint64_t seed = 0;
    sim::MetricsReport report;
};

/// Config for one point of the sweep. Throws ConfigError on an invalid value.
SimConfig sweep_point(const SimConfig& base, const std::string& param, const nlohmann::json& value);

/// One row per (value, scheme, seed), in that nesting order regardless of completion order.
std::vector<SweepRow> run_sweep(const SimConfig& base, const SweepSpec& spec);

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

/// Parsed sweep CSV: header names plus raw cells.
struct SweepTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    int column(const std::string& name) const;  // throws ParseError
};

SweepTable read_sweep_csv(std::istream& in);

/// Line chart of `metric` averaged over seeds, one series per scheme. Depends only on the table.
std::string render_svg(const SweepTable& table, const std::string& metric);

/// Metrics that get a chart when a sweep finishes.
const std::vector<std::string>& chart_metrics();

}  // namespace vrmcast::sweep

#endif  // VRMCAST_SWEEP_HPP
