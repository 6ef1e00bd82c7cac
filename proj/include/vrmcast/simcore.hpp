#ifndef VRMCAST_SIMCORE_HPP
#define VRMCAST_SIMCORE_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "vrmcast/channel.hpp"
#include "vrmcast/clustering.hpp"
#include "vrmcast/config.hpp"
#include "vrmcast/lyapunov.hpp"
#include "vrmcast/matching.hpp"
#include "vrmcast/predictor.hpp"
#include "vrmcast/scenario.hpp"

namespace vrmcast::sim {

struct FrameRecord {
    int user = 0;
    std::int64_t frame = 0;
    double t_request_ms = 0.0;
    double deadline_ms = 0.0;
    double delay_ms = 0.0;
    bool hd_complete = false;
    double jaccard_delivered = 0.0;
    int tiles_sent = 0;
    int tiles_fov = 0;
};

struct InvariantCounters {
    std::int64_t negative_queue = 0;
    std::int64_t queue_mismatch = 0;
    std::int64_t partition_errors = 0;
    std::int64_t cluster_fov_errors = 0;
    std::int64_t drift_bound_failures = 0;
    std::int64_t quota_violations = 0;
    std::int64_t unstable_matchings = 0;
    std::int64_t proposal_overruns = 0;
    std::int64_t delay_bound_violations = 0;
    std::int64_t conservation_errors = 0;

    std::int64_t total() const;
    nlohmann::ordered_json to_json() const;
};

struct MetricsReport {
    std::string scheme;
    std::uint64_t seed = 0;
    int users = 0;
    std::int64_t frames = 0;  // evaluated (user, frame) pairs
    std::int64_t slots = 0;
    double avg_delay_ms = 0.0;
    double p99_delay_ms = 0.0;
    double hd_delivery_rate = 0.0;
    double delivered_jaccard = 0.0;
    double violation_fraction = 0.0;
    double prediction_jaccard = 0.0;
    double bits_admitted = 0.0;
    double bits_delivered = 0.0;
    double bits_dropped = 0.0;
    double bits_residual = 0.0;
    std::int64_t drift_checks = 0;
    InvariantCounters invariants;

    nlohmann::ordered_json to_json() const;
};

/// Nearest-rank percentile (p in (0, 100]) of an unsorted sample; 0 for an empty one.
double percentile_nearest_rank(std::vector<double> values, double p);

/// Delay, HD-rate and delivered-Jaccard aggregates over frame records.
MetricsReport record_metrics(const std::vector<FrameRecord>& frames);

/// Correlated head motion: each user follows an AR(1) pull toward a per-video attractor
/// that itself random-walks.
std::vector<scenario::PoseTrace> synthetic_poses(const SimConfig& cfg, std::uint64_t seed, std::int64_t frames);

struct RunResult {
    MetricsReport report;
    std::vector<FrameRecord> frames;
};

class Simulator {
public:
    Simulator(const SimConfig& cfg, Scheme scheme, std::uint64_t seed);
    ~Simulator();
    Simulator(const Simulator&) = delete;
    Simulator& operator=(const Simulator&) = delete;

    /// Advances one slot. Returns false once the configured horizon is reached.
    bool step();
    RunResult finish();

    std::int64_t slot() const;
    std::int64_t total_slots() const;
    const InvariantCounters& invariants() const;
    const scenario::TheaterLayout& layout() const;
    /// Users grouped by cluster under the current partition (global user ids).
    std::vector<std::vector<int>> clusters() const;
    const lyapunov::UserQueueState& queue(int user) const;
    int num_users() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

RunResult run(const SimConfig& cfg, Scheme scheme, std::uint64_t seed);

void write_frames_csv(std::ostream& out, const std::vector<FrameRecord>& frames, const std::string& scheme);

}  // namespace vrmcast::sim

#endif  // VRMCAST_SIMCORE_HPP
