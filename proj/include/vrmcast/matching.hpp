#ifndef VRMCAST_MATCHING_HPP
#define VRMCAST_MATCHING_HPP

#include <cstdint>
#include <deque>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "vrmcast/channel.hpp"

namespace vrmcast::matching {

/// nu1 * last + (1 - nu1) * mean(window); 0 for an empty window.
double estimate_interference(double last, const std::deque<double>& window, double nu1);

class InterferenceEstimator {
public:
    InterferenceEstimator(int num_users = 0, double nu1 = 0.5, int nu2 = 10);

    double estimate(int user) const;
    void record(int user, double measured);
    int samples(int user) const { return static_cast<int>(window_.at(static_cast<std::size_t>(user)).size()); }

private:
    double nu1_;
    int nu2_;
    std::vector<std::deque<double>> window_;
};

/// One transmit beam of an SBS: members are indices into the caller's member list.
struct Beam {
    std::vector<int> members;
    double width_deg = 0.0;
    double boresight_deg = 0.0;
};

/// Sorts members by azimuth, splits them into min(max_beams, n) contiguous groups that
/// minimise the largest angular spread, and gives each group the narrowest catalog beam
/// covering it (the widest one if none does).
std::vector<Beam> group_beams(const std::vector<double>& azimuths_deg, const std::vector<double>& catalog_deg,
                              int max_beams);

/// Transmit gain of a beam toward azimuth `az_deg`.
double beam_gain(const Beam& beam, double az_deg, double g_sl);

/// Utility tables indexed [sbs][cluster]. `eligible[k]` is false for clusters with an empty pool.
struct UtilityTables {
    Eigen::MatrixXd sbs_side;      // value of cluster k to SBS b (urgency)
    Eigen::MatrixXd cluster_side;  // value of SBS b to cluster k (estimated rate)
    std::vector<bool> eligible;

    int num_sbs() const { return static_cast<int>(sbs_side.rows()); }
    int num_clusters() const { return static_cast<int>(sbs_side.cols()); }
};

struct Matching {
    std::vector<int> cluster_of_sbs;  // -1 when idle
    std::vector<int> sbs_of_cluster;  // -1 when idle
    int proposals = 0;

    static Matching empty(int num_sbs, int num_clusters) {
        return {std::vector<int>(static_cast<std::size_t>(num_sbs), -1),
                std::vector<int>(static_cast<std::size_t>(num_clusters), -1), 0};
    }
};

/// Deferred acceptance with SBSs proposing in random order. A held cluster switches only
/// to a strictly better proposer.
Matching deferred_acceptance(const UtilityTables& u, std::mt19937_64& rng);

/// True when no eligible (b, k) pair strictly prefers each other to their current partners.
bool is_stable(const Matching& m, const UtilityTables& u);

/// Per-slot service of one cluster pool. Entries must be in service order.
struct PoolChunk {
    std::int64_t frame = 0;
    int tile = 0;
    double urgency = 0.0;
    std::vector<int> users;         // requesting members (global ids)
    std::vector<double> remaining;  // bits still owed to each requester
};

struct ChunkService {
    std::size_t entry = 0;  // index in the pool
    double bits = 0.0;      // bits put on the air
};

/// Walks the pool in order, sending min(remaining, rate * time_left) per chunk at the
/// multicast rate of its requesters. `rate_of_user` maps global user id to bits/s.
std::vector<ChunkService> settle_slot(const std::vector<PoolChunk>& pool, const std::vector<double>& rate_of_user,
                                      double slot_s);

}  // namespace vrmcast::matching

#endif  // VRMCAST_MATCHING_HPP
