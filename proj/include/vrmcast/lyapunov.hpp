#ifndef VRMCAST_LYAPUNOV_HPP
#define VRMCAST_LYAPUNOV_HPP

#include <cstdint>
#include <map>
#include <vector>

#include "vrmcast/tileset.hpp"

namespace vrmcast::lyapunov {

struct LyapunovParams {
    double v_delta = 1e8;
    double epsilon = 0.01;
    double a_max = 0.0;  // bits; filled from chunk size and tile count by the simulator
    double tau_mtp_ms = 10.0;
};

/// Time left before the MTP budget of a request that arrived in slot t_a runs out.
double mtp_slack(std::int64_t t_a, std::int64_t t, double tau_mtp_ms, double slot_ms);

/// Auxiliary variable under a linear utility.
double select_auxiliary(double z, double v_delta, double a_max);

struct Alpha {
    double q = 0.0;  // traffic-queue part
    double f = 0.0;  // delay-queue part
    double total = 0.0;
};

Alpha alpha_weight(double q, double sum_f, double epsilon, bool mtp_violated);

/// Whole-frame admission decision.
int admit(double z, double alpha);

double admitted_bits(int a_real, int a_pred, const TileSet& real_missing, const TileSet& cluster_pred,
                     double chunk_bits);

/// Physical queue, auxiliary queue and per-frame delay queues of one user.
struct UserQueueState {
    double q = 0.0;
    double z = 0.0;
    std::map<std::int64_t, double> f;

    double sum_f() const;
};

struct SlotDecision {
    double served = 0.0;   // bits transmitted to this user in the slot
    double dropped = 0.0;  // bits removed on expiry
    double admitted = 0.0;
    double gamma = 0.0;
    bool violated = false;
    std::int64_t current_frame = 0;
    bool delay_queue_enabled = true;
};

/// Applies one slot of queue dynamics. The delay queue of `current_frame` is updated with
/// the post-update physical queue.
UserQueueState update_queues(const UserQueueState& s, const SlotDecision& d, double epsilon);

struct DriftCheck {
    long double lhs = 0;  // drift minus penalty
    long double rhs = 0;  // bound
    long double slack = 0;
    bool holds = true;
};

/// Evaluates the per-slot drift-plus-penalty bound for a set of users given their state
/// before and after one slot. Rounding tolerance scales with the magnitude of the terms.
DriftCheck drift_bound_check(const std::vector<UserQueueState>& before, const std::vector<SlotDecision>& decisions,
                             const std::vector<UserQueueState>& after, double v_delta, double epsilon);

}  // namespace vrmcast::lyapunov

#endif  // VRMCAST_LYAPUNOV_HPP
