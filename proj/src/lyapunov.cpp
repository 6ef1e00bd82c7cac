#include "vrmcast/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vrmcast::lyapunov {

double mtp_slack(std::int64_t t_a, std::int64_t t, double tau, double slot_ms) {
    return std::max(0.0, static_cast<double>(t_a) * slot_ms + tau - static_cast<double>(t) * slot_ms);
}

double select_auxiliary(double z, double v_delta, double a_max) { return z <= v_delta ? a_max : 0.0; }

Alpha alpha_weight(double q, double sum_f, double eps, bool violated) {
    Alpha a;
    a.q = q * (1.0 + eps * eps) - eps * sum_f;
    a.f = sum_f + (1.0 - 2.0 * eps) * q;
    a.total = a.q + (violated ? a.f : 0.0);
    return a;
}

int admit(double z, double alpha) { return z >= alpha ? 1 : 0; }

double admitted_bits(int a_real, int a_pred, const TileSet& real_missing, const TileSet& cluster_pred,
                     double chunk_bits) {
    return chunk_bits * (a_real * real_missing.count() + a_pred * cluster_pred.count());
}

double UserQueueState::sum_f() const {
    double s = 0.0;
    for (const auto& [frame, v] : f) s += v;
    return s;
}

UserQueueState update_queues(const UserQueueState& s, const SlotDecision& d, double eps) {
    if (d.served < 0.0 || d.dropped < 0.0 || d.admitted < 0.0)
        throw std::invalid_argument("update_queues: negative bit count");
    UserQueueState n = s;
    n.q = std::max(0.0, s.q - d.served - d.dropped) + d.admitted;
    n.z = std::max(0.0, s.z - d.admitted + d.gamma);
    if (d.delay_queue_enabled) {
        const double ind = d.violated ? 1.0 : 0.0;
        double& f = n.f[d.current_frame];
        f = std::max(0.0, f + (ind - eps) * n.q);
    }
    return n;
}

DriftCheck drift_bound_check(const std::vector<UserQueueState>& before, const std::vector<SlotDecision>& dec,
                             const std::vector<UserQueueState>& after, double v_delta, double eps) {
    if (before.size() != dec.size() || before.size() != after.size())
        throw std::invalid_argument("drift_bound_check: size mismatch");
    using LD = long double;
    auto lyap = [](const UserQueueState& s) {
        LD l = LD(s.q) * s.q + LD(s.z) * s.z;
        for (const auto& [frame, v] : s.f) l += LD(v) * v;
        return l / 2;
    };

    LD drift = 0, penalty = 0, delta0 = 0, sched = 0, aux = 0, scale = 0;
    for (std::size_t u = 0; u < before.size(); ++u) {
        const auto& b = before[u];
        const auto& d = dec[u];
        const LD q = b.q, z = b.z, sf = b.sum_f();
        const LD s = LD(d.served) + d.dropped, a = d.admitted, g = d.gamma;
        const LD delta = (d.violated ? 1.0L : 0.0L) - eps;

        drift += lyap(after[u]) - lyap(b);
        penalty += LD(v_delta) * g;
        const LD d0 = (2 * delta * q * sf + delta * delta * (q * q + (s - a) * (s - a)) + (s - a) * (s - a) +
                       (a - g) * (a - g)) /
                      2;
        delta0 += d0;
        const LD alpha = q * (1 + delta * delta) + delta * sf;
        sched += alpha * (s - a);
        aux += z * (a - g);
        scale += std::abs(d0) + std::abs(alpha * (s - a)) + std::abs(z * (a - g)) + LD(v_delta) * g + lyap(b) +
                 lyap(after[u]);
    }

    DriftCheck r;
    r.lhs = drift - penalty;
    r.rhs = delta0 - penalty - sched - aux;
    r.slack = r.rhs - r.lhs;
    r.holds = r.lhs <= r.rhs + scale * 1e-12L;
    return r;
}

}  // namespace vrmcast::lyapunov
