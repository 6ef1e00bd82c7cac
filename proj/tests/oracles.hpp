// Independent reference computations shared by the unit and acceptance tests.
#ifndef VRMCAST_TEST_ORACLES_HPP
#define VRMCAST_TEST_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "vrmcast/lyapunov.hpp"
#include "vrmcast/matching.hpp"

namespace oracle {

using Partition = std::vector<std::vector<int>>;

inline double avg_link(const Eigen::MatrixXd& d, const std::vector<int>& a, const std::vector<int>& b) {
    double s = 0;
    for (int i : a)
        for (int j : b) s += d(i, j);
    return s / static_cast<double>(a.size() * b.size());
}

inline Partition canonical(Partition p) {
    for (auto& c : p) std::sort(c.begin(), c.end());
    std::sort(p.begin(), p.end());
    return p;
}

// Walks every merge order; keeps the ones where each merge is a minimum-linkage pair and
// collects the partitions they reach at k clusters.
inline void enumerate(const Eigen::MatrixXd& d, Partition cur, int k, std::set<Partition>& out) {
    if (static_cast<int>(cur.size()) == k) {
        out.insert(canonical(cur));
        return;
    }
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cur.size(); ++i)
        for (std::size_t j = i + 1; j < cur.size(); ++j) best = std::min(best, avg_link(d, cur[i], cur[j]));
    for (std::size_t i = 0; i < cur.size(); ++i)
        for (std::size_t j = i + 1; j < cur.size(); ++j) {
            if (avg_link(d, cur[i], cur[j]) > best) continue;
            Partition next;
            for (std::size_t x = 0; x < cur.size(); ++x)
                if (x != i && x != j) next.push_back(cur[x]);
            auto merged = cur[i];
            merged.insert(merged.end(), cur[j].begin(), cur[j].end());
            next.push_back(merged);
            enumerate(d, next, k, out);
        }
}

inline std::set<Partition> average_linkage_partitions(const Eigen::MatrixXd& d, int k) {
    Partition start;
    for (int i = 0; i < d.rows(); ++i) start.push_back({i});
    std::set<Partition> out;
    enumerate(d, start, k, out);
    return out;
}

// Auxiliary-variable subproblem: max (V - Z) gamma over a grid of [0, a_max] containing both ends.
inline double osp1_best(double z, double v, double a_max, int grid = 64) {
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= grid; ++i) {
        const double g = a_max * i / grid;
        best = std::max(best, v * g - z * g);
    }
    return best;
}

// Admission subproblem for one user: max over a in {0,1} of (Z - alpha) * a * bits.
inline double osp2_best(double z, double alpha, double bits) { return std::max(0.0, (z - alpha) * bits); }

struct Slot {
    double q, z, sum_f;        // start-of-slot state (sum_f over the frame's delay queues)
    double q1, z1, sum_f1sq;   // end-of-slot Q, Z and sum of squared delay queues
    double sum_f0sq;           // start-of-slot sum of squared delay queues
    double served, admitted, gamma;
    bool violated;
};

// Drift-minus-penalty and its bound, term by term from the proof of the drift lemma.
struct Bound {
    long double lhs = 0, rhs = 0, scale = 0;
};

inline Bound drift_bound(const std::vector<Slot>& users, double v, double eps) {
    using LD = long double;
    Bound b;
    LD drift = 0, pen = 0, d0 = 0, sched = 0, aux = 0;
    for (const auto& s : users) {
        const LD dl = LD(s.violated ? 1 : 0) - eps;
        const LD mu = s.served, a = s.admitted, g = s.gamma, q = s.q, z = s.z, f = s.sum_f;
        drift += (LD(s.q1) * s.q1 - q * q + LD(s.z1) * s.z1 - z * z + LD(s.sum_f1sq) - LD(s.sum_f0sq)) / 2;
        pen += LD(v) * g;
        const LD c = 2 * dl * q * f + dl * dl * (q * q + (mu - a) * (mu - a)) + (mu - a) * (mu - a) + (a - g) * (a - g);
        d0 += c / 2;
        const LD alpha = (dl * q + f) * dl + q;
        sched += alpha * (mu - a);
        aux += z * (a - g);
        b.scale += std::abs(c) + std::abs(alpha * (mu - a)) + std::abs(z * (a - g)) + LD(v) * g + q * q + z * z +
                   LD(s.q1) * s.q1 + LD(s.z1) * s.z1 + LD(s.sum_f1sq) + LD(s.sum_f0sq);
    }
    b.lhs = drift - pen;
    b.rhs = d0 - pen - sched - aux;
    return b;
}

inline bool holds(const Bound& b) { return b.lhs <= b.rhs + 1e-12L * b.scale; }

// Blocking-pair scan: a pair (b, k) blocks when both strictly gain over their current partners.
inline int blocking_pairs(const vrmcast::matching::Matching& m, const vrmcast::matching::UtilityTables& u) {
    int count = 0;
    for (int b = 0; b < u.sbs_side.rows(); ++b) {
        const int kb = m.cluster_of_sbs[static_cast<std::size_t>(b)];
        for (int k = 0; k < u.sbs_side.cols(); ++k) {
            if (!u.eligible[static_cast<std::size_t>(k)] || k == kb) continue;
            const int bk = m.sbs_of_cluster[static_cast<std::size_t>(k)];
            const bool sbs_gains = kb < 0 ? u.sbs_side(b, k) > 0 : u.sbs_side(b, k) > u.sbs_side(b, kb);
            const bool cluster_gains = bk < 0 ? u.cluster_side(b, k) > 0 : u.cluster_side(b, k) > u.cluster_side(bk, k);
            if (sbs_gains && cluster_gains) ++count;
        }
    }
    return count;
}

}  // namespace oracle

#endif
