#include "vrmcast/matching.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace vrmcast::matching {

double estimate_interference(double last, const std::deque<double>& window, double nu1) {
    if (window.empty()) return 0.0;
    const double mean = std::accumulate(window.begin(), window.end(), 0.0) / static_cast<double>(window.size());
    return nu1 * last + (1.0 - nu1) * mean;
}

InterferenceEstimator::InterferenceEstimator(int num_users, double nu1, int nu2)
    : nu1_(nu1), nu2_(nu2), window_(static_cast<std::size_t>(num_users)) {
    if (nu1 < 0.0 || nu1 > 1.0) throw std::invalid_argument("nu1 must lie in [0,1]");
    if (nu2 < 1) throw std::invalid_argument("nu2 must be at least 1");
}

double InterferenceEstimator::estimate(int user) const {
    const auto& w = window_.at(static_cast<std::size_t>(user));
    return w.empty() ? 0.0 : estimate_interference(w.back(), w, nu1_);
}

void InterferenceEstimator::record(int user, double measured) {
    auto& w = window_.at(static_cast<std::size_t>(user));
    w.push_back(measured);
    while (static_cast<int>(w.size()) > nu2_) w.pop_front();
}

std::vector<Beam> group_beams(const std::vector<double>& az, const std::vector<double>& catalog, int max_beams) {
    const int n = static_cast<int>(az.size());
    if (n == 0) return {};
    if (catalog.empty() || max_beams < 1) throw std::invalid_argument("group_beams: empty catalog or no RF chain");

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return az[a] < az[b]; });
    std::vector<double> a(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) a[static_cast<std::size_t>(i)] = az[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];

    // Open the circle at its widest gap.
    int start = 0;
    double widest = a.front() + 360.0 - a.back();
    for (int i = 1; i < n; ++i) {
        const double gap = a[static_cast<std::size_t>(i)] - a[static_cast<std::size_t>(i - 1)];
        if (gap > widest) {
            widest = gap;
            start = i;
        }
    }
    std::rotate(order.begin(), order.begin() + start, order.end());
    std::rotate(a.begin(), a.begin() + start, a.end());
    for (int i = 1; i < n; ++i)
        if (a[static_cast<std::size_t>(i)] < a[static_cast<std::size_t>(i - 1)]) a[static_cast<std::size_t>(i)] += 360.0;

    const int g = std::min(max_beams, n);
    constexpr double inf = std::numeric_limits<double>::infinity();
    // best[j][i]: minimal worst spread covering the first i sorted members with j groups.
    std::vector<std::vector<double>> best(static_cast<std::size_t>(g + 1),
                                          std::vector<double>(static_cast<std::size_t>(n + 1), inf));
    std::vector<std::vector<int>> cut(static_cast<std::size_t>(g + 1), std::vector<int>(static_cast<std::size_t>(n + 1), 0));
    best[0][0] = 0.0;
    for (int j = 1; j <= g; ++j)
        for (int i = j; i <= n; ++i)
            for (int p = j - 1; p < i; ++p) {
                const double spread = a[static_cast<std::size_t>(i - 1)] - a[static_cast<std::size_t>(p)];
                const double v = std::max(best[static_cast<std::size_t>(j - 1)][static_cast<std::size_t>(p)], spread);
                if (v < best[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)]) {
                    best[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = v;
                    cut[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = p;
                }
            }

    std::vector<double> widths = catalog;
    std::sort(widths.begin(), widths.end());
    std::vector<Beam> beams(static_cast<std::size_t>(g));
    int end = n;
    for (int j = g; j >= 1; --j) {
        const int begin = cut[static_cast<std::size_t>(j)][static_cast<std::size_t>(end)];
        Beam& b = beams[static_cast<std::size_t>(j - 1)];
        const double lo = a[static_cast<std::size_t>(begin)], hi = a[static_cast<std::size_t>(end - 1)];
        const double spread = hi - lo;
        b.boresight_deg = (lo + hi) / 2.0;
        if (b.boresight_deg > 180.0) b.boresight_deg -= 360.0;
        b.width_deg = widths.back();
        for (double w : widths)
            if (w >= spread - 1e-9) {
                b.width_deg = w;
                break;
            }
        for (int i = begin; i < end; ++i) b.members.push_back(order[static_cast<std::size_t>(i)]);
        std::sort(b.members.begin(), b.members.end());
        end = begin;
    }
    return beams;
}

double beam_gain(const Beam& beam, double az_deg, double g_sl) {
    const double dev = channel::abs_angle_diff_deg(az_deg, beam.boresight_deg);
    return channel::antenna_gain(channel::deg_to_rad(beam.width_deg), channel::deg_to_rad(dev), g_sl);
}

Matching deferred_acceptance(const UtilityTables& u, std::mt19937_64& rng) {
    const int nb = u.num_sbs(), nk = u.num_clusters();
    if (u.cluster_side.rows() != nb || u.cluster_side.cols() != nk || static_cast<int>(u.eligible.size()) != nk)
        throw std::invalid_argument("deferred_acceptance: table shapes differ");

    Matching m = Matching::empty(nb, nk);
    // Preference list of each SBS: eligible clusters by descending utility, lowest index first on ties.
    std::vector<std::vector<int>> prefs(static_cast<std::size_t>(nb));
    std::vector<std::size_t> next(static_cast<std::size_t>(nb), 0);
    for (int b = 0; b < nb; ++b) {
        auto& p = prefs[static_cast<std::size_t>(b)];
        for (int k = 0; k < nk; ++k)
            if (u.eligible[static_cast<std::size_t>(k)]) p.push_back(k);
        std::stable_sort(p.begin(), p.end(), [&](int x, int y) { return u.sbs_side(b, x) > u.sbs_side(b, y); });
    }

    // Rejections only ever remove the current head of a list, so a cursor is enough.
    std::vector<int> active;
    for (;;) {
        active.clear();
        for (int b = 0; b < nb; ++b)
            if (m.cluster_of_sbs[static_cast<std::size_t>(b)] < 0 &&
                next[static_cast<std::size_t>(b)] < prefs[static_cast<std::size_t>(b)].size())
                active.push_back(b);
        if (active.empty()) break;
        const int b = active[std::uniform_int_distribution<std::size_t>(0, active.size() - 1)(rng)];
        auto& cursor = next[static_cast<std::size_t>(b)];
        const int k = prefs[static_cast<std::size_t>(b)][cursor];
        ++m.proposals;
        const int holder = m.sbs_of_cluster[static_cast<std::size_t>(k)];
        if (holder < 0) {
            m.sbs_of_cluster[static_cast<std::size_t>(k)] = b;
            m.cluster_of_sbs[static_cast<std::size_t>(b)] = k;
        } else if (u.cluster_side(b, k) > u.cluster_side(holder, k)) {
            m.cluster_of_sbs[static_cast<std::size_t>(holder)] = -1;
            ++next[static_cast<std::size_t>(holder)];
            m.sbs_of_cluster[static_cast<std::size_t>(k)] = b;
            m.cluster_of_sbs[static_cast<std::size_t>(b)] = k;
        } else {
            ++cursor;
        }
    }
    return m;
}

bool is_stable(const Matching& m, const UtilityTables& u) {
    for (int b = 0; b < u.num_sbs(); ++b) {
        const int cur_k = m.cluster_of_sbs[static_cast<std::size_t>(b)];
        const double b_now = cur_k < 0 ? 0.0 : u.sbs_side(b, cur_k);
        for (int k = 0; k < u.num_clusters(); ++k) {
            if (!u.eligible[static_cast<std::size_t>(k)] || k == cur_k) continue;
            const int cur_b = m.sbs_of_cluster[static_cast<std::size_t>(k)];
            const double k_now = cur_b < 0 ? 0.0 : u.cluster_side(cur_b, k);
            if (u.sbs_side(b, k) > b_now && u.cluster_side(b, k) > k_now) return false;
        }
    }
    return true;
}

std::vector<ChunkService> settle_slot(const std::vector<PoolChunk>& pool, const std::vector<double>& rate_of_user,
                                      double slot_s) {
    std::vector<ChunkService> out;
    double time_left = slot_s;
    for (std::size_t e = 0; e < pool.size() && time_left > 0.0; ++e) {
        const auto& c = pool[e];
        double rate = std::numeric_limits<double>::infinity();
        double owed = 0.0;
        for (std::size_t i = 0; i < c.users.size(); ++i) {
            if (c.remaining[i] <= 0.0) continue;
            rate = std::min(rate, rate_of_user.at(static_cast<std::size_t>(c.users[i])));
            owed = std::max(owed, c.remaining[i]);
        }
        if (owed <= 0.0 || !(rate > 0.0)) continue;
        const double bits = std::min(owed, rate * time_left);
        time_left -= bits / rate;
        out.push_back({e, bits});
    }
    return out;
}

}  // namespace vrmcast::matching
