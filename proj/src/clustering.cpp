#include "vrmcast/clustering.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace vrmcast::clustering {

double fov_distance(const TileSet& a, const TileSet& b) {
    if (a.size() != b.size()) throw std::invalid_argument("fov_distance: tile grids differ");
    const int uni = (a | b).count();
    if (uni == 0) return 0.0;
    return 1.0 - static_cast<double>((a & b).count()) / uni;
}

double combined_distance(double fov_dist, double d2d, double d2d_min) {
    if (!(d2d_min > 0.0)) throw std::invalid_argument("combined_distance: d_min must be positive");
    return fov_dist * (d2d / d2d_min);
}

Eigen::MatrixXd distance_matrix(const std::vector<TileSet>& fovs, const std::vector<Eigen::Vector3d>& pos,
                                double d2d_min) {
    if (fovs.size() != pos.size()) throw std::invalid_argument("distance_matrix: size mismatch");
    const auto n = static_cast<Eigen::Index>(fovs.size());
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
            const double sep = (pos[ui].head<2>() - pos[uj].head<2>()).norm();
            d(i, j) = d(j, i) = combined_distance(fov_distance(fovs[ui], fovs[uj]), sep, d2d_min);
        }
    return d;
}

std::vector<std::vector<int>> agglomerate(const Eigen::MatrixXd& d, int k) {
    const int n = static_cast<int>(d.rows());
    if (d.cols() != n) throw std::invalid_argument("agglomerate: matrix must be square");
    if (n == 0 && k == 0) return {};
    if (k < 1 || k > n) throw std::invalid_argument("agglomerate: K out of range");

    // Cross-cluster distance sums; average = sum / (|A| |B|).
    Eigen::MatrixXd sum = d;
    std::vector<std::vector<int>> members(static_cast<std::size_t>(n));
    std::vector<bool> alive(static_cast<std::size_t>(n), true);
    for (int i = 0; i < n; ++i) members[static_cast<std::size_t>(i)] = {i};

    // Slot i always keeps its smallest member at index i after merges into the lower slot.
    for (int remaining = n; remaining > k; --remaining) {
        double best = std::numeric_limits<double>::infinity();
        int bi = -1, bj = -1;
        for (int i = 0; i < n; ++i) {
            if (!alive[static_cast<std::size_t>(i)]) continue;
            const double si = static_cast<double>(members[static_cast<std::size_t>(i)].size());
            for (int j = i + 1; j < n; ++j) {
                if (!alive[static_cast<std::size_t>(j)]) continue;
                const double avg = sum(i, j) / (si * static_cast<double>(members[static_cast<std::size_t>(j)].size()));
                if (avg < best) {
                    best = avg;
                    bi = i;
                    bj = j;
                }
            }
        }
        auto& mi = members[static_cast<std::size_t>(bi)];
        auto& mj = members[static_cast<std::size_t>(bj)];
        mi.insert(mi.end(), mj.begin(), mj.end());
        std::sort(mi.begin(), mi.end());
        mj.clear();
        alive[static_cast<std::size_t>(bj)] = false;
        for (int x = 0; x < n; ++x) {
            if (!alive[static_cast<std::size_t>(x)] || x == bi) continue;
            sum(bi, x) = sum(x, bi) = sum(bi, x) + sum(bj, x);
        }
    }

    std::vector<std::vector<int>> out;
    for (int i = 0; i < n; ++i)
        if (alive[static_cast<std::size_t>(i)]) out.push_back(members[static_cast<std::size_t>(i)]);
    return out;
}

ClusterPartition make_partition(std::vector<std::vector<int>> clusters, const std::vector<TileSet>& fovs) {
    ClusterPartition p;
    p.clusters = std::move(clusters);
    p.label.assign(fovs.size(), -1);
    const int n_tiles = fovs.empty() ? 0 : fovs.front().size();
    for (std::size_t c = 0; c < p.clusters.size(); ++c) {
        TileSet u(n_tiles);
        for (int m : p.clusters[c]) {
            u |= fovs.at(static_cast<std::size_t>(m));
            p.label.at(static_cast<std::size_t>(m)) = static_cast<int>(c);
        }
        p.cluster_fov.push_back(u);
    }
    return p;
}

ClusterPartition cluster_users(const std::vector<TileSet>& fovs, const std::vector<Eigen::Vector3d>& positions,
                               int k, double d2d_min) {
    return make_partition(agglomerate(distance_matrix(fovs, positions, d2d_min), k), fovs);
}

}  // namespace vrmcast::clustering
