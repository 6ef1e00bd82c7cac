#ifndef VRMCAST_CLUSTERING_HPP
#define VRMCAST_CLUSTERING_HPP

#include <vector>

#include <Eigen/Core>

#include "vrmcast/tileset.hpp"

namespace vrmcast::clustering {

/// 1 - |A n B| / |A u B|; two empty sets are at distance 0.
double fov_distance(const TileSet& a, const TileSet& b);

/// FoV dissimilarity scaled by physical separation relative to d_min.
double combined_distance(double fov_dist, double d2d, double d2d_min);

/// Symmetric |U| x |U| matrix of combined distances (positions in metres, xy plane used).
Eigen::MatrixXd distance_matrix(const std::vector<TileSet>& fovs, const std::vector<Eigen::Vector3d>& positions,
                                double d2d_min);

/// Average-linkage agglomeration down to `k` clusters. Clusters are returned as sorted
/// index lists, ordered by their smallest member. Ties merge the pair with the smallest
/// (min index, min index) key.
std::vector<std::vector<int>> agglomerate(const Eigen::MatrixXd& d, int k);

struct ClusterPartition {
    std::vector<std::vector<int>> clusters;  // indices into the input user list
    std::vector<TileSet> cluster_fov;        // union of member FoVs
    std::vector<int> label;                  // cluster index per user
};

ClusterPartition make_partition(std::vector<std::vector<int>> clusters, const std::vector<TileSet>& fovs);

/// Distance matrix, agglomeration and cluster FoVs in one go.
ClusterPartition cluster_users(const std::vector<TileSet>& fovs, const std::vector<Eigen::Vector3d>& positions,
                               int k, double d2d_min);

}  // namespace vrmcast::clustering

#endif  // VRMCAST_CLUSTERING_HPP
