#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "mbsat/channel.hpp"
#include "mbsat/geometry.hpp"
#include "mbsat/rng.hpp"

namespace mbsat {

/// Similarity space of the per-beam user features.
enum class Metric {
    Euclidean2d, ///< local tangent-plane position, km
    Channel,     ///< (Re h, Im h), 2 N_B components
};

enum class Algorithm { UpperBound, Random, MaxDist, KMeansPP };

std::string_view to_string(Metric m);
std::string_view to_string(Algorithm a);
Metric parse_metric(std::string_view s);
Algorithm parse_algorithm(std::string_view s);

/// One user per row.
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Centroids = FeatureMatrix;

/// Clusters of one beam, as indices into that beam's user list.
///
/// Clusters keep creation order. Random and MaxDist list the reference user first,
/// then its neighbours by increasing distance; k-means++ lists members ascending.
struct Partition {
    int beam = 0;
    Algorithm algorithm = Algorithm::Random;
    std::size_t n_users = 0;
    std::vector<std::vector<int>> clusters;
    bool partial = false;   ///< UpperBound: only one cluster, not a cover
    bool converged = true;  ///< k-means++: false when max_iter was hit
    int iterations = 0;
    std::vector<double> sse_history; ///< k-means++: SSE after every centroid update

    std::size_t size() const { return clusters.size(); }
};

FeatureMatrix feature_vectors(const std::vector<User>& users, const BeamSpec& beam,
                              std::span<const UserChannel> channels, Metric metric);

/// Divide each column by its standard deviation (columns with zero spread are untouched).
void scale_unit_variance(FeatureMatrix& features);

Eigen::VectorXd barycentre(const FeatureMatrix& features, std::span<const int> subset);

/// Sum over clusters of squared distances to the cluster mean. Throws on a partial partition.
double sse_cost(const Partition& partition, const FeatureMatrix& features);

/// Empty string if `p` is a disjoint, covering, non-empty partition of n users; otherwise
/// a description of the first violation.
std::string partition_violation(const Partition& p, std::size_t n_users);

/// All-singleton partition in user-index order.
Partition unicast_partition(std::size_t n_users, Algorithm tag);

/// floor(N_U / K).
std::size_t clusters_for(std::size_t n_users, int cluster_size);

/// Picks the reference user: receives the still-available indices (ascending) and
/// returns a position into that span.
using ReferencePicker = std::function<std::size_t(std::span<const int> available)>;

Partition cluster_upperbound(const FeatureMatrix& features, int cluster_size, Rng& rng);
Partition cluster_upperbound(const FeatureMatrix& features, int cluster_size, std::size_t reference);

Partition cluster_random(const FeatureMatrix& features, int cluster_size, Rng& rng);
Partition cluster_random(const FeatureMatrix& features, int cluster_size, const ReferencePicker& pick);

Partition cluster_maxdist(const FeatureMatrix& features, int cluster_size);

struct KMeansOptions {
    double tol = 1e-6; ///< max centroid displacement, feature units
    int max_iter = 300;
};

/// Indices of the users picked as initial centroids by D^2 sampling.
std::vector<int> kmeanspp_seed_indices(const FeatureMatrix& features, std::size_t n_clusters, Rng& rng);
Centroids kmeanspp_init(const FeatureMatrix& features, std::size_t n_clusters, Rng& rng);

/// Lloyd iterations from the given centroids.
Partition lloyd(const FeatureMatrix& features, Centroids centroids, const KMeansOptions& options);

Partition cluster_kmeanspp(const FeatureMatrix& features, std::size_t n_clusters, Rng& rng,
                           const KMeansOptions& options = {});

} // namespace mbsat
