#include "mbsat/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "kdtree.hpp"
#include "mbsat/error.hpp"

namespace mbsat {

using detail::squared_distance;

std::string_view to_string(Metric m) {
    return m == Metric::Euclidean2d ? "euclidean" : "channel";
}

std::string_view to_string(Algorithm a) {
    switch (a) {
    case Algorithm::UpperBound: return "upperbound";
    case Algorithm::Random: return "random";
    case Algorithm::MaxDist: return "maxdist";
    case Algorithm::KMeansPP: return "kmeanspp";
    }
    return "?";
}

Metric parse_metric(std::string_view s) {
    if (s == "euclidean" || s == "euclidean2d" || s == "dist") return Metric::Euclidean2d;
    if (s == "channel" || s == "chann") return Metric::Channel;
    throw ConfigError("unknown metric '" + std::string(s) + "' (expected euclidean|channel)");
}

Algorithm parse_algorithm(std::string_view s) {
    if (s == "upperbound") return Algorithm::UpperBound;
    if (s == "random") return Algorithm::Random;
    if (s == "maxdist") return Algorithm::MaxDist;
    if (s == "kmeanspp" || s == "kmeans++") return Algorithm::KMeansPP;
    throw ConfigError("unknown algorithm '" + std::string(s) +
                      "' (expected upperbound|random|maxdist|kmeanspp)");
}

FeatureMatrix feature_vectors(const std::vector<User>& users, const BeamSpec& beam,
                              std::span<const UserChannel> channels, Metric metric) {
    const auto n = static_cast<Eigen::Index>(users.size());
    if (metric == Metric::Euclidean2d) {
        FeatureMatrix f(n, 2);
        for (Eigen::Index i = 0; i < n; ++i) {
            const PlaneXY xy = to_tangent_plane(beam.center, users[static_cast<std::size_t>(i)].position);
            f(i, 0) = xy.east_km;
            f(i, 1) = xy.north_km;
        }
        return f;
    }
    if (channels.size() != users.size()) {
        throw ConfigError("channel metric needs one synthesized channel per user");
    }
    const Eigen::Index nb = n == 0 ? 0 : channels[0].coefficients.size();
    FeatureMatrix f(n, 2 * nb);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& h = channels[static_cast<std::size_t>(i)].coefficients;
        for (Eigen::Index j = 0; j < nb; ++j) {
            f(i, j) = h[j].real();
            f(i, nb + j) = h[j].imag();
        }
    }
    return f;
}

void scale_unit_variance(FeatureMatrix& f) {
    if (f.rows() < 2) return;
    for (Eigen::Index c = 0; c < f.cols(); ++c) {
        const double mean = f.col(c).mean();
        const double var = (f.col(c).array() - mean).square().mean();
        if (var > 0.0) f.col(c) /= std::sqrt(var);
    }
}

Eigen::VectorXd barycentre(const FeatureMatrix& f, std::span<const int> subset) {
    if (subset.empty()) throw ConfigError("barycentre of an empty subset");
    Eigen::VectorXd g = Eigen::VectorXd::Zero(f.cols());
    for (int i : subset) g += f.row(i).transpose();
    return g / static_cast<double>(subset.size());
}

double sse_cost(const Partition& p, const FeatureMatrix& f) {
    if (p.partial) throw ConfigError("sse_cost needs a covering partition, got a partial one");
    double total = 0.0;
    for (const auto& cluster : p.clusters) {
        const Eigen::VectorXd m = barycentre(f, cluster);
        for (int j : cluster) total += (f.row(j).transpose() - m).squaredNorm();
    }
    return total;
}

std::string partition_violation(const Partition& p, std::size_t n_users) {
    std::vector<int> owner(n_users, -1);
    for (std::size_t c = 0; c < p.clusters.size(); ++c) {
        if (p.clusters[c].empty()) return "cluster " + std::to_string(c) + " is empty";
        for (int u : p.clusters[c]) {
            if (u < 0 || static_cast<std::size_t>(u) >= n_users) {
                return "cluster " + std::to_string(c) + " holds out-of-range user " + std::to_string(u);
            }
            if (owner[u] >= 0) {
                return "user " + std::to_string(u) + " is in clusters " + std::to_string(owner[u]) +
                       " and " + std::to_string(c);
            }
            owner[u] = static_cast<int>(c);
        }
    }
    if (!p.partial) {
        for (std::size_t u = 0; u < n_users; ++u) {
            if (owner[u] < 0) return "user " + std::to_string(u) + " is not covered";
        }
    }
    return {};
}

Partition unicast_partition(std::size_t n_users, Algorithm tag) {
    Partition p;
    p.algorithm = tag;
    p.n_users = n_users;
    p.clusters.reserve(n_users);
    for (std::size_t i = 0; i < n_users; ++i) p.clusters.push_back({static_cast<int>(i)});
    return p;
}

std::size_t clusters_for(std::size_t n_users, int cluster_size) {
    if (cluster_size < 1) throw ConfigError("cluster size K must be >= 1");
    return n_users / static_cast<std::size_t>(cluster_size);
}

namespace {

void check_size(const FeatureMatrix& f, int k, const char* who) {
    if (k < 1) throw ConfigError(std::string(who) + ": cluster size K must be >= 1");
    if (static_cast<Eigen::Index>(k) > f.rows()) {
        throw ConfigError(std::string(who) + ": K=" + std::to_string(k) + " exceeds the " +
                          std::to_string(f.rows()) + " users of the beam");
    }
}

struct Candidate {
    double d2;
    int index;
    bool operator<(const Candidate& o) const { return d2 < o.d2 || (d2 == o.d2 && index < o.index); }
};

/// Reference q followed by its `count - 1` nearest among `available` (which holds q).
void gather_nearest(const FeatureMatrix& f, int q, std::span<const int> available, std::size_t count,
                    std::vector<Candidate>& scratch, std::vector<int>& out) {
    const auto dim = static_cast<std::size_t>(f.cols());
    const double* fq = f.row(q).data();
    scratch.clear();
    for (int j : available) {
        if (j != q) scratch.push_back({squared_distance(f.row(j).data(), fq, dim), j});
    }
    const std::size_t take = std::min(count - 1, scratch.size());
    if (take < scratch.size()) {
        std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(take), scratch.end());
    }
    std::sort(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(take));
    out.clear();
    out.push_back(q);
    for (std::size_t t = 0; t < take; ++t) out.push_back(scratch[t].index);
}

/// Drops `taken` from the ascending `available` list, keeping it ascending.
void remove_taken(std::vector<int>& available, const std::vector<int>& taken, std::vector<char>& mark) {
    for (int t : taken) mark[t] = 1;
    available.erase(std::remove_if(available.begin(), available.end(), [&](int j) { return mark[j] != 0; }),
                    available.end());
}

template <class ChooseReference>
Partition greedy_fixed_size(const FeatureMatrix& f, int k, Algorithm tag, ChooseReference&& choose) {
    Partition p;
    p.algorithm = tag;
    p.n_users = static_cast<std::size_t>(f.rows());
    std::vector<int> available(p.n_users);
    std::iota(available.begin(), available.end(), 0);
    std::vector<char> mark(p.n_users, 0);
    std::vector<Candidate> scratch;
    scratch.reserve(p.n_users);
    std::vector<int> members;
    p.clusters.reserve((p.n_users + static_cast<std::size_t>(k) - 1) / static_cast<std::size_t>(k));
    while (!available.empty()) {
        const int q = choose(std::span<const int>(available));
        gather_nearest(f, q, available, static_cast<std::size_t>(k), scratch, members);
        remove_taken(available, members, mark);
        p.clusters.push_back(members);
    }
    return p;
}

} // namespace

Partition cluster_upperbound(const FeatureMatrix& f, int k, std::size_t reference) {
    check_size(f, k, "upperbound");
    if (reference >= static_cast<std::size_t>(f.rows())) throw ConfigError("upperbound: reference out of range");
    Partition p;
    p.algorithm = Algorithm::UpperBound;
    p.n_users = static_cast<std::size_t>(f.rows());
    std::vector<int> all(p.n_users);
    std::iota(all.begin(), all.end(), 0);
    std::vector<Candidate> scratch;
    std::vector<int> members;
    gather_nearest(f, static_cast<int>(reference), all, static_cast<std::size_t>(k), scratch, members);
    p.clusters.push_back(std::move(members));
    p.partial = static_cast<std::size_t>(k) < p.n_users;
    return p;
}

Partition cluster_upperbound(const FeatureMatrix& f, int k, Rng& rng) {
    check_size(f, k, "upperbound");
    return cluster_upperbound(f, k, static_cast<std::size_t>(rng.index(static_cast<std::uint64_t>(f.rows()))));
}

Partition cluster_random(const FeatureMatrix& f, int k, const ReferencePicker& pick) {
    check_size(f, k, "random");
    return greedy_fixed_size(f, k, Algorithm::Random, [&](std::span<const int> available) {
        const std::size_t pos = pick(available);
        if (pos >= available.size()) throw ConfigError("random: reference picker returned an invalid position");
        return available[pos];
    });
}

Partition cluster_random(const FeatureMatrix& f, int k, Rng& rng) {
    check_size(f, k, "random");
    if (k == 1) return unicast_partition(static_cast<std::size_t>(f.rows()), Algorithm::Random);
    return cluster_random(f, k, [&](std::span<const int> available) {
        return static_cast<std::size_t>(rng.index(available.size()));
    });
}

Partition cluster_maxdist(const FeatureMatrix& f, int k) {
    check_size(f, k, "maxdist");
    if (k == 1) return unicast_partition(static_cast<std::size_t>(f.rows()), Algorithm::MaxDist);
    const auto dim = static_cast<std::size_t>(f.cols());
    Eigen::VectorXd g(f.cols());
    return greedy_fixed_size(f, k, Algorithm::MaxDist, [&](std::span<const int> available) {
        g = barycentre(f, available);
        int best = available.front();
        double best_d2 = -1.0;
        for (int j : available) {
            const double d2 = squared_distance(f.row(j).data(), g.data(), dim);
            if (d2 > best_d2) {
                best_d2 = d2;
                best = j;
            }
        }
        return best;
    });
}

// ---------------------------------------------------------------------------

std::vector<int> kmeanspp_seed_indices(const FeatureMatrix& f, std::size_t n_clusters, Rng& rng) {
    const auto n = static_cast<std::size_t>(f.rows());
    if (n_clusters < 1) throw ConfigError("kmeans++: need at least one cluster");
    if (n_clusters > n) {
        throw ConfigError("kmeans++: " + std::to_string(n_clusters) + " clusters requested for " +
                          std::to_string(n) + " users");
    }
    detail::KdTree tree(f.data(), n, static_cast<std::size_t>(f.cols()));
    tree.fill_weights(std::numeric_limits<double>::infinity());
    std::vector<char> chosen(n, 0);
    std::vector<int> seeds;
    seeds.reserve(n_clusters);

    const auto take = [&](int idx) {
        seeds.push_back(idx);
        chosen[idx] = 1;
        tree.relax(f.row(idx).data());
    };
    take(static_cast<int>(rng.index(n)));
    while (seeds.size() < n_clusters) {
        const double total = tree.total_weight();
        int idx = -1;
        if (total > 0.0) {
            idx = tree.sample(rng.uniform() * total);
        }
        if (idx < 0 || chosen[idx]) {
            // Every remaining user coincides with a chosen centroid: fall back to uniform.
            std::vector<int> rest;
            for (std::size_t i = 0; i < n; ++i) {
                if (!chosen[i]) rest.push_back(static_cast<int>(i));
            }
            idx = rest[rng.index(rest.size())];
        }
        take(idx);
    }
    return seeds;
}

Centroids kmeanspp_init(const FeatureMatrix& f, std::size_t n_clusters, Rng& rng) {
    const auto seeds = kmeanspp_seed_indices(f, n_clusters, rng);
    Centroids m(static_cast<Eigen::Index>(seeds.size()), f.cols());
    for (std::size_t c = 0; c < seeds.size(); ++c) m.row(static_cast<Eigen::Index>(c)) = f.row(seeds[c]);
    return m;
}

namespace {

double partition_sse(const FeatureMatrix& f, const Centroids& m, const std::vector<int>& label) {
    const auto dim = static_cast<std::size_t>(f.cols());
    double s = 0.0;
    for (Eigen::Index j = 0; j < f.rows(); ++j) {
        s += squared_distance(f.row(j).data(), m.row(label[static_cast<std::size_t>(j)]).data(), dim);
    }
    return s;
}

/// Moves, into every empty cluster, the user farthest from its own centroid.
///
/// The sequential rule reduces to one scan in decreasing distance: a move leaves every
/// other user's distance unchanged and counts only decrease.
void repair_empty(const FeatureMatrix& f, Centroids& m, std::vector<int>& label, std::vector<int>& count) {
    if (std::find(count.begin(), count.end(), 0) == count.end()) return;
    const auto dim = static_cast<std::size_t>(f.cols());
    std::vector<std::pair<double, int>> order;
    order.reserve(static_cast<std::size_t>(f.rows()));
    for (Eigen::Index j = 0; j < f.rows(); ++j) {
        const int own = label[static_cast<std::size_t>(j)];
        order.emplace_back(-squared_distance(f.row(j).data(), m.row(own).data(), dim), static_cast<int>(j));
    }
    std::sort(order.begin(), order.end());
    std::size_t next = 0;
    for (std::size_t c = 0; c < count.size(); ++c) {
        if (count[c] > 0) continue;
        while (next < order.size() && count[label[static_cast<std::size_t>(order[next].second)]] < 2) ++next;
        if (next == order.size()) throw NumericalError("kmeans++: cannot repair an empty cluster");
        const int far = order[next++].second;
        --count[label[far]];
        label[far] = static_cast<int>(c);
        count[c] = 1;
        m.row(static_cast<Eigen::Index>(c)) = f.row(far);
    }
}

} // namespace

Partition lloyd(const FeatureMatrix& f, Centroids m, const KMeansOptions& options) {
    const auto n = static_cast<std::size_t>(f.rows());
    const auto k = static_cast<std::size_t>(m.rows());
    const auto dim = static_cast<std::size_t>(f.cols());
    if (k < 1 || k > n) throw ConfigError("lloyd: need 1 <= clusters <= users");
    if (m.cols() != f.cols()) throw ConfigError("lloyd: centroid dimension mismatch");

    Partition p;
    p.algorithm = Algorithm::KMeansPP;
    p.n_users = n;
    p.converged = false;

    std::vector<int> label(n, -1);
    std::vector<int> count(k, 0);
    Centroids next(m.rows(), m.cols());

    for (int iter = 1; iter <= std::max(1, options.max_iter); ++iter) {
        // Assignment: a user only leaves its cluster for a strictly closer centroid.
        {
            detail::KdTree tree(m.data(), k, dim);
            std::fill(count.begin(), count.end(), 0);
            for (std::size_t j = 0; j < n; ++j) {
                const double* x = f.row(static_cast<Eigen::Index>(j)).data();
                if (label[j] < 0) {
                    label[j] = tree.nearest(x).first;
                } else {
                    const double own = squared_distance(x, m.row(label[j]).data(), dim);
                    const auto [c, d2] = tree.nearest(x, label[j], own);
                    if (d2 < own) label[j] = c;
                }
                ++count[label[j]];
            }
        }
        repair_empty(f, m, label, count);

        next.setZero();
        for (std::size_t j = 0; j < n; ++j) next.row(label[j]) += f.row(static_cast<Eigen::Index>(j));
        for (std::size_t c = 0; c < k; ++c) next.row(static_cast<Eigen::Index>(c)) /= count[c];

        double shift2 = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            shift2 = std::max(shift2, squared_distance(next.row(static_cast<Eigen::Index>(c)).data(),
                                                       m.row(static_cast<Eigen::Index>(c)).data(), dim));
        }
        m.swap(next);
        p.sse_history.push_back(partition_sse(f, m, label));
        p.iterations = iter;
        if (std::sqrt(shift2) < options.tol) {
            p.converged = true;
            break;
        }
    }

    p.clusters.assign(k, {});
    for (std::size_t j = 0; j < n; ++j) p.clusters[label[j]].push_back(static_cast<int>(j));
    return p;
}

Partition cluster_kmeanspp(const FeatureMatrix& f, std::size_t n_clusters, Rng& rng,
                           const KMeansOptions& options) {
    const auto n = static_cast<std::size_t>(f.rows());
    if (n_clusters < 1 || n_clusters > n) {
        throw ConfigError("kmeans++: " + std::to_string(n_clusters) + " clusters requested for " +
                          std::to_string(n) + " users");
    }
    if (n_clusters == n) return unicast_partition(n, Algorithm::KMeansPP);
    return lloyd(f, kmeanspp_init(f, n_clusters, rng), options);
}

} // namespace mbsat
