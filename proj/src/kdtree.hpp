#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace mbsat::detail {

/// Static k-d tree over a row-major point buffer.
///
/// Besides exact nearest-neighbour search it carries one weight per point with
/// subtree max/sum, which is what k-means++ seeding needs: relax() lowers weights to
/// the squared distance to a new center, pruning subtrees whose box is already
/// farther than their largest weight, and sample() draws a point with probability
/// proportional to its weight.
class KdTree {
public:
    KdTree(const double* points, std::size_t n, std::size_t dim, std::size_t leaf_size = 8);

    /// Nearest point to q; ties go to the lowest index. Returns (index, squared distance).
    std::pair<int, double> nearest(const double* q) const;
    /// Same result as nearest(q) whenever it is at least as close as the `best` hint.
    std::pair<int, double> nearest(const double* q, int best, double best_d2) const;

    void fill_weights(double value);

    /// For every point with |x - q|^2 < w(x): w(x) = |x - q|^2.
    void relax(const double* q);

    double total_weight() const { return nodes_.empty() ? 0.0 : nodes_[0].sum_w; }
    double weight(int point) const { return weight_[point]; }

    /// Point whose cumulative weight interval (in tree order) contains r, 0 <= r < total.
    int sample(double r) const;

    std::size_t size() const { return n_; }

private:
    struct Node {
        int begin = 0, end = 0;
        int left = -1, right = -1;
        double max_w = 0.0;
        double sum_w = 0.0;
    };

    int build(int begin, int end);
    double box_distance2(int node, const double* q) const;
    void nearest_rec(int node, const double* q, int& best, double& best_d2) const;
    void relax_rec(int node, const double* q);
    void refresh_leaf(Node& node);
    const double* point(int i) const { return points_ + static_cast<std::size_t>(i) * dim_; }

    const double* points_;
    std::size_t n_, dim_, leaf_size_;
    std::vector<int> perm_;
    std::vector<Node> nodes_;
    std::vector<double> lo_, hi_;
    std::vector<double> weight_;
};

inline double squared_distance(const double* a, const double* b, std::size_t dim) {
    double s = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
        const double t = a[k] - b[k];
        s += t * t;
    }
    return s;
}

} // namespace mbsat::detail
