#include "kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace mbsat::detail {

KdTree::KdTree(const double* points, std::size_t n, std::size_t dim, std::size_t leaf_size)
    : points_(points), n_(n), dim_(dim), leaf_size_(std::max<std::size_t>(1, leaf_size)), perm_(n),
      weight_(n, 0.0) {
    std::iota(perm_.begin(), perm_.end(), 0);
    if (n_ > 0) {
        nodes_.reserve(2 * n_ / leaf_size_ + 2);
        build(0, static_cast<int>(n_));
    }
}

int KdTree::build(int begin, int end) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{begin, end});
    lo_.resize(lo_.size() + dim_);
    hi_.resize(hi_.size() + dim_);
    double* lo = &lo_[static_cast<std::size_t>(id) * dim_];
    double* hi = &hi_[static_cast<std::size_t>(id) * dim_];
    std::fill(lo, lo + dim_, std::numeric_limits<double>::infinity());
    std::fill(hi, hi + dim_, -std::numeric_limits<double>::infinity());
    for (int i = begin; i < end; ++i) {
        const double* p = point(perm_[i]);
        for (std::size_t k = 0; k < dim_; ++k) {
            lo[k] = std::min(lo[k], p[k]);
            hi[k] = std::max(hi[k], p[k]);
        }
    }
    if (static_cast<std::size_t>(end - begin) <= leaf_size_) return id;

    std::size_t axis = 0;
    double spread = -1.0;
    for (std::size_t k = 0; k < dim_; ++k) {
        if (hi[k] - lo[k] > spread) {
            spread = hi[k] - lo[k];
            axis = k;
        }
    }
    if (spread <= 0.0) return id; // all points coincide

    const int mid = begin + (end - begin) / 2;
    std::nth_element(perm_.begin() + begin, perm_.begin() + mid, perm_.begin() + end, [&](int a, int b) {
        const double pa = point(a)[axis], pb = point(b)[axis];
        return pa < pb || (pa == pb && a < b);
    });
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

double KdTree::box_distance2(int node, const double* q) const {
    const double* lo = &lo_[static_cast<std::size_t>(node) * dim_];
    const double* hi = &hi_[static_cast<std::size_t>(node) * dim_];
    double s = 0.0;
    for (std::size_t k = 0; k < dim_; ++k) {
        double t = 0.0;
        if (q[k] < lo[k]) t = lo[k] - q[k];
        else if (q[k] > hi[k]) t = q[k] - hi[k];
        s += t * t;
    }
    return s;
}

std::pair<int, double> KdTree::nearest(const double* q) const {
    int best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    if (!nodes_.empty()) nearest_rec(0, q, best, best_d2);
    return {best, best_d2};
}

std::pair<int, double> KdTree::nearest(const double* q, int best, double best_d2) const {
    if (!nodes_.empty()) nearest_rec(0, q, best, best_d2);
    return {best, best_d2};
}

void KdTree::nearest_rec(int id, const double* q, int& best, double& best_d2) const {
    const Node& node = nodes_[id];
    if (node.left < 0) {
        for (int i = node.begin; i < node.end; ++i) {
            const int idx = perm_[i];
            const double d2 = squared_distance(point(idx), q, dim_);
            if (d2 < best_d2 || (d2 == best_d2 && idx < best)) {
                best_d2 = d2;
                best = idx;
            }
        }
        return;
    }
    const double dl = box_distance2(node.left, q);
    const double dr = box_distance2(node.right, q);
    const int first = dl <= dr ? node.left : node.right;
    const int second = dl <= dr ? node.right : node.left;
    const double d_first = std::min(dl, dr), d_second = std::max(dl, dr);
    // Equal distances are not pruned so that lower-index ties are still found.
    if (d_first <= best_d2) nearest_rec(first, q, best, best_d2);
    if (d_second <= best_d2) nearest_rec(second, q, best, best_d2);
}

void KdTree::fill_weights(double value) {
    std::fill(weight_.begin(), weight_.end(), value);
    // Refresh bottom-up: children always have larger ids than their parent.
    for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
        Node& node = nodes_[id];
        if (node.left < 0) {
            refresh_leaf(node);
        } else {
            node.max_w = std::max(nodes_[node.left].max_w, nodes_[node.right].max_w);
            node.sum_w = nodes_[node.left].sum_w + nodes_[node.right].sum_w;
        }
    }
}

void KdTree::refresh_leaf(Node& node) {
    double mx = 0.0, sum = 0.0;
    for (int i = node.begin; i < node.end; ++i) {
        const double w = weight_[perm_[i]];
        mx = std::max(mx, w);
        sum += w;
    }
    node.max_w = mx;
    node.sum_w = sum;
}

void KdTree::relax(const double* q) {
    if (!nodes_.empty()) relax_rec(0, q);
}

void KdTree::relax_rec(int id, const double* q) {
    Node& node = nodes_[id];
    if (box_distance2(id, q) >= node.max_w) return;
    if (node.left < 0) {
        bool changed = false;
        for (int i = node.begin; i < node.end; ++i) {
            const int idx = perm_[i];
            const double d2 = squared_distance(point(idx), q, dim_);
            if (d2 < weight_[idx]) {
                weight_[idx] = d2;
                changed = true;
            }
        }
        if (changed) refresh_leaf(node);
        return;
    }
    relax_rec(node.left, q);
    relax_rec(node.right, q);
    Node& n = nodes_[id];
    n.max_w = std::max(nodes_[n.left].max_w, nodes_[n.right].max_w);
    n.sum_w = nodes_[n.left].sum_w + nodes_[n.right].sum_w;
}

int KdTree::sample(double r) const {
    int id = 0;
    while (nodes_[id].left >= 0) {
        const Node& node = nodes_[id];
        const double left_sum = nodes_[node.left].sum_w;
        if (nodes_[node.right].sum_w <= 0.0 || (r < left_sum && left_sum > 0.0)) {
            id = node.left;
        } else {
            r -= left_sum;
            id = node.right;
        }
    }
    const Node& leaf = nodes_[id];
    int last_positive = -1;
    for (int i = leaf.begin; i < leaf.end; ++i) {
        const int idx = perm_[i];
        const double w = weight_[idx];
        if (w <= 0.0) continue;
        if (r < w) return idx;
        r -= w;
        last_positive = idx;
    }
    return last_positive;
}

} // namespace mbsat::detail
