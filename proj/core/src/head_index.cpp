#include "mud/head_index.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

namespace mud {

namespace {

inline double sq_dist(const Point& a, const Point& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return dx * dx + dy * dy;
}

/// (squared distance, insertion order); the order component makes heap
/// contents unambiguous under distance ties.
struct Candidate {
    double d2;
    std::uint32_t order;
    bool operator<(const Candidate& o) const {
        return d2 != o.d2 ? d2 < o.d2 : order < o.order;
    }
};

}  // namespace

HeadIndex::HeadIndex(std::vector<Point> heads, IndexBackend backend)
    : points_(std::move(heads)), backend_(backend) {
    if (backend_ == IndexBackend::kKdTree && !points_.empty()) {
        nodes_.reserve(points_.size());
        std::vector<std::uint32_t> order(points_.size());
        std::iota(order.begin(), order.end(), 0u);
        root_ = build_kd(order, 0, static_cast<int>(order.size()), 0);
    }
}

int HeadIndex::build_kd(std::vector<std::uint32_t>& order, int begin, int end, int depth) {
    if (begin >= end) return -1;
    const int axis = depth % 2;
    const int mid = begin + (end - begin) / 2;
    std::nth_element(order.begin() + begin, order.begin() + mid, order.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                         const double va = axis == 0 ? points_[a].x : points_[a].y;
                         const double vb = axis == 0 ? points_[b].x : points_[b].y;
                         return va != vb ? va < vb : a < b;
                     });
    const int self = static_cast<int>(nodes_.size());
    nodes_.push_back(KdNode{points_[order[mid]], order[mid], axis, -1, -1});
    const int left = build_kd(order, begin, mid, depth + 1);
    const int right = build_kd(order, mid + 1, end, depth + 1);
    nodes_[self].left = left;
    nodes_[self].right = right;
    return self;
}

void HeadIndex::knn_brute(const Point& query, int k, std::vector<double>& out) const {
    std::priority_queue<Candidate> worst_first;
    for (std::uint32_t i = 0; i < points_.size(); ++i) {
        const Candidate c{sq_dist(points_[i], query), i};
        if (static_cast<int>(worst_first.size()) < k) {
            worst_first.push(c);
        } else if (c < worst_first.top()) {
            worst_first.pop();
            worst_first.push(c);
        }
    }
    out.resize(static_cast<std::size_t>(k));
    for (int i = k - 1; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = std::sqrt(worst_first.top().d2);
        worst_first.pop();
    }
}

void HeadIndex::knn_kd(const Point& query, int k, std::vector<double>& out) const {
    std::priority_queue<Candidate> worst_first;

    auto offer = [&](const KdNode& n) {
        const Candidate c{sq_dist(n.point, query), n.insert_order};
        if (static_cast<int>(worst_first.size()) < k) {
            worst_first.push(c);
        } else if (c < worst_first.top()) {
            worst_first.pop();
            worst_first.push(c);
        }
    };

    // Depth-first descent; the far side is visited only when the splitting
    // plane is not already farther than the current worst candidate. The
    // bound check is non-strict so exact ties are never pruned away.
    auto visit = [&](auto&& self, int ni) -> void {
        if (ni < 0) return;
        const KdNode& n = nodes_[static_cast<std::size_t>(ni)];
        offer(n);
        const double delta = n.axis == 0 ? query.x - n.point.x : query.y - n.point.y;
        const int near = delta < 0 ? n.left : n.right;
        const int far = delta < 0 ? n.right : n.left;
        self(self, near);
        if (far >= 0 &&
            (static_cast<int>(worst_first.size()) < k || delta * delta <= worst_first.top().d2)) {
            self(self, far);
        }
    };
    visit(visit, root_);

    out.resize(static_cast<std::size_t>(k));
    for (int i = k - 1; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = std::sqrt(worst_first.top().d2);
        worst_first.pop();
    }
}

std::vector<double> HeadIndex::knn_distances(const Point& query, int k) const {
    if (k <= 0) throw DataError("k must be positive");
    if (static_cast<std::size_t>(k) > points_.size()) {
        throw DataError("insufficient heads for k");
    }
    std::vector<double> out;
    if (backend_ == IndexBackend::kBruteForce) {
        knn_brute(query, k, out);
    } else {
        knn_kd(query, k, out);
    }
    return out;
}

double HeadIndex::mean_knn_distance(const Point& query, int k) const {
    const std::vector<double> d = knn_distances(query, k);
    double sum = 0.0;
    for (double v : d) sum += v;
    return sum / static_cast<double>(k);
}

}  // namespace mud
