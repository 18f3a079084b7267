#pragma once

#include <memory>
#include <vector>

#include "mud/annotations.hpp"

namespace mud {

enum class IndexBackend {
    kBruteForce,  ///< O(H) scan; reference answers for everything downstream.
    kKdTree,      ///< accelerated; must match brute force exactly.
};

/// Immutable k-nearest-neighbor index over head points. Duplicates are kept
/// (multiset semantics). Read-only queries are safe from many threads.
class HeadIndex {
public:
    explicit HeadIndex(std::vector<Point> heads, IndexBackend backend = IndexBackend::kKdTree);

    std::size_t size() const { return points_.size(); }
    IndexBackend backend() const { return backend_; }
    const std::vector<Point>& points() const { return points_; }

    /// The k smallest Euclidean distances from `query` to the indexed points,
    /// ascending. Throws DataError("insufficient heads for k") if k > size().
    std::vector<double> knn_distances(const Point& query, int k) const;

    /// Arithmetic mean of knn_distances(query, k).
    double mean_knn_distance(const Point& query, int k) const;

private:
    struct KdNode {
        Point point;
        std::uint32_t insert_order;
        int axis;       // 0 = x, 1 = y
        int left = -1;  // child indices into nodes_
        int right = -1;
    };

    int build_kd(std::vector<std::uint32_t>& order, int begin, int end, int depth);
    void knn_brute(const Point& query, int k, std::vector<double>& out) const;
    void knn_kd(const Point& query, int k, std::vector<double>& out) const;

    std::vector<Point> points_;
    IndexBackend backend_;
    std::vector<KdNode> nodes_;
    int root_ = -1;
};

inline HeadIndex build_index(std::vector<Point> heads,
                             IndexBackend backend = IndexBackend::kKdTree) {
    return HeadIndex(std::move(heads), backend);
}

}  // namespace mud
