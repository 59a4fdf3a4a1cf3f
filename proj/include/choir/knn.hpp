#pragma once

#include "choir/types.hpp"

#include <vector>

namespace choir {

struct Neighbor
{
  Index index;
  double distance;
};

/// Exact k-d tree over a fixed point set. Results are ordered by ascending distance,
/// ties broken by lower point index.
class KdTree
{
public:
  explicit KdTree(Points points, int leafSize = 8);

  Index size() const { return points_.rows(); }
  Points const &points() const { return points_; }

  std::vector<Neighbor> knn(Vec3d const &query, Index k) const;
  Neighbor nearest(Vec3d const &query) const;
  /// All points with distance <= radius, ascending by index.
  std::vector<Index> radius(Vec3d const &query, double radius) const;

private:
  struct Node
  {
    Eigen::AlignedBox3d box;
    Index begin, end; // range into order_
    int left = -1, right = -1;
  };

  int build(Index begin, Index end, int depth);

  Points points_;
  std::vector<Index> order_;
  std::vector<Node> nodes_;
  int leafSize_;
};

std::vector<std::vector<Neighbor>> nearestNeighbors(Points const &queries, Points const &cloud, Index k);

} // namespace choir
