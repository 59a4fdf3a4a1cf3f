#include "choir/knn.hpp"
#include "choir/error.hpp"

#include <algorithm>
#include <numeric>

namespace choir {

namespace {

struct Candidate
{
  double dist2;
  Index index;
  bool operator<(Candidate const &o) const { return dist2 < o.dist2 || (dist2 == o.dist2 && index < o.index); }
};

double boxDistance2(Eigen::AlignedBox3d const &box, Vec3d const &q)
{
  Vec3d const d = (box.min() - q).cwiseMax(q - box.max()).cwiseMax(0.0);
  return d.squaredNorm();
}

} // namespace

KdTree::KdTree(Points points, int leafSize)
  : points_(std::move(points))
  , order_(points_.rows())
  , leafSize_(std::max(1, leafSize))
{
  std::iota(order_.begin(), order_.end(), Index{0});
  if (points_.rows() > 0) {
    nodes_.reserve(2 * points_.rows() / leafSize_ + 2);
    build(0, points_.rows(), 0);
  }
}

int KdTree::build(Index begin, Index end, int depth)
{
  int const id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{Eigen::AlignedBox3d(), begin, end});
  Eigen::AlignedBox3d box;
  for (Index i = begin; i < end; ++i) { box.extend(points_.row(order_[i]).transpose()); }
  nodes_[id].box = box;
  if (end - begin <= leafSize_) { return id; }
  int axis;
  box.sizes().maxCoeff(&axis);
  Index const mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](Index a, Index b) { return points_(a, axis) < points_(b, axis); });
  int const l = build(begin, mid, depth + 1);
  int const r = build(mid, end, depth + 1);
  nodes_[id].left = l;
  nodes_[id].right = r;
  return id;
}

std::vector<Neighbor> KdTree::knn(Vec3d const &query, Index k) const
{
  if (k > size()) { fail(ErrorCode::InvalidArgument, "k exceeds cloud size"); }
  if (k <= 0) { return {}; }
  // Sorted best list; worst at back.
  std::vector<Candidate> best;
  best.reserve(k + 1);
  auto offer = [&](Candidate c) {
    if (static_cast<Index>(best.size()) == k && !(c < best.back())) { return; }
    best.insert(std::upper_bound(best.begin(), best.end(), c), c);
    if (static_cast<Index>(best.size()) > k) { best.pop_back(); }
  };
  std::vector<int> stack{0};
  while (!stack.empty()) {
    Node const &node = nodes_[stack.back()];
    stack.pop_back();
    double const bd = boxDistance2(node.box, query);
    // Equal distances may still win on index, so only prune strictly farther boxes.
    if (static_cast<Index>(best.size()) == k && bd > best.back().dist2) { continue; }
    if (node.left < 0) {
      for (Index i = node.begin; i < node.end; ++i) {
        Index const p = order_[i];
        offer({(points_.row(p).transpose() - query).squaredNorm(), p});
      }
      continue;
    }
    double const dl = boxDistance2(nodes_[node.left].box, query);
    double const dr = boxDistance2(nodes_[node.right].box, query);
    if (dl <= dr) {
      stack.push_back(node.right);
      stack.push_back(node.left);
    } else {
      stack.push_back(node.left);
      stack.push_back(node.right);
    }
  }
  std::vector<Neighbor> out;
  out.reserve(best.size());
  for (auto const &c : best) { out.push_back({c.index, std::sqrt(c.dist2)}); }
  return out;
}

Neighbor KdTree::nearest(Vec3d const &query) const { return knn(query, 1).front(); }

std::vector<Index> KdTree::radius(Vec3d const &query, double radius) const
{
  std::vector<Index> out;
  if (points_.rows() == 0) { return out; }
  double const r2 = radius * radius;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    Node const &node = nodes_[stack.back()];
    stack.pop_back();
    if (boxDistance2(node.box, query) > r2 * (1.0 + 1e-9) + 1e-300) { continue; }
    if (node.left < 0) {
      for (Index i = node.begin; i < node.end; ++i) {
        Index const p = order_[i];
        if ((points_.row(p).transpose() - query).norm() <= radius) { out.push_back(p); }
      }
      continue;
    }
    stack.push_back(node.left);
    stack.push_back(node.right);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::vector<Neighbor>> nearestNeighbors(Points const &queries, Points const &cloud, Index k)
{
  if (k > cloud.rows()) { fail(ErrorCode::InvalidArgument, "k exceeds cloud size"); }
  KdTree tree(cloud);
  std::vector<std::vector<Neighbor>> out;
  out.reserve(queries.rows());
  for (Index q = 0; q < queries.rows(); ++q) { out.push_back(tree.knn(queries.row(q).transpose(), k)); }
  return out;
}

} // namespace choir
