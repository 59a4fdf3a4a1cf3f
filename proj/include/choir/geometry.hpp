#pragma once

#include "choir/types.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace choir {

struct PointCloud
{
  Points points;
  Points normals; // empty, or one unit normal per point

  PointCloud() = default;
  explicit PointCloud(Points p, Points n = Points())
    : points(std::move(p))
    , normals(std::move(n))
  {
  }

  Index size() const { return points.rows(); }
  bool hasNormals() const { return normals.rows() == points.rows() && points.rows() > 0; }
  Vec3d point(Index i) const { return points.row(i).transpose(); }
  Vec3d normal(Index i) const { return normals.row(i).transpose(); }

  // Throws InvalidArgument on an empty cloud or non-unit normals.
  void validate() const;
};

struct TriangleMesh
{
  Points vertices;
  Faces faces;

  Index numVertices() const { return vertices.rows(); }
  Index numFaces() const { return faces.rows(); }
  Vec3d vertex(Index i) const { return vertices.row(i).transpose(); }

  // Face indices in range and no repeated index within a face.
  void validate() const;
};

/// Regular axis-aligned grid of basis points centred at the origin.
/// Row-major ordering: x varies fastest, then y, then z.
struct BasisPointSet
{
  Points points;
  int resolution = 0;
  double extent = 0.0; // half-width, meters

  Index size() const { return points.rows(); }
  double spacing() const { return 2.0 * extent / (resolution - 1); }
};

/// Maps world coordinates into the grid frame: x_grid = scale * (x + translation).
struct FrameTransform
{
  double scale = 1.0;
  Vec3d translation = Vec3d::Zero();

  template <typename Derived> auto apply(Eigen::MatrixBase<Derived> const &x) const
  {
    return (scale * (x + translation.cast<typename Derived::Scalar>())).eval();
  }
  template <typename Derived> auto invert(Eigen::MatrixBase<Derived> const &y) const
  {
    return (y / scale - translation.cast<typename Derived::Scalar>()).eval();
  }
  Points applyRows(Points const &p) const;
  Points invertRows(Points const &p) const;
  FrameTransform compose(FrameTransform const &inner) const; // this ∘ inner
  FrameTransform inverse() const { return {1.0 / scale, -scale * translation}; }
};

BasisPointSet buildBpsGrid(int resolution, double extent);

/// Centres the cloud on its centroid and scales it uniformly so that every point lies within
/// `grid.extent` of the origin. Objects that already fit are not rescaled.
std::pair<PointCloud, FrameTransform> normalizeToGrid(PointCloud const &object, BasisPointSet const &grid);

/// Area-weighted average of incident face normals. Throws IsolatedVertex naming the offenders.
Points vertexNormals(TriangleMesh const &mesh);
Points faceNormals(TriangleMesh const &mesh);
Eigen::VectorXd faceAreas(TriangleMesh const &mesh);

/// Area-proportional surface sampling with face normals; deterministic for a given seed.
PointCloud sampleSurfacePoints(TriangleMesh const &mesh, Index n, std::uint64_t seed);

/// One midpoint-subdivision pass (every triangle split in four).
TriangleMesh subdivideMidpoint(TriangleMesh const &mesh);

/// Connected components by shared vertices; returns a component id per face.
std::vector<int> faceComponents(TriangleMesh const &mesh, int *count = nullptr);

TriangleMesh mergeMeshes(TriangleMesh const &a, TriangleMesh const &b);

} // namespace choir
