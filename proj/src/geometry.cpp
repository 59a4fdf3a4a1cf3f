#include "choir/geometry.hpp"
#include "choir/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace choir {

void PointCloud::validate() const
{
  if (points.rows() == 0) { fail(ErrorCode::InvalidArgument, "point cloud is empty"); }
  if (normals.rows() != 0) {
    if (normals.rows() != points.rows()) { fail(ErrorCode::InvalidArgument, "normal count does not match point count"); }
    for (Index i = 0; i < normals.rows(); ++i) {
      if (std::abs(normals.row(i).norm() - 1.0) > 1e-6) {
        fail(ErrorCode::InvalidArgument, "normal " + std::to_string(i) + " is not unit length");
      }
    }
  }
}

void TriangleMesh::validate() const
{
  for (Index f = 0; f < faces.rows(); ++f) {
    for (int c = 0; c < 3; ++c) {
      if (faces(f, c) < 0 || faces(f, c) >= vertices.rows()) {
        fail(ErrorCode::InvalidArgument, "face " + std::to_string(f) + " references missing vertex");
      }
    }
    if (faces(f, 0) == faces(f, 1) || faces(f, 1) == faces(f, 2) || faces(f, 0) == faces(f, 2)) {
      fail(ErrorCode::InvalidArgument, "face " + std::to_string(f) + " is degenerate");
    }
  }
}

Points FrameTransform::applyRows(Points const &p) const
{
  Points out = p;
  out.rowwise() += translation.transpose();
  out *= scale;
  return out;
}

Points FrameTransform::invertRows(Points const &p) const
{
  Points out = p / scale;
  out.rowwise() -= translation.transpose();
  return out;
}

FrameTransform FrameTransform::compose(FrameTransform const &inner) const
{
  // s2 * (s1 * (x + t1) + t2) = s2 s1 (x + t1 + t2 / s1)
  FrameTransform out;
  out.scale = scale * inner.scale;
  out.translation = inner.translation + translation / inner.scale;
  return out;
}

BasisPointSet buildBpsGrid(int resolution, double extent)
{
  if (resolution < 2) { fail(ErrorCode::InvalidArgument, "grid resolution must be >= 2"); }
  if (!(extent > 0.0)) { fail(ErrorCode::InvalidArgument, "grid extent must be positive"); }
  BasisPointSet grid;
  grid.resolution = resolution;
  grid.extent = extent;
  Index const r = resolution;
  grid.points.resize(r * r * r, 3);
  double const step = grid.spacing();
  for (Index z = 0; z < r; ++z) {
    for (Index y = 0; y < r; ++y) {
      for (Index x = 0; x < r; ++x) {
        Index const j = x + r * (y + r * z);
        grid.points(j, 0) = -extent + step * x;
        grid.points(j, 1) = -extent + step * y;
        grid.points(j, 2) = -extent + step * z;
      }
    }
  }
  return grid;
}

std::pair<PointCloud, FrameTransform> normalizeToGrid(PointCloud const &object, BasisPointSet const &grid)
{
  if (object.size() == 0) { fail(ErrorCode::InvalidArgument, "cannot normalize an empty cloud"); }
  FrameTransform tf;
  Vec3d const centroid = object.points.colwise().mean().transpose();
  tf.translation = -centroid;
  double maxRadius = 0.0;
  for (Index i = 0; i < object.size(); ++i) {
    maxRadius = std::max(maxRadius, (object.point(i) - centroid).norm());
  }
  // Zero spatial extent leaves the scale undefined; keep it at 1.
  if (maxRadius > grid.extent) { tf.scale = grid.extent / maxRadius; }
  PointCloud out(tf.applyRows(object.points), object.normals);
  return {out, tf};
}

Points faceNormals(TriangleMesh const &mesh)
{
  Points n(mesh.numFaces(), 3);
  for (Index f = 0; f < mesh.numFaces(); ++f) {
    Vec3d const a = mesh.vertex(mesh.faces(f, 0));
    Vec3d const b = mesh.vertex(mesh.faces(f, 1));
    Vec3d const c = mesh.vertex(mesh.faces(f, 2));
    n.row(f) = (b - a).cross(c - a).normalized().transpose();
  }
  return n;
}

Eigen::VectorXd faceAreas(TriangleMesh const &mesh)
{
  Eigen::VectorXd a(mesh.numFaces());
  for (Index f = 0; f < mesh.numFaces(); ++f) {
    Vec3d const p = mesh.vertex(mesh.faces(f, 0));
    a(f) = 0.5 * (mesh.vertex(mesh.faces(f, 1)) - p).cross(mesh.vertex(mesh.faces(f, 2)) - p).norm();
  }
  return a;
}

Points vertexNormals(TriangleMesh const &mesh)
{
  Points acc = Points::Zero(mesh.numVertices(), 3);
  std::vector<bool> used(mesh.numVertices(), false);
  for (Index f = 0; f < mesh.numFaces(); ++f) {
    Vec3d const a = mesh.vertex(mesh.faces(f, 0));
    Vec3d const b = mesh.vertex(mesh.faces(f, 1));
    Vec3d const c = mesh.vertex(mesh.faces(f, 2));
    // |cross| is twice the area, so summing raw cross products weights by area.
    Vec3d const n = (b - a).cross(c - a);
    for (int k = 0; k < 3; ++k) {
      acc.row(mesh.faces(f, k)) += n.transpose();
      used[mesh.faces(f, k)] = true;
    }
  }
  std::vector<Index> isolated;
  for (Index i = 0; i < mesh.numVertices(); ++i) {
    if (!used[i]) { isolated.push_back(i); }
  }
  if (!isolated.empty()) {
    std::ostringstream msg;
    msg << "isolated vertices:";
    for (auto i : isolated) { msg << ' ' << i; }
    fail(ErrorCode::IsolatedVertex, msg.str());
  }
  acc.rowwise().normalize();
  return acc;
}

PointCloud sampleSurfacePoints(TriangleMesh const &mesh, Index n, std::uint64_t seed)
{
  if (mesh.numFaces() == 0) { fail(ErrorCode::InvalidArgument, "cannot sample an empty mesh"); }
  Eigen::VectorXd const areas = faceAreas(mesh);
  Points const fn = faceNormals(mesh);
  std::mt19937_64 rng(seed);
  std::discrete_distribution<Index> pick(areas.data(), areas.data() + areas.size());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  PointCloud out;
  out.points.resize(n, 3);
  out.normals.resize(n, 3);
  for (Index i = 0; i < n; ++i) {
    Index const f = pick(rng);
    double const r1 = std::sqrt(unit(rng));
    double const r2 = unit(rng);
    Vec3d const a = mesh.vertex(mesh.faces(f, 0));
    Vec3d const b = mesh.vertex(mesh.faces(f, 1));
    Vec3d const c = mesh.vertex(mesh.faces(f, 2));
    out.points.row(i) = ((1.0 - r1) * a + r1 * (1.0 - r2) * b + r1 * r2 * c).transpose();
    out.normals.row(i) = fn.row(f);
  }
  return out;
}

TriangleMesh subdivideMidpoint(TriangleMesh const &mesh)
{
  std::map<std::pair<int, int>, int> midpoint;
  std::vector<Vec3d> verts;
  verts.reserve(mesh.numVertices() * 4);
  for (Index i = 0; i < mesh.numVertices(); ++i) { verts.push_back(mesh.vertex(i)); }
  auto mid = [&](int a, int b) {
    auto key = std::minmax(a, b);
    auto [it, inserted] = midpoint.try_emplace({key.first, key.second}, static_cast<int>(verts.size()));
    if (inserted) { verts.push_back(0.5 * (mesh.vertex(a) + mesh.vertex(b))); }
    return it->second;
  };
  TriangleMesh out;
  out.faces.resize(mesh.numFaces() * 4, 3);
  for (Index f = 0; f < mesh.numFaces(); ++f) {
    int const a = mesh.faces(f, 0), b = mesh.faces(f, 1), c = mesh.faces(f, 2);
    int const ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
    out.faces.row(4 * f + 0) << a, ab, ca;
    out.faces.row(4 * f + 1) << ab, b, bc;
    out.faces.row(4 * f + 2) << ca, bc, c;
    out.faces.row(4 * f + 3) << ab, bc, ca;
  }
  out.vertices.resize(static_cast<Index>(verts.size()), 3);
  for (size_t i = 0; i < verts.size(); ++i) { out.vertices.row(static_cast<Index>(i)) = verts[i].transpose(); }
  return out;
}

std::vector<int> faceComponents(TriangleMesh const &mesh, int *count)
{
  std::vector<int> parent(mesh.numVertices());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) { x = parent[x] = parent[parent[x]]; }
    return x;
  };
  for (Index f = 0; f < mesh.numFaces(); ++f) {
    int const r = find(mesh.faces(f, 0));
    parent[find(mesh.faces(f, 1))] = r;
    parent[find(mesh.faces(f, 2))] = r;
  }
  std::map<int, int> ids;
  std::vector<int> comp(mesh.numFaces());
  for (Index f = 0; f < mesh.numFaces(); ++f) {
    auto [it, _] = ids.try_emplace(find(mesh.faces(f, 0)), static_cast<int>(ids.size()));
    comp[f] = it->second;
  }
  if (count) { *count = static_cast<int>(ids.size()); }
  return comp;
}

TriangleMesh mergeMeshes(TriangleMesh const &a, TriangleMesh const &b)
{
  TriangleMesh out;
  out.vertices.resize(a.numVertices() + b.numVertices(), 3);
  out.vertices.topRows(a.numVertices()) = a.vertices;
  out.vertices.bottomRows(b.numVertices()) = b.vertices;
  out.faces.resize(a.numFaces() + b.numFaces(), 3);
  out.faces.topRows(a.numFaces()) = a.faces;
  out.faces.bottomRows(b.numFaces()) = b.faces.array() + static_cast<int>(a.numVertices());
  return out;
}

} // namespace choir
