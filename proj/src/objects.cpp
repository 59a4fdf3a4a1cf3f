#include "choir/objects.hpp"
#include "choir/error.hpp"

#include <map>

namespace choir {

std::string toString(ShapeKind kind)
{
  switch (kind) {
  case ShapeKind::Sphere: return "sphere";
  case ShapeKind::Box: return "box";
  case ShapeKind::Cylinder: return "cylinder";
  case ShapeKind::Torus: return "torus";
  }
  return "?";
}

ShapeKind shapeKindFromString(std::string const &name)
{
  for (ShapeKind k : {ShapeKind::Sphere, ShapeKind::Box, ShapeKind::Cylinder, ShapeKind::Torus}) {
    if (toString(k) == name) { return k; }
  }
  fail(ErrorCode::InvalidArgument, "unknown shape kind '" + name + "'");
}

namespace {

struct MeshBuilder
{
  std::vector<Vec3d> v;
  std::vector<std::array<int, 3>> f;

  int add(Vec3d const &p)
  {
    v.push_back(p);
    return static_cast<int>(v.size()) - 1;
  }
  void quad(int a, int b, int c, int d)
  {
    f.push_back({a, b, c});
    f.push_back({a, c, d});
  }
  TriangleMesh build() const
  {
    TriangleMesh m;
    m.vertices.resize(static_cast<Index>(v.size()), 3);
    m.faces.resize(static_cast<Index>(f.size()), 3);
    for (size_t i = 0; i < v.size(); ++i) { m.vertices.row(static_cast<Index>(i)) = v[i].transpose(); }
    for (size_t i = 0; i < f.size(); ++i) {
      m.faces.row(static_cast<Index>(i)) << f[i][0], f[i][1], f[i][2];
    }
    return m;
  }
};

TriangleMesh icosphere(double radius, int subdivisions)
{
  double const t = (1.0 + std::sqrt(5.0)) / 2.0;
  MeshBuilder b;
  for (Vec3d const &p : {Vec3d(-1, t, 0), Vec3d(1, t, 0), Vec3d(-1, -t, 0), Vec3d(1, -t, 0), Vec3d(0, -1, t),
                         Vec3d(0, 1, t), Vec3d(0, -1, -t), Vec3d(0, 1, -t), Vec3d(t, 0, -1), Vec3d(t, 0, 1),
                         Vec3d(-t, 0, -1), Vec3d(-t, 0, 1)}) {
    b.add(p.normalized());
  }
  b.f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
         {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
         {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  TriangleMesh m = b.build();
  for (int s = 0; s < subdivisions; ++s) {
    m = weldVertices(subdivideMidpoint(m));
    m.vertices.rowwise().normalize();
  }
  m.vertices *= radius;
  return m;
}

// Each face of the box is an n x n lattice; shared edges are welded afterwards.
TriangleMesh boxMesh(Vec3d const &h, int n)
{
  MeshBuilder b;
  for (int axis = 0; axis < 3; ++axis) {
    int const u = (axis + 1) % 3, w = (axis + 2) % 3;
    for (double sign : {1.0, -1.0}) {
      std::vector<int> ids((n + 1) * (n + 1));
      for (int i = 0; i <= n; ++i) {
        for (int j = 0; j <= n; ++j) {
          Vec3d p;
          p(axis) = sign * h(axis);
          p(u) = h(u) * (2.0 * i / n - 1.0);
          p(w) = h(w) * (2.0 * j / n - 1.0);
          ids[i * (n + 1) + j] = b.add(p);
        }
      }
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          int const a = ids[i * (n + 1) + j], c = ids[(i + 1) * (n + 1) + j + 1];
          int const ab = ids[(i + 1) * (n + 1) + j], ad = ids[i * (n + 1) + j + 1];
          // (u, w, axis) is right-handed, so (u then w) winds outward on the + face.
          if (sign > 0) {
            b.quad(a, ab, c, ad);
          } else {
            b.quad(a, ad, c, ab);
          }
        }
      }
    }
  }
  return weldVertices(b.build());
}

TriangleMesh cylinderMesh(double r, double hh, int segments, int rings)
{
  MeshBuilder b;
  std::vector<std::vector<int>> ring(rings + 1, std::vector<int>(segments));
  for (int i = 0; i <= rings; ++i) {
    double const z = -hh + 2.0 * hh * i / rings;
    for (int k = 0; k < segments; ++k) {
      double const a = 2.0 * M_PI * k / segments;
      ring[i][k] = b.add(Vec3d(r * std::cos(a), r * std::sin(a), z));
    }
  }
  for (int i = 0; i < rings; ++i) {
    for (int k = 0; k < segments; ++k) {
      int const k1 = (k + 1) % segments;
      b.quad(ring[i][k], ring[i][k1], ring[i + 1][k1], ring[i + 1][k]);
    }
  }
  int const bottom = b.add(Vec3d(0, 0, -hh)), top = b.add(Vec3d(0, 0, hh));
  for (int k = 0; k < segments; ++k) {
    int const k1 = (k + 1) % segments;
    b.f.push_back({bottom, ring[0][k1], ring[0][k]});
    b.f.push_back({top, ring[rings][k], ring[rings][k1]});
  }
  return b.build();
}

TriangleMesh torusMesh(double R, double r, double arc, int arcSegments, int tubeSegments)
{
  MeshBuilder b;
  std::vector<std::vector<int>> ring(arcSegments + 1, std::vector<int>(tubeSegments));
  for (int i = 0; i <= arcSegments; ++i) {
    double const phi = -arc / 2.0 + arc * i / arcSegments;
    Vec3d const radial(std::cos(phi), std::sin(phi), 0.0);
    for (int k = 0; k < tubeSegments; ++k) {
      double const a = 2.0 * M_PI * k / tubeSegments;
      ring[i][k] = b.add(radial * (R + r * std::cos(a)) + Vec3d(0, 0, r * std::sin(a)));
    }
  }
  for (int i = 0; i < arcSegments; ++i) {
    for (int k = 0; k < tubeSegments; ++k) {
      int const k1 = (k + 1) % tubeSegments;
      b.quad(ring[i][k], ring[i + 1][k], ring[i + 1][k1], ring[i][k1]);
    }
  }
  for (int end : {0, arcSegments}) {
    double const phi = -arc / 2.0 + arc * end / arcSegments;
    int const c = b.add(Vec3d(std::cos(phi), std::sin(phi), 0.0) * R);
    for (int k = 0; k < tubeSegments; ++k) {
      int const k1 = (k + 1) % tubeSegments;
      if (end == 0) {
        b.f.push_back({c, ring[end][k], ring[end][k1]});
      } else {
        b.f.push_back({c, ring[end][k1], ring[end][k]});
      }
    }
  }
  return b.build();
}

} // namespace

TriangleMesh weldVertices(TriangleMesh const &mesh)
{
  std::map<std::array<double, 3>, int> index;
  std::vector<int> remap(mesh.numVertices());
  std::vector<Vec3d> kept;
  for (Index i = 0; i < mesh.numVertices(); ++i) {
    std::array<double, 3> const key{mesh.vertices(i, 0), mesh.vertices(i, 1), mesh.vertices(i, 2)};
    auto [it, inserted] = index.try_emplace(key, static_cast<int>(kept.size()));
    if (inserted) { kept.push_back(mesh.vertex(i)); }
    remap[i] = it->second;
  }
  TriangleMesh out;
  out.vertices.resize(static_cast<Index>(kept.size()), 3);
  for (size_t i = 0; i < kept.size(); ++i) { out.vertices.row(static_cast<Index>(i)) = kept[i].transpose(); }
  out.faces = mesh.faces;
  for (Index f = 0; f < out.faces.rows(); ++f) {
    for (int c = 0; c < 3; ++c) { out.faces(f, c) = remap[mesh.faces(f, c)]; }
  }
  return out;
}

TriangleMesh shapeMesh(ShapeSpec const &spec)
{
  Vec3d const &d = spec.dims;
  switch (spec.kind) {
  case ShapeKind::Sphere: return icosphere(d(0), 3);
  case ShapeKind::Box: return boxMesh(d, 8);
  case ShapeKind::Cylinder: return cylinderMesh(d(0), d(1), 48, 12);
  case ShapeKind::Torus: return torusMesh(d(0), d(1), d(2), 48, 24);
  }
  fail(ErrorCode::InvalidArgument, "unknown shape kind");
}

double signedDistance(ShapeSpec const &spec, Vec3d const &x)
{
  Vec3d const &d = spec.dims;
  switch (spec.kind) {
  case ShapeKind::Sphere: return x.norm() - d(0);
  case ShapeKind::Box: {
    Vec3d const q = x.cwiseAbs() - d;
    return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
  }
  case ShapeKind::Cylinder: {
    Eigen::Vector2d const q(std::hypot(x.x(), x.y()) - d(0), std::abs(x.z()) - d(1));
    return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
  }
  case ShapeKind::Torus: {
    double const R = d(0), r = d(1), half = d(2) / 2.0;
    double capDist = std::numeric_limits<double>::infinity();
    for (double s : {-1.0, 1.0}) {
      Vec3d const radial(std::cos(s * half), std::sin(s * half), 0.0);
      Vec3d const tangent(-std::sin(s * half), std::cos(s * half), 0.0);
      double const inPlane = std::max(0.0, std::hypot(x.dot(radial) - R, x.z()) - r);
      capDist = std::min(capDist, std::hypot(inPlane, x.dot(tangent)));
    }
    if (std::abs(std::atan2(x.y(), x.x())) > half) { return capDist; }
    double const tube = std::hypot(std::hypot(x.x(), x.y()) - R, x.z()) - r;
    return tube > 0.0 ? tube : -std::min(-tube, capDist);
  }
  }
  fail(ErrorCode::InvalidArgument, "unknown shape kind");
}

ShapeSpec randomShape(ShapeKind kind, std::mt19937_64 &rng)
{
  auto u = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  ShapeSpec s;
  s.kind = kind;
  switch (kind) {
  case ShapeKind::Sphere: s.dims = Vec3d(u(0.030, 0.050), 0, 0); break;
  case ShapeKind::Box: s.dims = Vec3d(u(0.025, 0.045), u(0.025, 0.045), u(0.025, 0.045)); break;
  case ShapeKind::Cylinder: s.dims = Vec3d(u(0.025, 0.040), u(0.045, 0.080), 0); break;
  case ShapeKind::Torus: s.dims = Vec3d(u(0.045, 0.065), u(0.012, 0.020), u(M_PI, 1.6 * M_PI)); break;
  }
  return s;
}

} // namespace choir
