#include "choir/error.hpp"
#include "choir/geometry.hpp"
#include "choir/knn.hpp"
#include "choir/mesh_io.hpp"
#include "choir/objects.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace choir;

namespace {

Points randomPoints(std::mt19937_64 &rng, Index n, double scale = 1.0)
{
  std::uniform_real_distribution<double> u(-scale, scale);
  Points p(n, 3);
  for (Index i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) { p(i, c) = u(rng); }
  }
  return p;
}

TriangleMesh unitCube()
{
  TriangleMesh m = shapeMesh({ShapeKind::Box, Vec3d(0.5, 0.5, 0.5)});
  return m;
}

} // namespace

TEST_CASE("bps grid: corners, default size and row-major order")
{
  BasisPointSet const g2 = buildBpsGrid(2, 1.0);
  REQUIRE(g2.size() == 8);
  for (Index j = 0; j < 8; ++j) { CHECK(g2.points.row(j).cwiseAbs().isApprox(Eigen::RowVector3d::Ones())); }
  CHECK(g2.points.row(1) == Eigen::RowVector3d(1, -1, -1));

  BasisPointSet const g16 = buildBpsGrid(16, 0.2);
  CHECK(g16.size() == 4096);
  CHECK(g16.spacing() == doctest::Approx(0.4 / 15).epsilon(1e-12));

  BasisPointSet const g3 = buildBpsGrid(3, 1.0);
  Index centre = -1;
  for (Index j = 0; j < g3.size(); ++j) {
    if (g3.points.row(j).norm() == 0.0) { centre = j; }
  }
  CHECK(centre == 13);

  CHECK(buildBpsGrid(16, 0.2).points == g16.points);
  CHECK_THROWS_AS(buildBpsGrid(1, 1.0), Error);
  CHECK_THROWS_AS(buildBpsGrid(4, 0.0), Error);
}

TEST_CASE("normalize to grid")
{
  BasisPointSet const grid = buildBpsGrid(4, 0.2);
  SUBCASE("offset cube is centred and scaled inside the grid")
  {
    TriangleMesh cube = unitCube();
    cube.vertices.col(0).array() += 5.0;
    PointCloud const cloud(cube.vertices);
    auto [out, tf] = normalizeToGrid(cloud, grid);
    CHECK(out.points.colwise().mean().norm() < 1e-12);
    CHECK(out.points.rowwise().norm().maxCoeff() <= 0.2 + 1e-12);
    CHECK(out.points.cwiseAbs().maxCoeff() <= 0.2 + 1e-12);
    CHECK(tf.invertRows(out.points).isApprox(cloud.points, 1e-12));
    auto [again, tf2] = normalizeToGrid(out, grid);
    CHECK(tf2.scale == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(tf2.translation.norm() < 1e-9);
  }
  SUBCASE("centred small object keeps unit scale")
  {
    std::mt19937_64 rng(3);
    Points p = randomPoints(rng, 50, 0.05);
    p.rowwise() -= p.colwise().mean();
    auto [out, tf] = normalizeToGrid(PointCloud(p), grid);
    CHECK(tf.scale == 1.0);
    CHECK(tf.translation.norm() < 1e-15);
  }
  SUBCASE("single point")
  {
    Points p(1, 3);
    p << 0.3, -0.1, 2.0;
    auto [out, tf] = normalizeToGrid(PointCloud(p), grid);
    CHECK(tf.scale == 1.0);
    CHECK(tf.translation.isApprox(-p.row(0).transpose()));
  }
  SUBCASE("frame transform roundtrip and composition")
  {
    FrameTransform a{0.7, Vec3d(0.1, -0.2, 0.3)}, b{1.9, Vec3d(-1, 2, 0.5)};
    Vec3d const x(0.4, 0.5, -0.6);
    CHECK(a.invert(a.apply(x)).isApprox(x, 1e-12));
    CHECK(b.compose(a).apply(x).isApprox(b.apply(a.apply(x)), 1e-12));
    CHECK(a.inverse().apply(a.apply(x)).isApprox(x, 1e-12));
  }
}

TEST_CASE("knn matches exhaustive scan")
{
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Points const cloud = randomPoints(rng, 500);
    Points const queries = randomPoints(rng, 100, 1.2);
    auto const res = nearestNeighbors(queries, cloud, 5);
    for (Index q = 0; q < queries.rows(); ++q) {
      std::vector<std::pair<double, Index>> all;
      for (Index i = 0; i < cloud.rows(); ++i) { all.push_back({(cloud.row(i) - queries.row(q)).norm(), i}); }
      std::sort(all.begin(), all.end());
      for (int k = 0; k < 5; ++k) {
        REQUIRE(res[q][k].index == all[k].second);
        REQUIRE(res[q][k].distance == all[k].first);
      }
    }
  }
  SUBCASE("query on a cloud point and tie rule")
  {
    Points p(3, 3);
    p << 1, 0, 0, -1, 0, 0, 0, 5, 0;
    KdTree const tree(p);
    CHECK(tree.nearest(Vec3d(1, 0, 0)).index == 0);
    CHECK(tree.nearest(Vec3d(1, 0, 0)).distance == 0.0);
    CHECK(tree.nearest(Vec3d(0, 0, 0)).index == 0);
    Points q(1, 3);
    q << 0, 0, 0;
    CHECK_THROWS_AS(nearestNeighbors(q, p, 4), Error);
  }
}

TEST_CASE("surface sampling")
{
  TriangleMesh tri;
  tri.vertices.resize(3, 3);
  tri.vertices << 0, 0, 0, std::sqrt(2.0), 0, 0, 0, std::sqrt(2.0), 0;
  tri.faces.resize(1, 3);
  tri.faces << 0, 1, 2;
  PointCloud const pc = sampleSurfacePoints(tri, 1000, 7);
  for (Index i = 0; i < pc.size(); ++i) {
    CHECK(pc.points(i, 0) >= 0.0);
    CHECK(pc.points(i, 1) >= 0.0);
    CHECK(pc.points(i, 0) + pc.points(i, 1) <= std::sqrt(2.0) + 1e-12);
    CHECK(pc.points(i, 2) == 0.0);
  }
  CHECK(pc.normals.col(2).minCoeff() == 1.0);

  // Two triangles with areas 1 and 3.
  TriangleMesh two;
  two.vertices.resize(6, 3);
  two.vertices << 0, 0, 0, 2, 0, 0, 0, 1, 0, 10, 0, 0, 12, 0, 0, 10, 3, 0;
  two.faces.resize(2, 3);
  two.faces << 0, 1, 2, 3, 4, 5;
  PointCloud const many = sampleSurfacePoints(two, 100000, 1);
  double const second = (many.points.col(0).array() >= 10.0).cast<double>().mean();
  CHECK(second == doctest::Approx(0.75).epsilon(0.04));

  PointCloud const again = sampleSurfacePoints(two, 100000, 1);
  CHECK(again.points == many.points);
  CHECK_THROWS_AS(sampleSurfacePoints(TriangleMesh{}, 10, 1), Error);
}

TEST_CASE("vertex normals")
{
  TriangleMesh cube;
  cube.vertices.resize(8, 3);
  cube.vertices << 0, 0, 0, 1, 0, 0, 1, 1, 0, 0, 1, 0, 0, 0, 1, 1, 0, 1, 1, 1, 1, 0, 1, 1;
  cube.faces.resize(12, 3);
  cube.faces << 0, 2, 1, 0, 3, 2, 4, 5, 6, 4, 6, 7, 0, 1, 5, 0, 5, 4, 1, 2, 6, 1, 6, 5, 2, 3, 7, 2, 7, 6, 3, 0, 4, 3,
    4, 7;
  Points const n = vertexNormals(cube);
  for (Index i = 0; i < 8; ++i) {
    // Corners touch one or two triangles per face, so only the octant is fixed.
    Vec3d const outward = (cube.vertex(i).array() - 0.5).matrix();
    CHECK(n.row(i).norm() == doctest::Approx(1.0));
    for (int c = 0; c < 3; ++c) { CHECK(n(i, c) * outward(c) > 0.0); }
  }

  TriangleMesh tri;
  tri.vertices.resize(4, 3);
  tri.vertices << 0, 0, 0, 1, 0, 0, 0, 1, 0, 9, 9, 9;
  tri.faces.resize(1, 3);
  tri.faces << 0, 1, 2;
  try {
    vertexNormals(tri);
    FAIL("expected an isolated-vertex error");
  } catch (Error const &e) {
    CHECK(e.code() == ErrorCode::IsolatedVertex);
    CHECK(std::string(e.what()).find('3') != std::string::npos);
  }
  tri.vertices.conservativeResize(3, 3);
  Points const flat = vertexNormals(tri);
  for (Index i = 0; i < 3; ++i) { CHECK(flat.row(i) == Eigen::RowVector3d(0, 0, 1)); }

  TriangleMesh const sphere = shapeMesh({ShapeKind::Sphere, Vec3d(1, 0, 0)});
  Points const sn = vertexNormals(sphere);
  for (Index i = 0; i < sphere.numVertices(); ++i) {
    CHECK(sn.row(i).dot(sphere.vertices.row(i).normalized()) > std::cos(5.0 * M_PI / 180.0));
  }
}

TEST_CASE("mesh and point cloud files")
{
  TriangleMesh const m = shapeMesh({ShapeKind::Cylinder, Vec3d(0.03, 0.05, 0)});
  std::stringstream ss;
  writeObj(ss, m);
  TriangleMesh const back = readObj(ss);
  CHECK(back.vertices == m.vertices);
  CHECK(back.faces == m.faces);

  std::stringstream quad("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1/1 2/2/2 3/3/3 4/4/4\nf -4 -3 -2\n");
  TriangleMesh const q = readObj(quad);
  CHECK(q.numFaces() == 3);

  PointCloud const pc = sampleSurfacePoints(m, 100, 3);
  PointCloud const dec = decodePointCloud(encodePointCloud(pc));
  CHECK(dec.size() == 100);
  CHECK(dec.points.isApprox(pc.points.cast<float>().cast<double>(), 0.0));
  auto bytes = encodePointCloud(pc);
  bytes.pop_back();
  CHECK_THROWS_AS(decodePointCloud(bytes), Error);
}

TEST_CASE("midpoint subdivision and components")
{
  TriangleMesh const m = shapeMesh({ShapeKind::Sphere, Vec3d(1, 0, 0)});
  TriangleMesh const s = subdivideMidpoint(m);
  CHECK(s.numFaces() == 4 * m.numFaces());
  CHECK(s.numVertices() == m.numVertices() + 3 * m.numFaces() / 2);
  int count = 0;
  faceComponents(mergeMeshes(m, m), &count);
  CHECK(count == 2);
}
