#include "choir/dataset.hpp"
#include "choir/error.hpp"
#include "choir/metrics.hpp"
#include "choir/objects.hpp"

#include <doctest.h>

using namespace choir;

namespace {

TriangleMesh cube(Vec3d const &lo, double side)
{
  TriangleMesh m = shapeMesh(ShapeSpec{ShapeKind::Box, Vec3d::Constant(side / 2)});
  m.vertices.rowwise() += (lo + Vec3d::Constant(side / 2)).transpose();
  return m;
}

} // namespace

TEST_CASE("joint errors")
{
  Points a = Points::Zero(21, 3);
  Points b = a;
  b.col(0).array() += 0.003; // every joint 3 mm off along x
  CHECK(mpjpe(a, b) == doctest::Approx(3.0));
  CHECK(rootAlignedMpjpe(a, b) == doctest::Approx(0.0));
  b(5, 1) += 0.004; // one joint moves 5 mm in total
  CHECK(mpjpe(a, b) == doctest::Approx((20 * 3.0 + 5.0) / 21));
  CHECK(mpjpe(a, a) == 0.0);
  CHECK_THROWS_AS(mpjpe(a, Points::Zero(20, 3)), Error);
}

TEST_CASE("intersection volume of boxes")
{
  // Offsets keep faces off voxel-centre planes.
  Vec3d const o(0.0003, 0.0002, 0.0001);
  CHECK(voxelVolume(cube(o, 0.01)) == doctest::Approx(1.0).epsilon(0.01));
  CHECK(intersectionVolume(cube(o, 0.01), cube(o, 0.01)) == doctest::Approx(1.0).epsilon(0.01));
  CHECK(intersectionVolume(cube(o, 0.01), cube(o + Vec3d(0.005, 0, 0), 0.01)) == doctest::Approx(0.5).epsilon(0.02));
  CHECK(intersectionVolume(cube(o, 0.01), cube(o + Vec3d(0.02, 0, 0), 0.01)) == 0.0);

  TriangleMesh const a = cube(o, 0.01), b = cube(o + Vec3d(0.004, 0.003, -0.002), 0.012);
  CHECK(intersectionVolume(a, b) == intersectionVolume(b, a));

  // Two disjoint components are each counted once.
  TriangleMesh const pair = mergeMeshes(cube(o, 0.01), cube(o + Vec3d(0.03, 0, 0), 0.01));
  CHECK(voxelVolume(pair) == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("contact scores")
{
  std::vector<bool> const gt{true, true, false, false, true};
  std::vector<bool> const pred{true, false, true, false, true};
  ContactScores const s = contactScores(pred, gt);
  CHECK(s.precision == doctest::Approx(2.0 / 3.0));
  CHECK(s.recall == doctest::Approx(2.0 / 3.0));
  CHECK(s.f1 == doctest::Approx(2.0 / 3.0));

  ContactScores const none = contactScores(std::vector<bool>(5, false), gt);
  CHECK(none.precision == 0.0);
  CHECK(none.recall == 0.0);
  CHECK(none.f1 == 0.0);
  CHECK(contactScores(gt, gt).f1 == 1.0);
  CHECK_THROWS_AS(contactScores(gt, {true}), Error);
}

TEST_CASE("ground truth against itself")
{
  std::mt19937_64 rng(4);
  ShapeSpec const shape = randomShape(ShapeKind::Cylinder, rng);
  HandParams const gt = generateGrasp(shape, rng);
  ObjectData const obj = objectData(shape, 2048, 9);
  HandPose const hand = forwardKinematics(gt);
  SampleMetrics const m = evaluatePair(hand, hand, obj.mesh, obj.cloud.points);
  CHECK(m.mpjpe == 0.0);
  CHECK(m.rMpjpe == 0.0);
  CHECK(m.contact.f1 == 1.0);
  CHECK(m.iv > 0.0);

  MetricsReport const r = summarize({m, m});
  CHECK(r.count == 2);
  CHECK(r.iv.mean == doctest::Approx(m.iv));
  CHECK(r.iv.std == doctest::Approx(0.0));
  CHECK(toJson(r).find("\"iv_cm3\"") != std::string::npos);
}
