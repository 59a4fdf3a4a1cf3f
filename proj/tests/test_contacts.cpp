#include "choir/contacts.hpp"
#include "choir/dataset.hpp"
#include "choir/error.hpp"
#include "choir/objects.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

using namespace choir;

namespace {

Points randomPoints(std::mt19937_64 &rng, Index n, double half)
{
  std::uniform_real_distribution<double> u(-half, half);
  Points p(n, 3);
  for (Index i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) { p(i, c) = u(rng); }
  }
  return p;
}

Points randomUnit(std::mt19937_64 &rng, Index n)
{
  std::normal_distribution<double> g;
  Points p(n, 3);
  for (Index i = 0; i < n; ++i) {
    p.row(i) = Eigen::RowVector3d(g(rng), g(rng), g(rng)).normalized();
  }
  return p;
}

Mat3d randomSpd(std::mt19937_64 &rng, double scale)
{
  std::normal_distribution<double> g;
  Mat3d a;
  for (int i = 0; i < 9; ++i) { a(i) = g(rng); }
  return scale * scale * (a.transpose() * a + Mat3d::Identity());
}

std::set<Index> topDecile(Eigen::VectorXd const &v)
{
  std::vector<Index> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return v(a) > v(b); });
  Index const k = (v.size() + 9) / 10;
  return {order.begin(), order.begin() + k};
}

} // namespace

TEST_CASE("cone weights: examples")
{
  Points v(1, 3), n(1, 3);
  v << 0.01, 0.02, 0.03;
  n << 0.0, 0.6, 0.8;
  PointCloud front(v + 0.003 * n);
  PointCloud behind(v - 0.003 * n);
  CHECK(contactWeights(v, n, front, 0.004, M_PI / 2)(0) == 1);
  CHECK(contactWeights(v, n, behind, 0.004, M_PI / 2)(0) == 0);
  PointCloud far(v + 0.005 * n);
  CHECK(contactWeights(v, n, far, 0.004, M_PI / 2)(0) == 0);
  CHECK_THROWS_AS(contactWeights(v, Points(), front, 0.004, M_PI / 2), Error);
}

TEST_CASE("cone weights match the exhaustive scan")
{
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    Points const v = randomPoints(rng, 80, 0.01);
    Points const n = randomUnit(rng, 80);
    Points const x = randomPoints(rng, 400, 0.012);
    double const kappa = trial % 2 ? M_PI / 2 : 1.0;
    ContactWeights const w = contactWeights(v, n, PointCloud(x), 0.004, kappa);
    for (Index i = 0; i < v.rows(); ++i) {
      int count = 0;
      for (Index k = 0; k < x.rows(); ++k) {
        Eigen::RowVector3d const d = x.row(k) - v.row(i);
        double const dist = d.norm();
        if (dist > 0.004) { continue; }
        double const angle = dist > 0 ? std::acos(std::clamp(d.dot(n.row(i)) / dist, -1.0, 1.0)) : 0.0;
        if (angle <= kappa) { ++count; }
      }
      REQUIRE(w(i) == count);
    }
  }
}

TEST_CASE("Gaussian fit: examples")
{
  Points v = Points::Zero(4, 3);
  v.row(0) << 0.01, 0.0, 0.0;
  v.row(1) << 0.0, 0.02, 0.0;
  v.row(2) << 0.0, 0.0, 0.03;
  AnchorMap const map(4, 5);

  ContactConfig cfg;
  cfg.minWeight = 1;
  ContactWeights w = ContactWeights::Zero(4);
  w(2) = 4;
  ContactGaussians g = fitGaussians(v, w, map, cfg);
  CHECK(g.active.count() == 1);
  CHECK(g.active[5]);
  CHECK(g.mean.row(5).isApprox(v.row(2)));
  CHECK((g.covariance(5) - cfg.epsilon * Mat3d::Identity()).norm() < 1e-18);

  w.setZero();
  w(0) = 1;
  w(1) = 1;
  g = fitGaussians(v, w, map, cfg);
  Vec3d const mid = 0.5 * (v.row(0) + v.row(1)).transpose();
  CHECK((g.mean.row(5).transpose() - mid).norm() < 1e-15);
  Vec3d const da = v.row(0).transpose() - mid, db = v.row(1).transpose() - mid;
  Mat3d const expected = 0.5 * (da * da.transpose() + db * db.transpose()) + cfg.epsilon * Mat3d::Identity();
  CHECK((g.covariance(5) - expected).norm() < 1e-15);

  // Default minimum weight: two points do not activate an anchor.
  CHECK(fitGaussians(v, w, map).active.none());
  CHECK(fitGaussians(v, ContactWeights::Zero(4), map, cfg).active.none());
  CHECK_THROWS_AS(fitGaussians(v, ContactWeights::Zero(3), map), Error);
}

TEST_CASE("Gaussian fit matches the expanded multiset MLE")
{
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> weight(0, 50), anchor(0, kNumAnchors - 1), coin(0, 3);
  ContactConfig const cfg;
  for (int trial = 0; trial < 50; ++trial) {
    Index const n = 120;
    Points const v = randomPoints(rng, n, 0.05);
    ContactWeights w(n);
    AnchorMap map(n);
    for (Index i = 0; i < n; ++i) {
      w(i) = coin(rng) == 0 ? weight(rng) : 0;
      map[i] = anchor(rng);
    }
    ContactGaussians const g = fitGaussians(v, w, map, cfg);
    for (int a = 0; a < kNumAnchors; ++a) {
      std::vector<Vec3d> multiset;
      for (Index i = 0; i < n; ++i) {
        if (map[i] != a) { continue; }
        for (int r = 0; r < w(i); ++r) { multiset.push_back(v.row(i).transpose()); }
      }
      bool const active = static_cast<int>(multiset.size()) >= cfg.minWeight;
      REQUIRE(g.active[a] == active);
      if (!active) { continue; }
      Vec3d mu = Vec3d::Zero();
      for (auto const &x : multiset) { mu += x; }
      mu /= static_cast<double>(multiset.size());
      Mat3d sigma = Mat3d::Zero();
      for (auto const &x : multiset) { sigma += (x - mu) * (x - mu).transpose(); }
      sigma = sigma / static_cast<double>(multiset.size()) + cfg.epsilon * Mat3d::Identity();
      REQUIRE((g.mean.row(a).transpose() - mu).norm() < 1e-9);
      REQUIRE((g.covariance(a) - sigma).norm() < 1e-9);
      Vec6d const l = g.chol.row(a).transpose();
      REQUIRE(l(0) > 0);
      REQUIRE(l(2) > 0);
      REQUIRE(l(5) > 0);
      Eigen::SelfAdjointEigenSolver<Mat3d> es(g.covariance(a));
      REQUIRE(es.eigenvalues().minCoeff() >= cfg.epsilon / 2);
    }
  }
}

TEST_CASE("Cholesky parameterization")
{
  Vec6d id;
  id << 1, 0, 1, 0, 0, 1;
  CHECK(expandCholesky(id).isApprox(Mat3d::Identity()));
  Vec6d const d = factorCovariance(Eigen::Vector3d(4, 9, 16).asDiagonal());
  Vec6d expected;
  expected << 2, 0, 3, 0, 0, 4;
  CHECK((d - expected).norm() < 1e-12);

  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    Mat3d const s = randomSpd(rng, 1.0);
    CHECK((expandCholesky(factorCovariance(s)) - s).norm() < 1e-9);
  }
  Mat3d bad = Mat3d::Identity();
  bad(2, 2) = -1;
  CHECK_THROWS_AS(factorCovariance(bad), Error);
  Mat3d asym = Mat3d::Identity();
  asym(0, 1) = 0.5;
  CHECK_THROWS_AS(factorCovariance(asym), Error);
}

TEST_CASE("density")
{
  ContactGaussians g;
  g.active.set(3);
  g.mean.row(3) << 0.1, 0.2, 0.3;
  g.chol.row(3) << 1, 0, 1, 0, 0, 1;
  Vec3d const mu = g.mean.row(3).transpose();
  CHECK(density(g, 3, mu) == doctest::Approx(std::pow(2 * M_PI, -1.5)).epsilon(1e-14));
  CHECK(density(g, 3, mu + Vec3d(6.1, 0, 0)) < 1e-6 * density(g, 3, mu));
  CHECK(density(g, 4, mu) == 0.0);

  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 3; ++trial) {
    Mat3d const sigma = randomSpd(rng, 0.01);
    g.chol.row(3) = factorCovariance(sigma).transpose();
    g.mean.row(3) = randomPoints(rng, 1, 0.1).row(0);
    Vec3d const m = g.mean.row(3).transpose();
    Vec3d const sd = sigma.diagonal().cwiseSqrt();
    int const steps = 60;
    Vec3d const h = 10.0 * sd / steps;
    double integral = 0.0;
    for (int i = 0; i < steps; ++i) {
      for (int j = 0; j < steps; ++j) {
        for (int k = 0; k < steps; ++k) {
          Vec3d const x = m - 5.0 * sd + Vec3d(i + 0.5, j + 0.5, k + 0.5).cwiseProduct(h);
          integral += density(g, 3, x);
        }
      }
    }
    integral *= h.prod();
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-3));

    // Joint rigid motion of mean, covariance and query point.
    Mat3d const r = Eigen::AngleAxisd(0.7 + trial, Vec3d(1, 2, 3).normalized()).toRotationMatrix();
    Vec3d const t(0.3, -0.1, 0.2);
    Vec3d const x = m + 0.5 * sd;
    ContactGaussians moved = g;
    moved.mean.row(3) = (r * m + t).transpose();
    moved.chol.row(3) = factorCovariance(r * sigma * r.transpose()).transpose();
    CHECK(density(moved, 3, r * x + t) == doctest::Approx(density(g, 3, x)).epsilon(1e-9));
  }
}

TEST_CASE("contact map recovery")
{
  std::mt19937_64 rng(6);
  Points const anchors = randomPoints(rng, 32, 0.05);
  Points vertices = randomPoints(rng, 50, 0.05);
  ContactGaussians g;
  CHECK(recoverContactMap(g, vertices, anchors).isZero(0.0));

  g.active.set(7);
  g.mean.row(7) = vertices.row(10);
  g.chol.row(7) << 0.01, 0, 0.01, 0, 0, 0.01;
  Points single = anchors;
  for (int a = 0; a < kNumAnchors; ++a) { single.row(a) = a == 7 ? vertices.row(10) : Eigen::RowVector3d(9, 9, 9); }
  Eigen::VectorXd const map = recoverContactMap(g, vertices, single);
  CHECK(map(10) == 1.0);
  CHECK(map.minCoeff() >= 0.0);
  CHECK(map.maxCoeff() <= 1.0);
}

TEST_CASE("recovered contact maps concentrate on the true contact region")
{
  std::mt19937_64 rng(2024);
  double iouSum = 0.0;
  int const n = 10;
  for (int trial = 0; trial < n; ++trial) {
    ShapeSpec const shape = randomShape(static_cast<ShapeKind>(trial % 4), rng);
    TriangleMesh const mesh = shapeMesh(shape);
    HandPose const hand = forwardKinematics(generateGrasp(shape, rng));
    PointCloud const cloud = sampleSurfacePoints(mesh, 4096, trial);
    ContactWeights const w = contactWeights(hand, cloud);
    ContactGaussians const g = fitGaussians(hand.vertices, w, nearestAnchorMap(hand.vertices, hand.anchors));
    std::set<Index> const a = topDecile(w.cast<double>());
    std::set<Index> const b = topDecile(recoverContactMap(g, hand));
    std::vector<Index> inter;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
    iouSum += static_cast<double>(inter.size()) / static_cast<double>(a.size() + b.size() - inter.size());
  }
  MESSAGE("mean top-decile IoU " << iouSum / n);
  CHECK(iouSum / n > 0.5);
}
