#include "choir/contacts.hpp"
#include "choir/error.hpp"
#include "choir/knn.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace choir {

Eigen::Matrix<double, kNumAnchors, 9> ContactGaussians::packed() const
{
  Eigen::Matrix<double, kNumAnchors, 9> m;
  m << mean, chol;
  return m;
}

ContactGaussians ContactGaussians::fromPacked(Eigen::Matrix<double, kNumAnchors, 9> const &m,
                                              std::bitset<kNumAnchors> active)
{
  ContactGaussians g;
  g.mean = m.leftCols<3>();
  g.chol = m.rightCols<6>();
  g.active = active;
  return g;
}

Mat3d ContactGaussians::covariance(int anchor) const { return expandCholesky(chol.row(anchor).transpose()); }

ContactGaussians ContactGaussians::transformed(FrameTransform const &tf) const
{
  ContactGaussians out = *this;
  for (int j = 0; j < kNumAnchors; ++j) {
    if (!active[j]) { continue; }
    out.mean.row(j) = tf.apply(Vec3d(mean.row(j).transpose())).transpose();
    out.chol.row(j) = chol.row(j) * tf.scale;
  }
  return out;
}

Mat3d choleskyFactorMatrix(Vec6d const &l)
{
  Mat3d m;
  m << l(0), 0.0, 0.0,
       l(1), l(2), 0.0,
       l(3), l(4), l(5);
  return m;
}

Mat3d expandCholesky(Vec6d const &l)
{
  Mat3d const m = choleskyFactorMatrix(l);
  return m * m.transpose();
}

Vec6d factorCovariance(Mat3d const &sigma)
{
  if (!sigma.allFinite() || (sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * sigma.cwiseAbs().maxCoeff()) {
    fail(ErrorCode::NotPositiveDefinite, "covariance is not symmetric");
  }
  Eigen::LLT<Mat3d> llt(sigma);
  if (llt.info() != Eigen::Success) { fail(ErrorCode::NotPositiveDefinite, "covariance is not positive definite"); }
  Mat3d const l = llt.matrixL();
  if ((l.diagonal().array() <= 0.0).any()) { fail(ErrorCode::NotPositiveDefinite, "covariance is singular"); }
  Vec6d out;
  out << l(0, 0), l(1, 0), l(1, 1), l(2, 0), l(2, 1), l(2, 2);
  return out;
}

ContactWeights contactWeights(Points const &handVertices, Points const &handNormals, PointCloud const &object,
                              double lambda, double kappa)
{
  if (handNormals.rows() != handVertices.rows()) { fail(ErrorCode::InvalidArgument, "hand normals required"); }
  ContactWeights w = ContactWeights::Zero(handVertices.rows());
  if (object.size() == 0) { return w; }
  KdTree tree(object.points);
  for (Index i = 0; i < handVertices.rows(); ++i) {
    Vec3d const v = handVertices.row(i).transpose();
    Vec3d const n = handNormals.row(i).transpose();
    for (Index k : tree.radius(v, lambda)) {
      Vec3d const d = object.point(k) - v;
      double const dist = d.norm();
      if (dist > lambda) { continue; }
      // A point coinciding with the vertex has no direction; it lies at the cone apex.
      if (dist > 0.0 && std::acos(std::clamp(n.dot(d) / (n.norm() * dist), -1.0, 1.0)) > kappa) { continue; }
      ++w(i);
    }
  }
  return w;
}

ContactWeights contactWeights(HandPose const &hand, PointCloud const &object, ContactConfig const &cfg)
{
  return contactWeights(hand.vertices, hand.normals, object, cfg.lambda, cfg.kappa);
}

AnchorMap nearestAnchorMap(Points const &vertices, Points const &anchors)
{
  AnchorMap map(vertices.rows());
  for (Index i = 0; i < vertices.rows(); ++i) {
    Index best;
    (anchors.rowwise() - vertices.row(i)).rowwise().squaredNorm().minCoeff(&best);
    map[i] = static_cast<int>(best);
  }
  return map;
}

ContactGaussians fitGaussians(Points const &vertices, ContactWeights const &weights, AnchorMap const &vertexToAnchor,
                              ContactConfig const &cfg)
{
  if (weights.size() != vertices.rows() || static_cast<Index>(vertexToAnchor.size()) != vertices.rows()) {
    fail(ErrorCode::LengthMismatch, "weights and anchor map must cover every vertex");
  }
  std::array<double, kNumAnchors> total{};
  std::array<Vec3d, kNumAnchors> sum;
  sum.fill(Vec3d::Zero());
  for (Index i = 0; i < vertices.rows(); ++i) {
    int const a = vertexToAnchor[i];
    total[a] += weights(i);
    sum[a] += weights(i) * vertices.row(i).transpose();
  }
  ContactGaussians g;
  std::array<Mat3d, kNumAnchors> scatter;
  scatter.fill(Mat3d::Zero());
  for (int a = 0; a < kNumAnchors; ++a) {
    if (total[a] >= cfg.minWeight && total[a] > 0) {
      g.active.set(a);
      g.mean.row(a) = (sum[a] / total[a]).transpose();
    }
  }
  for (Index i = 0; i < vertices.rows(); ++i) {
    int const a = vertexToAnchor[i];
    if (!g.active[a] || weights(i) == 0) { continue; }
    Vec3d const d = vertices.row(i).transpose() - g.mean.row(a).transpose();
    scatter[a] += weights(i) * d * d.transpose();
  }
  for (int a = 0; a < kNumAnchors; ++a) {
    if (!g.active[a]) { continue; }
    Mat3d sigma = scatter[a] / total[a] + cfg.epsilon * Mat3d::Identity();
    sigma = 0.5 * (sigma + sigma.transpose());
    g.chol.row(a) = factorCovariance(sigma).transpose();
  }
  return g;
}

double density(ContactGaussians const &contacts, int anchor, Vec3d const &x)
{
  if (!contacts.active[anchor]) { return 0.0; }
  Mat3d const l = choleskyFactorMatrix(contacts.chol.row(anchor).transpose());
  Vec3d const z = l.triangularView<Eigen::Lower>().solve(x - contacts.mean.row(anchor).transpose());
  double const norm = std::pow(2.0 * M_PI, 1.5) * l.diagonal().prod();
  return std::exp(-0.5 * z.squaredNorm()) / norm;
}

std::vector<int> nearestActiveAnchor(ContactGaussians const &contacts, Points const &vertices, Points const &anchors)
{
  std::vector<int> out(vertices.rows(), -1);
  if (contacts.active.none()) { return out; }
  for (Index i = 0; i < vertices.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a < kNumAnchors; ++a) {
      if (!contacts.active[a]) { continue; }
      double const d = (anchors.row(a) - vertices.row(i)).squaredNorm();
      if (d < best) {
        best = d;
        out[i] = a;
      }
    }
  }
  return out;
}

Eigen::VectorXd recoverContactMap(ContactGaussians const &contacts, Points const &vertices, Points const &anchors)
{
  Eigen::VectorXd map = Eigen::VectorXd::Zero(vertices.rows());
  std::vector<int> const nearest = nearestActiveAnchor(contacts, vertices, anchors);
  for (Index i = 0; i < vertices.rows(); ++i) {
    if (nearest[i] >= 0) { map(i) = density(contacts, nearest[i], vertices.row(i).transpose()); }
  }
  double const peak = map.maxCoeff();
  if (peak > 0.0) { map /= peak; }
  return map;
}

ContactGaussians encodeContacts(HandPose const &hand, PointCloud const &object, ContactConfig const &cfg)
{
  ContactWeights const w = contactWeights(hand, object, cfg);
  return fitGaussians(hand.vertices, w, nearestAnchorMap(hand.vertices, hand.anchors), cfg);
}

} // namespace choir
