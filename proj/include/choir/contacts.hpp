#pragma once

#include "choir/hand.hpp"

#include <bitset>

namespace choir {

using ContactWeights = Eigen::VectorXi;
using AnchorMap = std::vector<int>; // hand vertex -> anchor index

struct ContactConfig
{
  double lambda = 0.004;      // cone radius, meters
  double kappa = M_PI / 2.0;  // cone half-angle, radians
  double epsilon = 1e-8;      // covariance regularization, m^2
  int minWeight = 3;          // anchors with less total weight are inactive
};

/// One trivariate Gaussian per anchor: mean and the packed lower triangle of its Cholesky
/// factor, row-major (L00, L10, L11, L20, L21, L22).
struct ContactGaussians
{
  Eigen::Matrix<double, kNumAnchors, 3> mean = Eigen::Matrix<double, kNumAnchors, 3>::Zero();
  Eigen::Matrix<double, kNumAnchors, 6> chol = Eigen::Matrix<double, kNumAnchors, 6>::Zero();
  std::bitset<kNumAnchors> active;

  /// Packed 32 x 9 layout [mean | chol].
  Eigen::Matrix<double, kNumAnchors, 9> packed() const;
  static ContactGaussians fromPacked(Eigen::Matrix<double, kNumAnchors, 9> const &m, std::bitset<kNumAnchors> active);
  Mat3d covariance(int anchor) const;
  /// Re-expresses the Gaussians in another frame: x' = scale * (x + translation).
  ContactGaussians transformed(FrameTransform const &tf) const;
};

Mat3d expandCholesky(Vec6d const &l);
Mat3d choleskyFactorMatrix(Vec6d const &l);
/// Throws NotPositiveDefinite unless sigma is symmetric positive definite.
Vec6d factorCovariance(Mat3d const &sigma);

/// Counts, per hand vertex, the object points inside its cone of tolerance.
ContactWeights contactWeights(Points const &handVertices, Points const &handNormals, PointCloud const &object,
                              double lambda, double kappa);
ContactWeights contactWeights(HandPose const &hand, PointCloud const &object, ContactConfig const &cfg = {});

/// Nearest anchor (by Euclidean distance) for every vertex.
AnchorMap nearestAnchorMap(Points const &vertices, Points const &anchors);

/// Weighted maximum likelihood fit of one Gaussian per anchor over the weighted vertex multiset.
ContactGaussians fitGaussians(Points const &vertices, ContactWeights const &weights, AnchorMap const &vertexToAnchor,
                              ContactConfig const &cfg = {});

/// Trivariate normal density of the anchor's Gaussian at x; 0 for inactive anchors.
double density(ContactGaussians const &contacts, int anchor, Vec3d const &x);

/// Per-vertex density of the nearest active anchor's Gaussian, scaled to [0, 1] by the maximum.
Eigen::VectorXd recoverContactMap(ContactGaussians const &contacts, Points const &vertices, Points const &anchors);
inline Eigen::VectorXd recoverContactMap(ContactGaussians const &contacts, HandPose const &hand)
{
  return recoverContactMap(contacts, hand.vertices, hand.anchors);
}

/// Nearest active anchor per vertex, -1 when no anchor is active.
std::vector<int> nearestActiveAnchor(ContactGaussians const &contacts, Points const &vertices, Points const &anchors);

/// Full encoding: cone weights, per-pose anchor map, and the Gaussian fit.
ContactGaussians encodeContacts(HandPose const &hand, PointCloud const &object, ContactConfig const &cfg = {});

} // namespace choir
