#pragma once

#include "choir/geometry.hpp"
#include "choir/rotation.hpp"

#include <unsupported/Eigen/AutoDiff>

#include <array>
#include <cstdint>
#include <optional>

namespace choir {

inline constexpr int kNumBones = 16;
inline constexpr int kNumJoints = 21;
inline constexpr int kNumAnchors = 32;
inline constexpr int kNumPose = 45;
inline constexpr int kNumShape = 10;
inline constexpr int kNumParams = 61;

// Offsets into the flat parameter vector.
inline constexpr int kPoseOffset = 0;
inline constexpr int kShapeOffset = 45;
inline constexpr int kRotOffset = 55;
inline constexpr int kTransOffset = 58;

template <typename Scalar> using ParamVector = Eigen::Matrix<Scalar, kNumParams, 1>;
using ParamVectord = ParamVector<double>;
using Dual = Eigen::AutoDiffScalar<ParamVectord>;

struct HandParams
{
  Eigen::Matrix<double, kNumPose, 1> theta = Eigen::Matrix<double, kNumPose, 1>::Zero();
  Eigen::Matrix<double, kNumShape, 1> beta = Eigen::Matrix<double, kNumShape, 1>::Zero();
  Vec3d rot = Vec3d::Zero();
  Vec3d trans = Vec3d::Zero();

  ParamVectord flatten() const;
  static HandParams unflatten(ParamVectord const &q);
  bool allFinite() const { return flatten().allFinite(); }
};

/// Keypoints are either a bone origin (the joint centre) or a surface vertex (fingertips).
struct Keypoint
{
  enum class Kind { BoneOrigin, Vertex } kind;
  int index;
};

/// Procedural articulated hand: capsule phalanges on a box palm, rigidly skinned to 16 bones.
/// Bone-local geometry is linear in the 10 shape coefficients.
struct HandTemplate
{
  Faces faces;
  Points restLocal;               // N x 3 bone-local vertex positions at beta = 0
  Eigen::MatrixXd shapeDirsLocal; // 3N x 10, d(local position)/d(beta)
  std::vector<int> vertexBone;

  std::array<int, kNumBones> parent{};
  std::array<Mat3d, kNumBones> restRotation{};
  Eigen::Matrix<double, kNumBones, 3> offsetRest;   // joint offset in the parent frame
  Eigen::Matrix<double, 3 * kNumBones, kNumShape> offsetDirs;

  Vec3d pivot = Vec3d::Zero(); // centre of the global rotation, in the palm frame

  std::array<int, kNumAnchors> anchorIndices{};
  std::array<Keypoint, kNumJoints> keypoints{};

  Index numVertices() const { return restLocal.rows(); }
  std::vector<int> boneVertices(int bone) const;
};

HandTemplate const &handTemplate();
HandTemplate buildTemplate();

template <typename Scalar> struct BonePoses
{
  std::array<Mat3<Scalar>, kNumBones> rotation;
  std::array<Vec3<Scalar>, kNumBones> origin;
};

template <typename Scalar> BonePoses<Scalar> poseBones(HandTemplate const &tmpl, ParamVector<Scalar> const &q)
{
  BonePoses<Scalar> out;
  Eigen::Matrix<Scalar, kNumShape, 1> const beta = q.template segment<kNumShape>(kShapeOffset);
  out.rotation[0] = rodrigues<Scalar>(q.template segment<3>(kRotOffset));
  Vec3<Scalar> const pivot = tmpl.pivot.template cast<Scalar>();
  out.origin[0] = q.template segment<3>(kTransOffset) + pivot - out.rotation[0] * pivot;
  for (int b = 1; b < kNumBones; ++b) {
    int const p = tmpl.parent[b];
    Vec3<Scalar> const offset = tmpl.offsetRest.row(b).transpose().template cast<Scalar>() +
                                tmpl.offsetDirs.template middleRows<3>(3 * b).template cast<Scalar>() * beta;
    Vec3<Scalar> const w = q.template segment<3>(kPoseOffset + 3 * (b - 1));
    out.rotation[b] = out.rotation[p] * tmpl.restRotation[b].template cast<Scalar>() * rodrigues<Scalar>(w);
    out.origin[b] = out.rotation[p] * offset + out.origin[p];
  }
  return out;
}

struct HandPose
{
  Points vertices;
  Points normals;
  Points joints;  // 21 x 3
  Points anchors; // 32 x 3
  HandParams params;

  TriangleMesh mesh() const;
};

HandPose forwardKinematics(HandTemplate const &tmpl, HandParams const &params);
inline HandPose forwardKinematics(HandParams const &params) { return forwardKinematics(handTemplate(), params); }
Points posedVertices(HandTemplate const &tmpl, HandParams const &params);

/// Positions of selected points and their Jacobian w.r.t. the 61 parameters
/// (row 3*i + c of `jacobian` holds d point_i[c] / d q).
struct PointJacobian
{
  Points values;
  Eigen::MatrixXd jacobian;
};

PointJacobian vertexJacobian(HandTemplate const &tmpl, HandParams const &params, std::vector<int> const &vertexIds);
PointJacobian anchorJacobian(HandTemplate const &tmpl, HandParams const &params);
PointJacobian jointJacobian(HandTemplate const &tmpl, HandParams const &params);

struct PerturbationConfig
{
  double translationSigma = 0.05;              // meters per axis
  double poseSigma = 0.05;                     // per coefficient in the 15-d pose space
  double rotationSigma = 15.0 * M_PI / 180.0;  // radians per axis-angle component
};

/// Fixed seeded orthonormal 15 x 45 basis standing in for a learned pose PCA.
Eigen::Matrix<double, 15, kNumPose> const &poseNoiseBasis();

HandParams perturbParams(HandParams const &params, std::uint64_t seed, PerturbationConfig const &cfg = {});

/// Normalizes the object into the grid and carries the hand along rigidly.
struct NormalizedPair
{
  PointCloud object;
  HandPose hand;
  FrameTransform transform;
};
NormalizedPair normalizeToGrid(PointCloud const &object, HandPose const &hand, BasisPointSet const &grid);

// Bone and finger indexing: bone 0 is the palm; finger f in [0,5) (index, middle, ring, pinky,
// thumb) owns bones 1 + 3f .. 3 + 3f from proximal to distal.
inline constexpr int fingerBone(int finger, int phalanx) { return 1 + 3 * finger + phalanx; }

} // namespace choir
