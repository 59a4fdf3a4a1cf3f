#include "choir/hand.hpp"
#include "choir/error.hpp"

#include <map>
#include <random>

namespace choir {

ParamVectord HandParams::flatten() const
{
  ParamVectord q;
  q << theta, beta, rot, trans;
  return q;
}

HandParams HandParams::unflatten(ParamVectord const &q)
{
  HandParams p;
  p.theta = q.segment<kNumPose>(kPoseOffset);
  p.beta = q.segment<kNumShape>(kShapeOffset);
  p.rot = q.segment<3>(kRotOffset);
  p.trans = q.segment<3>(kTransOffset);
  return p;
}

std::vector<int> HandTemplate::boneVertices(int bone) const
{
  std::vector<int> out;
  for (size_t i = 0; i < vertexBone.size(); ++i) {
    if (vertexBone[i] == bone) { out.push_back(static_cast<int>(i)); }
  }
  return out;
}

namespace {

constexpr double kShapeStep = 0.04; // relative change per unit beta

// Rest dimensions of the template hand, meters.
struct Dimensions
{
  double palmWidth = 0.084;
  double palmLength = 0.090;
  double palmThickness = 0.024;
  double radius = 0.0085;
  // index, middle, ring, pinky, thumb
  std::array<std::array<double, 3>, 5> lengths{{{0.045, 0.026, 0.021},
                                                {0.049, 0.030, 0.023},
                                                {0.046, 0.028, 0.022},
                                                {0.037, 0.021, 0.019},
                                                {0.040, 0.032, 0.027}}};
  std::array<double, 5> radiusScale{1.0, 1.0, 0.97, 0.88, 1.1};
  std::array<double, 4> baseX{-0.027, -0.009, 0.009, 0.027};
  Vec3d thumbBase{-0.030, 0.022, 0.003};
};

// Shape coefficients act linearly on the dimensions. The ten directions are independent:
// 0 all phalanx lengths, 1 palm width, 2 palm length, 3 finger radius, 4 palm thickness,
// 5 proximal and 6 middle phalanx lengths of the four fingers, 7 finger spread,
// 8 thumb base height, 9 thumb lengths.
Dimensions shapedDimensions(Eigen::Matrix<double, kNumShape, 1> const &beta)
{
  Dimensions d;
  auto f = [&](int k) { return kShapeStep * beta(k); };
  double const palmW = 1.0 + f(1), palmL = 1.0 + f(2), rad = 1.0 + f(3), palmT = 1.0 + f(4);
  d.palmWidth *= palmW;
  d.palmLength *= palmL;
  d.palmThickness *= palmT;
  d.radius *= rad;
  for (int finger = 0; finger < 5; ++finger) {
    for (int ph = 0; ph < 3; ++ph) {
      double s = 1.0 + f(0);
      if (finger == 4) {
        s += f(9);
      } else if (ph < 2) {
        s += f(5 + ph);
      }
      d.lengths[finger][ph] *= s;
    }
  }
  for (auto &x : d.baseX) { x *= palmW + f(7); }
  d.thumbBase.x() *= palmW;
  d.thumbBase.y() *= palmL + f(8);
  d.thumbBase.z() *= palmT;
  return d;
}

constexpr int kSegments = 8;
constexpr std::array<double, 4> kCylinderRings{0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0};

struct Builder
{
  std::vector<Vec3d> local;
  std::vector<int> bone;
  std::vector<std::array<int, 3>> faces;

  int add(Vec3d const &p, int b)
  {
    local.push_back(p);
    bone.push_back(b);
    return static_cast<int>(local.size()) - 1;
  }
};

struct CapsuleIds
{
  int bottomPole, topPole;
  std::array<std::array<int, kSegments>, 6> rings; // cap, 4 cylinder rings, cap
};

// Capsule along +y from 0 to `length`; ring vertex k = 0 faces +z (volar).
CapsuleIds addCapsule(Builder &mesh, int bone, double length, double radius)
{
  CapsuleIds ids;
  double const c45 = std::sqrt(0.5);
  auto ringAt = [&](double y, double r, std::array<int, kSegments> &ring) {
    for (int k = 0; k < kSegments; ++k) {
      double const phi = 2.0 * M_PI * k / kSegments;
      ring[k] = mesh.add(Vec3d(r * std::sin(phi), y, r * std::cos(phi)), bone);
    }
  };
  ids.bottomPole = mesh.add(Vec3d(0.0, -radius, 0.0), bone);
  ringAt(-radius * c45, radius * c45, ids.rings[0]);
  for (int i = 0; i < 4; ++i) { ringAt(length * kCylinderRings[i], radius, ids.rings[1 + i]); }
  ringAt(length + radius * c45, radius * c45, ids.rings[5]);
  ids.topPole = mesh.add(Vec3d(0.0, length + radius, 0.0), bone);

  // Outward winding: looking from outside, counter-clockwise.
  for (int k = 0; k < kSegments; ++k) {
    int const k1 = (k + 1) % kSegments;
    mesh.faces.push_back({ids.bottomPole, ids.rings[0][k1], ids.rings[0][k]});
    for (int r = 0; r < 5; ++r) {
      auto const &lo = ids.rings[r];
      auto const &hi = ids.rings[r + 1];
      mesh.faces.push_back({lo[k], lo[k1], hi[k1]});
      mesh.faces.push_back({lo[k], hi[k1], hi[k]});
    }
    mesh.faces.push_back({ids.topPole, ids.rings[5][k], ids.rings[5][k1]});
  }
  return ids;
}

// Axis-aligned box [-w/2, w/2] x [0, l] x [-t/2, t/2] with a (nx, ny, nz) lattice on each face.
void addPalm(Builder &mesh, Dimensions const &d, std::map<std::array<int, 3>, int> &lattice)
{
  constexpr int nx = 6, ny = 6, nz = 2;
  auto vertexAt = [&](int i, int j, int k) {
    auto [it, inserted] = lattice.try_emplace({i, j, k}, 0);
    if (inserted) {
      Vec3d const p(d.palmWidth * (double(i) / nx - 0.5), d.palmLength * double(j) / ny,
                    d.palmThickness * (double(k) / nz - 0.5));
      it->second = mesh.add(p, 0);
    }
    return it->second;
  };
  // Each face is a lattice over two running axes ordered so that (u x v) points outward.
  auto emitFace = [&](int na, int nb, auto idx) {
    for (int a = 0; a < na; ++a) {
      for (int b = 0; b < nb; ++b) {
        int const v00 = idx(a, b), v10 = idx(a + 1, b), v11 = idx(a + 1, b + 1), v01 = idx(a, b + 1);
        mesh.faces.push_back({v00, v10, v11});
        mesh.faces.push_back({v00, v11, v01});
      }
    }
  };
  // +z (volar): u = x, v = y
  emitFace(nx, ny, [&](int a, int b) { return vertexAt(a, b, nz); });
  // -z: u = y, v = x
  emitFace(ny, nx, [&](int a, int b) { return vertexAt(b, a, 0); });
  // +x: u = y, v = z
  emitFace(ny, nz, [&](int a, int b) { return vertexAt(nx, a, b); });
  // -x: u = z, v = y
  emitFace(nz, ny, [&](int a, int b) { return vertexAt(0, b, a); });
  // +y: u = z, v = x
  emitFace(nz, nx, [&](int a, int b) { return vertexAt(b, ny, a); });
  // -y: u = x, v = z
  emitFace(nx, nz, [&](int a, int b) { return vertexAt(a, 0, b); });
}

Mat3d thumbRestRotation()
{
  return (Eigen::AngleAxisd(0.75, Vec3d::UnitZ()) * Eigen::AngleAxisd(-0.9, Vec3d::UnitY())).toRotationMatrix();
}

struct Geometry
{
  Builder mesh;
  Eigen::Matrix<double, kNumBones, 3> offsets;
  std::array<int, kNumAnchors> anchors{};
  std::array<int, 5> tips{};
};

Geometry buildGeometry(Eigen::Matrix<double, kNumShape, 1> const &beta)
{
  Dimensions const d = shapedDimensions(beta);
  Geometry g;
  std::map<std::array<int, 3>, int> lattice;
  addPalm(g.mesh, d, lattice);
  g.offsets.setZero();
  int anchor = 0;
  for (int finger = 0; finger < 5; ++finger) {
    double const r = d.radius * d.radiusScale[finger];
    for (int ph = 0; ph < 3; ++ph) {
      int const b = fingerBone(finger, ph);
      if (ph == 0) {
        Vec3d const base = finger < 4 ? Vec3d(d.baseX[finger], d.palmLength, 0.0) : d.thumbBase;
        g.offsets.row(b) = base.transpose();
      } else {
        g.offsets.row(b) = Vec3d(0.0, d.lengths[finger][ph - 1], 0.0).transpose();
      }
      CapsuleIds ids = addCapsule(g.mesh, b, d.lengths[finger][ph], r);
      // Two volar anchors per phalanx, staggered either side of the volar midline.
      g.anchors[anchor++] = ids.rings[2][1];
      g.anchors[anchor++] = ids.rings[3][kSegments - 1];
      if (ph == 2) { g.tips[finger] = ids.topPole; }
    }
  }
  // Palm anchors on the volar face, on a diagonal from the thumb-side heel to below the little finger.
  g.anchors[anchor++] = lattice.at({1, 1, 2});
  g.anchors[anchor++] = lattice.at({5, 5, 2});
  return g;
}

} // namespace

HandTemplate buildTemplate()
{
  using BetaVec = Eigen::Matrix<double, kNumShape, 1>;
  Geometry const base = buildGeometry(BetaVec::Zero());
  HandTemplate t;
  Index const n = static_cast<Index>(base.mesh.local.size());
  t.restLocal.resize(n, 3);
  for (Index i = 0; i < n; ++i) { t.restLocal.row(i) = base.mesh.local[i].transpose(); }
  t.faces.resize(static_cast<Index>(base.mesh.faces.size()), 3);
  for (size_t f = 0; f < base.mesh.faces.size(); ++f) {
    t.faces.row(static_cast<Index>(f)) << base.mesh.faces[f][0], base.mesh.faces[f][1], base.mesh.faces[f][2];
  }
  t.vertexBone = base.mesh.bone;
  t.offsetRest = base.offsets;

  // Geometry is linear in beta, so unit perturbations give exact shape directions.
  t.shapeDirsLocal.resize(3 * n, kNumShape);
  for (int k = 0; k < kNumShape; ++k) {
    Geometry const g = buildGeometry(BetaVec::Unit(k));
    for (Index i = 0; i < n; ++i) { t.shapeDirsLocal.block<3, 1>(3 * i, k) = g.mesh.local[i] - base.mesh.local[i]; }
    for (int b = 0; b < kNumBones; ++b) {
      t.offsetDirs.block<3, 1>(3 * b, k) = (g.offsets.row(b) - base.offsets.row(b)).transpose();
    }
  }

  t.parent[0] = -1;
  t.restRotation[0] = Mat3d::Identity();
  for (int finger = 0; finger < 5; ++finger) {
    for (int ph = 0; ph < 3; ++ph) {
      int const b = fingerBone(finger, ph);
      t.parent[b] = ph == 0 ? 0 : b - 1;
      t.restRotation[b] = (finger == 4 && ph == 0) ? thumbRestRotation() : Mat3d::Identity();
    }
  }
  t.anchorIndices = base.anchors;
  {
    Points const rest = posedVertices(t, HandParams{});
    for (int a : t.anchorIndices) { t.pivot += rest.row(a).transpose(); }
    t.pivot /= kNumAnchors;
  }
  t.keypoints[0] = {Keypoint::Kind::BoneOrigin, 0};
  for (int finger = 0; finger < 5; ++finger) {
    for (int ph = 0; ph < 3; ++ph) { t.keypoints[1 + 4 * finger + ph] = {Keypoint::Kind::BoneOrigin, fingerBone(finger, ph)}; }
    t.keypoints[1 + 4 * finger + 3] = {Keypoint::Kind::Vertex, base.tips[finger]};
  }
  return t;
}

HandTemplate const &handTemplate()
{
  static HandTemplate const tmpl = buildTemplate();
  return tmpl;
}

namespace {

Vec3d localPosition(HandTemplate const &tmpl, Index v, Eigen::Matrix<double, kNumShape, 1> const &beta)
{
  return tmpl.restLocal.row(v).transpose() + tmpl.shapeDirsLocal.middleRows<3>(3 * v) * beta;
}

} // namespace

Points posedVertices(HandTemplate const &tmpl, HandParams const &params)
{
  if (!params.allFinite()) { fail(ErrorCode::NonFinite, "hand parameters must be finite"); }
  BonePoses<double> const bones = poseBones<double>(tmpl, params.flatten());
  Points v(tmpl.numVertices(), 3);
  for (Index i = 0; i < tmpl.numVertices(); ++i) {
    int const b = tmpl.vertexBone[i];
    v.row(i) = (bones.rotation[b] * localPosition(tmpl, i, params.beta) + bones.origin[b]).transpose();
  }
  return v;
}

TriangleMesh HandPose::mesh() const
{
  TriangleMesh m;
  m.vertices = vertices;
  m.faces = handTemplate().faces;
  return m;
}

HandPose forwardKinematics(HandTemplate const &tmpl, HandParams const &params)
{
  HandPose pose;
  pose.params = params;
  pose.vertices = posedVertices(tmpl, params);
  TriangleMesh mesh{pose.vertices, tmpl.faces};
  pose.normals = vertexNormals(mesh);
  BonePoses<double> const bones = poseBones<double>(tmpl, params.flatten());
  pose.joints.resize(kNumJoints, 3);
  for (int j = 0; j < kNumJoints; ++j) {
    Keypoint const kp = tmpl.keypoints[j];
    if (kp.kind == Keypoint::Kind::BoneOrigin) {
      pose.joints.row(j) = bones.origin[kp.index].transpose();
    } else {
      pose.joints.row(j) = pose.vertices.row(kp.index);
    }
  }
  pose.anchors.resize(kNumAnchors, 3);
  for (int a = 0; a < kNumAnchors; ++a) { pose.anchors.row(a) = pose.vertices.row(tmpl.anchorIndices[a]); }
  return pose;
}

namespace {

BonePoses<Dual> dualBones(HandTemplate const &tmpl, HandParams const &params)
{
  if (!params.allFinite()) { fail(ErrorCode::NonFinite, "hand parameters must be finite"); }
  ParamVectord const q = params.flatten();
  ParamVector<Dual> qd;
  for (int i = 0; i < kNumParams; ++i) { qd(i) = Dual(q(i), kNumParams, i); }
  return poseBones<Dual>(tmpl, qd);
}

void writeDual(PointJacobian &out, Index row, Vec3<Dual> const &p)
{
  for (int c = 0; c < 3; ++c) {
    out.values(row, c) = p(c).value();
    out.jacobian.row(3 * row + c) = p(c).derivatives().transpose();
  }
}

// v = R p(beta) + o: rotation/origin derivatives come from the dual bones, the shape
// derivative of the local position is added as R * dp/dbeta.
Vec3<Dual> skinDual(HandTemplate const &tmpl, BonePoses<Dual> const &bones, Index v,
                    Eigen::Matrix<double, kNumShape, 1> const &beta)
{
  int const b = tmpl.vertexBone[v];
  Vec3d const p = localPosition(tmpl, v, beta);
  Vec3<Dual> out = bones.rotation[b] * p.cast<Dual>() + bones.origin[b];
  Mat3d rv;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) { rv(r, c) = bones.rotation[b](r, c).value(); }
  }
  Eigen::Matrix<double, 3, kNumShape> const dirs = rv * tmpl.shapeDirsLocal.middleRows<3>(3 * v);
  for (int c = 0; c < 3; ++c) { out(c).derivatives().segment<kNumShape>(kShapeOffset) += dirs.row(c).transpose(); }
  return out;
}

} // namespace

PointJacobian vertexJacobian(HandTemplate const &tmpl, HandParams const &params, std::vector<int> const &vertexIds)
{
  BonePoses<Dual> const bones = dualBones(tmpl, params);
  PointJacobian out;
  Index const n = static_cast<Index>(vertexIds.size());
  out.values.resize(n, 3);
  out.jacobian.resize(3 * n, kNumParams);
  for (Index i = 0; i < n; ++i) { writeDual(out, i, skinDual(tmpl, bones, vertexIds[i], params.beta)); }
  return out;
}

PointJacobian anchorJacobian(HandTemplate const &tmpl, HandParams const &params)
{
  return vertexJacobian(tmpl, params, std::vector<int>(tmpl.anchorIndices.begin(), tmpl.anchorIndices.end()));
}

PointJacobian jointJacobian(HandTemplate const &tmpl, HandParams const &params)
{
  BonePoses<Dual> const bones = dualBones(tmpl, params);
  PointJacobian out;
  out.values.resize(kNumJoints, 3);
  out.jacobian.resize(3 * kNumJoints, kNumParams);
  for (int j = 0; j < kNumJoints; ++j) {
    Keypoint const kp = tmpl.keypoints[j];
    if (kp.kind == Keypoint::Kind::BoneOrigin) {
      writeDual(out, j, bones.origin[kp.index]);
    } else {
      writeDual(out, j, skinDual(tmpl, bones, kp.index, params.beta));
    }
  }
  return out;
}

Eigen::Matrix<double, 15, kNumPose> const &poseNoiseBasis()
{
  static Eigen::Matrix<double, 15, kNumPose> const basis = [] {
    std::mt19937_64 rng(0x43484f4952ULL);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::Matrix<double, kNumPose, 15> g;
    for (Index c = 0; c < g.cols(); ++c) {
      for (Index r = 0; r < g.rows(); ++r) { g(r, c) = normal(rng); }
    }
    Eigen::HouseholderQR<Eigen::Matrix<double, kNumPose, 15>> qr(g);
    Eigen::Matrix<double, kNumPose, 15> q = qr.householderQ() * Eigen::Matrix<double, kNumPose, 15>::Identity();
    return Eigen::Matrix<double, 15, kNumPose>(q.transpose());
  }();
  return basis;
}

HandParams perturbParams(HandParams const &params, std::uint64_t seed, PerturbationConfig const &cfg)
{
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  HandParams out = params;
  for (int c = 0; c < 3; ++c) { out.trans(c) += cfg.translationSigma * normal(rng); }
  Eigen::Matrix<double, 15, 1> coeff;
  for (int c = 0; c < 15; ++c) { coeff(c) = cfg.poseSigma * normal(rng); }
  out.theta += poseNoiseBasis().transpose() * coeff;
  for (int c = 0; c < 3; ++c) { out.rot(c) += cfg.rotationSigma * normal(rng); }
  return out;
}

NormalizedPair normalizeToGrid(PointCloud const &object, HandPose const &hand, BasisPointSet const &grid)
{
  auto [cloud, tf] = normalizeToGrid(object, grid);
  NormalizedPair out{std::move(cloud), hand, tf};
  out.hand.vertices = tf.applyRows(hand.vertices);
  out.hand.joints = tf.applyRows(hand.joints);
  out.hand.anchors = tf.applyRows(hand.anchors);
  // Parameters can express the translation exactly; a non-unit scale only affects the geometry.
  out.hand.params.trans = tf.apply(hand.params.trans);
  return out;
}

} // namespace choir
