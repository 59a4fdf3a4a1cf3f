#include "choir/tto.hpp"
#include "choir/error.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>

namespace choir {

Adam::Adam(Index size, AdamConfig cfg)
  : cfg_(cfg)
  , m_(Eigen::VectorXd::Zero(size))
  , v_(Eigen::VectorXd::Zero(size))
{
}

Eigen::VectorXd Adam::step(Eigen::VectorXd const &g)
{
  ++t_;
  m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * g;
  v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * g.cwiseAbs2();
  double const c1 = 1.0 - std::pow(cfg_.beta1, t_);
  double const c2 = 1.0 - std::pow(cfg_.beta2, t_);
  return -cfg_.lr * (m_ / c1).cwiseQuotient(((v_ / c2).cwiseSqrt().array() + cfg_.eps).matrix());
}

namespace {

using RowPoints32 = Eigen::Matrix<double, kNumAnchors, 3, Eigen::RowMajor>;

// Adds w * |x| and its gradient; the subgradient at 0 is taken as 0.
template <typename Seg> double addNorm(double w, Eigen::VectorXd const &x, Seg &&grad)
{
  double const n = x.norm();
  if (n > 0.0) { grad += w * x / n; }
  return n;
}

// Accumulates J^T g for per-point gradients g (row-major N x 3).
void chainPoints(PointJacobian const &pj, Points const &pointGrad, ParamVectord &out)
{
  Eigen::Map<Eigen::VectorXd const> flat(pointGrad.data(), pointGrad.size());
  out += pj.jacobian.transpose() * flat;
}

std::vector<int> allVertices(HandTemplate const &tmpl)
{
  std::vector<int> ids(tmpl.numVertices());
  for (size_t i = 0; i < ids.size(); ++i) { ids[i] = static_cast<int>(i); }
  return ids;
}

// Rotation regularizer |R(rot) - R_ref|_F with its gradient over the axis-angle.
double rotationDistance(Vec3d const &rot, Mat3d const &ref, Vec3d &grad)
{
  using D3 = Eigen::AutoDiffScalar<Eigen::Vector3d>;
  Vec3<D3> w;
  for (int i = 0; i < 3; ++i) { w(i) = D3(rot(i), 3, i); }
  Mat3<D3> const r = rodrigues<D3>(w);
  D3 sum(0.0, Eigen::Vector3d::Zero());
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      D3 const d = r(i, j) - ref(i, j);
      sum += d * d;
    }
  }
  double const n = std::sqrt(sum.value());
  grad = n > 0.0 ? Vec3d(sum.derivatives() / (2.0 * n)) : Vec3d::Zero();
  return n;
}

} // namespace

GradientTape stage1Loss(HandParams const &params, ChoirField const &target, BasisPointSet const &grid,
                        std::optional<HandParams> const &init, Stage1Config const &cfg)
{
  if (!target.hasHand()) { fail(ErrorCode::MissingField, "stage 1 needs a target with hand distances"); }
  if (grid.size() != target.size()) { fail(ErrorCode::LengthMismatch, "grid does not match target field"); }
  HandTemplate const &tmpl = handTemplate();
  PointJacobian const aj = anchorJacobian(tmpl, params);
  FrameTransform const &tf = target.transform;
  Points const anchors = tf.applyRows(aj.values);
  Eigen::VectorXd const &dists = *target.handDists;
  Index const m = target.size();

  Points anchorGrad = Points::Zero(kNumAnchors, 3);
  double rec = 0.0;
  for (Index j = 0; j < m; ++j) {
    int const a = target.assignment.map[j];
    Eigen::RowVector3d const diff = anchors.row(a) - grid.points.row(j);
    double const dist = diff.norm();
    double const r = dist - dists(j);
    rec += r * r;
    if (dist > 0.0) { anchorGrad.row(a) += (2.0 * r / (dist * m)) * diff; }
  }
  rec /= static_cast<double>(m);

  GradientTape tape;
  tape.terms.rec = rec;
  anchorGrad *= cfg.lambda1 * tf.scale;
  chainPoints(aj, anchorGrad, tape.gradient);

  auto betaGrad = tape.gradient.segment<kNumShape>(kShapeOffset);
  tape.terms.shape = addNorm(cfg.lambda2, params.beta, betaGrad);
  if (init) {
    auto thetaGrad = tape.gradient.segment<kNumPose>(kPoseOffset);
    tape.terms.pose = addNorm(cfg.lambda3, params.theta - init->theta, thetaGrad);
  }
  tape.value = cfg.lambda1 * rec + cfg.lambda2 * tape.terms.shape + cfg.lambda3 * tape.terms.pose;
  return tape;
}

Stage2Correspondences stage2Correspondences(HandPose const &pose, ChoirField const &target, KdTree const &object,
                                            int k, bool normalizeDensity)
{
  if (!target.hasContacts()) { fail(ErrorCode::MissingField, "stage 2 needs a target with contacts"); }
  if (k < 1) { fail(ErrorCode::InvalidArgument, "K must be at least 1"); }
  ContactGaussians const world = target.contacts->transformed(target.transform.inverse());
  Stage2Correspondences c;
  Index const n = pose.vertices.rows();
  c.anchor = nearestActiveAnchor(world, pose.vertices, pose.anchors);
  c.phi = Eigen::VectorXd::Zero(n);
  c.nearest.resize(n, k);
  for (Index i = 0; i < n; ++i) {
    Vec3d const v = pose.vertices.row(i).transpose();
    if (c.anchor[i] >= 0) { c.phi(i) = density(world, c.anchor[i], v); }
    auto const nn = object.knn(v, k);
    for (int j = 0; j < k; ++j) { c.nearest(i, j) = static_cast<int>(nn[j].index); }
  }
  double const peak = c.phi.maxCoeff();
  if (normalizeDensity && peak > 0.0) { c.phi /= peak; }
  return c;
}

GradientTape stage2Loss(HandParams const &params, ChoirField const &target, PointCloud const &object,
                        HandParams const &stage1, Stage2Config const &cfg, Stage2Correspondences const &corr)
{
  if (!target.hasContacts()) { fail(ErrorCode::MissingField, "stage 2 needs a target with contacts"); }
  if (!object.hasNormals()) { fail(ErrorCode::MissingField, "penetration term needs object normals"); }
  HandTemplate const &tmpl = handTemplate();
  static std::vector<int> const ids = allVertices(tmpl);
  PointJacobian const vj = vertexJacobian(tmpl, params, ids);
  Index const n = vj.values.rows();

  Points vertexGrad = Points::Zero(n, 3);
  GradientTape tape;
  for (Index i = 0; i < n; ++i) {
    Eigen::RowVector3d const v = vj.values.row(i);
    double const phi = corr.phi(i);
    if (phi > 0.0) {
      for (Index k = 0; k < corr.nearest.cols(); ++k) {
        Eigen::RowVector3d const d = v - object.points.row(corr.nearest(i, k));
        tape.terms.rec += phi * d.squaredNorm();
        vertexGrad.row(i) += cfg.lambda4 * 2.0 * phi * d;
      }
    }
    int const p = corr.nearest(i, 0);
    Eigen::RowVector3d const normal = object.normals.row(p);
    double const depth = -(v - object.points.row(p)).dot(normal);
    if (depth > 0.0) {
      tape.terms.pen += depth;
      vertexGrad.row(i) -= cfg.lambda5 * normal;
    }
  }
  chainPoints(vj, vertexGrad, tape.gradient);

  Vec3d rotGrad;
  double const rotDist = rotationDistance(params.rot, rodrigues<double>(stage1.rot), rotGrad);
  tape.gradient.segment<3>(kRotOffset) += cfg.lambda6 * cfg.eta1 * rotGrad;
  auto transGrad = tape.gradient.segment<3>(kTransOffset);
  double const transDist = addNorm(cfg.lambda6 * cfg.eta2, params.trans - stage1.trans, transGrad);
  tape.terms.pose = cfg.eta1 * rotDist + cfg.eta2 * transDist;

  auto betaGrad = tape.gradient.segment<kNumShape>(kShapeOffset);
  tape.terms.shape = addNorm(cfg.lambda2, params.beta, betaGrad);

  tape.value = cfg.lambda4 * tape.terms.rec + cfg.lambda5 * tape.terms.pen + cfg.lambda6 * tape.terms.pose +
               cfg.lambda2 * tape.terms.shape;
  return tape;
}

GradientTape stage2Loss(HandParams const &params, ChoirField const &target, PointCloud const &object,
                        HandParams const &stage1, Stage2Config const &cfg)
{
  KdTree const tree(object.points);
  return stage2Loss(params, target, object, stage1, cfg,
                    stage2Correspondences(forwardKinematics(params), target, tree, cfg.k, cfg.normalizeDensity));
}

double penetrationLoss(Points const &handVertices, PointCloud const &object)
{
  if (!object.hasNormals()) { fail(ErrorCode::MissingField, "penetration loss needs object normals"); }
  KdTree const tree(object.points);
  double pen = 0.0;
  for (Index i = 0; i < handVertices.rows(); ++i) {
    Vec3d const v = handVertices.row(i).transpose();
    Index const p = tree.nearest(v).index;
    pen += std::max(0.0, -(v - object.point(p)).dot(object.normal(p)));
  }
  return pen;
}

GradientTape penetrationLossWithGradient(HandParams const &params, PointCloud const &object,
                                         std::vector<int> const &nearest)
{
  if (!object.hasNormals()) { fail(ErrorCode::MissingField, "penetration loss needs object normals"); }
  HandTemplate const &tmpl = handTemplate();
  static std::vector<int> const ids = allVertices(tmpl);
  PointJacobian const vj = vertexJacobian(tmpl, params, ids);
  Points vertexGrad = Points::Zero(vj.values.rows(), 3);
  GradientTape tape;
  for (Index i = 0; i < vj.values.rows(); ++i) {
    Eigen::RowVector3d const normal = object.normals.row(nearest[i]);
    double const depth = -(vj.values.row(i) - object.points.row(nearest[i])).dot(normal);
    if (depth > 0.0) {
      tape.terms.pen += depth;
      vertexGrad.row(i) = -normal;
    }
  }
  chainPoints(vj, vertexGrad, tape.gradient);
  tape.value = tape.terms.pen;
  return tape;
}

namespace {

bool finite(GradientTape const &t) { return std::isfinite(t.value) && t.gradient.allFinite(); }

IterationRecord record(int iter, GradientTape const &t)
{
  return {iter, t.value, t.terms, t.gradient.norm()};
}

} // namespace

FitResult fitStage1(HandParams const &init, ChoirField const &target, BasisPointSet const &grid,
                    Stage1Config const &cfg, bool poseRegularizer)
{
  std::optional<HandParams> const reg = poseRegularizer ? std::optional<HandParams>(init) : std::nullopt;
  Adam adam(kNumParams, {.lr = cfg.lr});
  ParamVectord q = init.flatten();
  FitResult out;
  out.params = init;
  out.bestLoss = std::numeric_limits<double>::infinity();
  std::vector<double> bestHistory;
  for (int it = 0; it < cfg.maxIterations; ++it) {
    GradientTape const tape = stage1Loss(HandParams::unflatten(q), target, grid, reg, cfg);
    out.iterations = it + 1;
    if (!finite(tape)) {
      out.aborted = true;
      break;
    }
    out.trace.push_back(record(it, tape));
    if (it == 0) { out.firstLoss = tape.value; }
    if (tape.value < out.bestLoss) {
      out.bestLoss = tape.value;
      out.params = HandParams::unflatten(q);
    }
    bestHistory.push_back(out.bestLoss);
    out.convergedAt = it + 1;
    if (it >= cfg.patience && bestHistory[it - cfg.patience] - out.bestLoss < cfg.tolerance) { break; }
    q += adam.step(tape.gradient);
  }
  return out;
}

FitResult fitStage2(HandParams const &stage1, ChoirField const &target, PointCloud const &object,
                    Stage2Config const &cfg)
{
  KdTree const tree(object.points);
  Adam adam(kNumParams, {.lr = cfg.lr});
  ParamVectord q = stage1.flatten();
  FitResult out;
  out.params = stage1;
  out.bestLoss = std::numeric_limits<double>::infinity();
  Stage2Correspondences corr;
  for (int it = 0; it < cfg.maxIterations; ++it) {
    HandParams const current = HandParams::unflatten(q);
    if (it % cfg.refreshEvery == 0) { corr = stage2Correspondences(forwardKinematics(current), target, tree, cfg.k, cfg.normalizeDensity); }
    GradientTape const tape = stage2Loss(current, target, object, stage1, cfg, corr);
    out.iterations = it + 1;
    if (!finite(tape)) {
      out.aborted = true;
      break;
    }
    out.trace.push_back(record(it, tape));
    if (it == 0) { out.firstLoss = tape.value; }
    if (tape.value < out.bestLoss) {
      out.bestLoss = tape.value;
      out.params = current;
    }
    out.convergedAt = it + 1;
    q += adam.step(tape.gradient);
  }
  return out;
}

HandParams synthesisSeed(ChoirField const &target, BasisPointSet const &grid)
{
  (void)grid;
  HandParams seed;
  Points const anchors = forwardKinematics(seed).anchors;
  Vec3d const centroid = anchors.colwise().mean().transpose();
  Vec3d const gridCentre = target.transform.invert(Vec3d::Zero().eval());
  seed.trans = gridCentre - centroid;
  return seed;
}

FullFit fitFull(std::optional<HandParams> const &init, ChoirField const &target, PointCloud const &object,
                BasisPointSet const &grid, Stage1Config const &cfg1, Stage2Config const &cfg2)
{
  FullFit out;
  HandParams const start = init ? *init : synthesisSeed(target, grid);
  out.stage1 = fitStage1(start, target, grid, cfg1, init.has_value());
  out.params = out.stage1.params;
  if (target.hasContacts()) {
    out.stage2 = fitStage2(out.stage1.params, target, object, cfg2);
    out.params = out.stage2->params;
  }
  return out;
}

Eigen::VectorXd finiteDifferenceGradient(std::function<double(Eigen::VectorXd const &)> const &f,
                                         Eigen::VectorXd const &x, double h)
{
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Index i = 0; i < x.size(); ++i) {
    xp(i) = x(i) + h;
    double const fp = f(xp);
    xp(i) = x(i) - h;
    double const fm = f(xp);
    xp(i) = x(i);
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

double gradientRelativeError(Eigen::VectorXd const &analytic, Eigen::VectorXd const &numeric)
{
  double const scale = std::max(analytic.norm(), numeric.norm());
  return scale == 0.0 ? 0.0 : (analytic - numeric).norm() / scale;
}

std::string toJsonLine(IterationRecord const &rec)
{
  nlohmann::json j{{"iter", rec.iter},
                   {"loss", rec.loss},
                   {"loss_terms", {{"rec", rec.terms.rec}, {"shape", rec.terms.shape}, {"pose", rec.terms.pose},
                                   {"pen", rec.terms.pen}}},
                   {"grad_norm", rec.gradNorm}};
  return j.dump();
}

} // namespace choir
