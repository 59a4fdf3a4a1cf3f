#include "choir/dataset.hpp"
#include "choir/error.hpp"
#include "choir/mesh_io.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

namespace choir {

namespace fs = std::filesystem;

nlohmann::json toJson(HandParams const &p)
{
  auto vec = [](auto const &v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  return {{"theta", vec(p.theta)}, {"beta", vec(p.beta)}, {"rot", vec(p.rot)}, {"trans", vec(p.trans)}};
}

HandParams handParamsFromJson(nlohmann::json const &j)
{
  HandParams p;
  auto fill = [&](char const *key, auto &dst) {
    if (!j.contains(key)) { fail(ErrorCode::MissingField, std::string("hand parameters lack '") + key + "'"); }
    auto const v = j.at(key).get<std::vector<double>>();
    if (static_cast<Index>(v.size()) != dst.size()) {
      fail(ErrorCode::LengthMismatch, std::string("'") + key + "' needs " + std::to_string(dst.size()) + " values");
    }
    for (Index i = 0; i < dst.size(); ++i) { dst(i) = v[i]; }
  };
  fill("theta", p.theta);
  fill("beta", p.beta);
  fill("rot", p.rot);
  fill("trans", p.trans);
  if (!p.allFinite()) { fail(ErrorCode::NonFinite, "hand parameters must be finite"); }
  return p;
}

namespace {

nlohmann::json readJsonFile(std::string const &path)
{
  std::ifstream in(path);
  if (!in) { fail(ErrorCode::Io, "cannot open " + path); }
  try {
    return nlohmann::json::parse(in);
  } catch (nlohmann::json::exception const &e) {
    fail(ErrorCode::Malformed, path + ": " + e.what());
  }
}

void writeTextFile(std::string const &path, std::string const &text)
{
  std::ofstream out(path);
  if (!out) { fail(ErrorCode::Io, "cannot write " + path); }
  out << text << '\n';
}

} // namespace

HandParams readHandParams(std::string const &path) { return handParamsFromJson(readJsonFile(path)); }

void writeHandParams(std::string const &path, HandParams const &params)
{
  writeTextFile(path, toJson(params).dump(2));
}

// ---------------------------------------------------------------------------------------------
// Ground-truth grasps

int countTouching(Points const &vertices, ShapeSpec const &shape, double band)
{
  int n = 0;
  for (Index i = 0; i < vertices.rows(); ++i) { n += signedDistance(shape, vertices.row(i).transpose()) <= band; }
  return n;
}

namespace {

struct ApproachFrame
{
  Vec3d target;  // point the palm centre approaches
  Vec3d outward; // approach comes from target + outward
  Vec3d fingers; // finger direction, perpendicular to outward
};

ApproachFrame approachFrame(ShapeSpec const &s)
{
  switch (s.kind) {
  case ShapeKind::Sphere: return {Vec3d::Zero(), Vec3d::UnitZ(), Vec3d::UnitX()};
  case ShapeKind::Box: return {Vec3d::Zero(), Vec3d::UnitZ(), Vec3d::UnitX()};
  case ShapeKind::Cylinder: return {Vec3d::Zero(), Vec3d::UnitX(), Vec3d::UnitY()};
  case ShapeKind::Torus: return {Vec3d(s.dims(0), 0, 0), Vec3d::UnitZ(), Vec3d::UnitX()};
  }
  return {};
}

Mat3d randomTilt(std::mt19937_64 &rng, double maxAngle)
{
  std::normal_distribution<double> normal;
  Vec3d axis(normal(rng), normal(rng), normal(rng));
  double const angle = std::uniform_real_distribution<double>(0.0, maxAngle)(rng);
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

class GraspBuilder
{
public:
  GraspBuilder(ShapeSpec const &shape, GraspConfig const &cfg)
    : shape_(shape)
    , cfg_(cfg)
    , tmpl_(handTemplate())
  {
  }

  double minDistance(HandParams const &p, std::vector<int> const &ids) const
  {
    Points const v = posedVertices(tmpl_, p);
    double best = std::numeric_limits<double>::infinity();
    for (int i : ids) { best = std::min(best, signedDistance(shape_, v.row(i).transpose())); }
    return best;
  }

  std::vector<int> verticesFrom(int firstBone, int lastBone) const
  {
    std::vector<int> ids;
    for (int b = firstBone; b <= lastBone; ++b) {
      auto const v = tmpl_.boneVertices(b);
      ids.insert(ids.end(), v.begin(), v.end());
    }
    return ids;
  }

  // Moves the palm along `outward` until its deepest vertex sits at -depth.
  void placePalm(HandParams &p, ApproachFrame const &f) const
  {
    std::vector<int> const palm = tmpl_.boneVertices(0);
    p.trans.setZero();
    Points const v = posedVertices(tmpl_, p);
    Vec3d centroid = Vec3d::Zero();
    for (int i : palm) { centroid += v.row(i).transpose(); }
    centroid /= double(palm.size());
    auto at = [&](double h) {
      HandParams q = p;
      q.trans = f.target - centroid + h * f.outward;
      return q;
    };
    double lo = 0.0, hi = 0.3;
    for (int it = 0; it < 60; ++it) {
      double const mid = 0.5 * (lo + hi);
      (minDistance(at(mid), palm) < -cfg_.depth ? lo : hi) = mid;
    }
    p = at(hi);
  }

  // Flexes one joint until the distal part of its finger reaches -depth.
  void closeJoint(HandParams &p, int finger, int phalanx) const
  {
    int const bone = fingerBone(finger, phalanx);
    int const dof = 3 * (bone - 1);
    std::vector<int> const ids = verticesFrom(bone, fingerBone(finger, 2));
    double const maxFlex = phalanx == 2 ? 1.2 : 1.6;
    auto depthAt = [&](double a) {
      HandParams q = p;
      q.theta(dof) = a;
      return minDistance(q, ids) + cfg_.depth;
    };
    double lo, hi;
    if (depthAt(0.0) < 0.0) {
      lo = -0.6;
      hi = 0.0;
      if (depthAt(lo) < 0.0) {
        p.theta(dof) = lo;
        return;
      }
    } else {
      double a = 0.0;
      constexpr double step = 0.05;
      while (a < maxFlex && depthAt(std::min(a + step, maxFlex)) > 0.0) { a = std::min(a + step, maxFlex); }
      if (a >= maxFlex) {
        p.theta(dof) = maxFlex;
        return;
      }
      lo = std::min(a + step, maxFlex);
      hi = a;
    }
    // depthAt(lo) < 0 <= depthAt(hi); keep the side that is not deeper than -depth.
    for (int it = 0; it < 40; ++it) {
      double const mid = 0.5 * (lo + hi);
      (depthAt(mid) < 0.0 ? lo : hi) = mid;
    }
    p.theta(dof) = hi;
  }

  ShapeSpec shape_;
  GraspConfig cfg_;
  HandTemplate const &tmpl_;
};

} // namespace

HandParams generateGrasp(ShapeSpec const &shape, std::mt19937_64 &rng, GraspConfig const &cfg)
{
  GraspBuilder const builder(shape, cfg);
  std::normal_distribution<double> normal;
  HandParams p;
  for (int attempt = 0; attempt < cfg.maxAttempts; ++attempt) {
    p = HandParams{};
    for (int k = 0; k < kNumShape; ++k) { p.beta(k) = std::clamp(cfg.betaSigma * normal(rng), -2.0, 2.0); }
    ApproachFrame f = approachFrame(shape);
    Mat3d const tilt = randomTilt(rng, cfg.approachJitter);
    f.outward = tilt * f.outward;
    double const twist = std::uniform_real_distribution<double>(-cfg.twistJitter, cfg.twistJitter)(rng);
    f.fingers = Eigen::AngleAxisd(twist, f.outward) * (tilt * f.fingers);
    Mat3d r;
    r.col(2) = -f.outward;
    r.col(1) = (f.fingers - f.fingers.dot(r.col(2)) * r.col(2)).normalized();
    r.col(0) = r.col(1).cross(r.col(2));
    p.rot = rotationLog(r);
    for (int finger = 0; finger < 4; ++finger) { p.theta(3 * (fingerBone(finger, 0) - 1) + 2) = 0.05 * normal(rng); }
    builder.placePalm(p, f);
    for (int finger = 0; finger < 5; ++finger) {
      for (int ph = 0; ph < 3; ++ph) { builder.closeJoint(p, finger, ph); }
    }
    if (countTouching(posedVertices(handTemplate(), p), shape, cfg.contactBand) >= cfg.minContacts) { return p; }
  }
  fail(ErrorCode::DegenerateInput, "no grasp with enough contacts after " + std::to_string(cfg.maxAttempts) +
                                       " attempts");
}

// ---------------------------------------------------------------------------------------------
// Dataset files

std::string toString(Split split)
{
  switch (split) {
  case Split::Train: return "train";
  case Split::Val: return "val";
  case Split::Test: return "test";
  }
  return "?";
}

Split splitFromString(std::string const &name)
{
  for (Split s : {Split::Train, Split::Val, Split::Test}) {
    if (toString(s) == name) { return s; }
  }
  fail(ErrorCode::InvalidArgument, "unknown split '" + name + "'");
}

std::vector<Split> assignSplits(int grasps, std::uint64_t seed, double trainFraction, double valFraction)
{
  std::vector<int> order(grasps);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(deriveSeed(seed, 0x5b11));
  std::shuffle(order.begin(), order.end(), rng);
  int const nTrain = static_cast<int>(std::lround(trainFraction * grasps));
  int const nVal = static_cast<int>(std::lround(valFraction * grasps));
  std::vector<Split> out(grasps, Split::Test);
  for (int i = 0; i < grasps; ++i) {
    if (i < nTrain) {
      out[order[i]] = Split::Train;
    } else if (i < nTrain + nVal) {
      out[order[i]] = Split::Val;
    }
  }
  return out;
}

ObjectData objectData(ShapeSpec const &shape, int cloudPoints, std::uint64_t cloudSeed)
{
  ObjectData d;
  d.mesh = shapeMesh(shape);
  d.cloud = sampleSurfacePoints(d.mesh, cloudPoints, cloudSeed);
  return d;
}

ObjectData loadObject(GraspSample const &s, std::string const &baseDir, int cloudPoints)
{
  ObjectData d;
  d.mesh = readObj((fs::path(baseDir) / s.objectPath).string());
  d.cloud = sampleSurfacePoints(d.mesh, cloudPoints, s.cloudSeed);
  return d;
}

std::vector<GraspSample> generateDataset(DatasetConfig const &cfg, std::string const &outDir)
{
  if (cfg.grasps < 1) { fail(ErrorCode::InvalidArgument, "dataset needs at least one grasp"); }
  fs::path const root(outDir);
  std::error_code ec;
  for (char const *sub : {"objects", "clouds", "choir"}) {
    fs::create_directories(root / sub, ec);
    if (ec) { fail(ErrorCode::Io, "cannot create " + (root / sub).string() + ": " + ec.message()); }
  }
  BasisPointSet const grid = buildBpsGrid(cfg.gridResolution, cfg.gridExtent);
  std::vector<Split> const splits = assignSplits(cfg.grasps, cfg.seed, cfg.trainFraction, cfg.valFraction);
  std::array const kinds{ShapeKind::Sphere, ShapeKind::Box, ShapeKind::Cylinder, ShapeKind::Torus};

  std::vector<GraspSample> samples;
  for (int g = 0; g < cfg.grasps; ++g) {
    std::mt19937_64 rng(deriveSeed(cfg.seed, 1, static_cast<std::uint64_t>(g)));
    ShapeSpec const shape = randomShape(kinds[g % kinds.size()], rng);
    HandParams const gt = generateGrasp(shape, rng, cfg.grasp);
    std::uint64_t const cloudSeed = deriveSeed(cfg.seed, 2, static_cast<std::uint64_t>(g));
    ObjectData const obj = objectData(shape, cfg.cloudPoints, cloudSeed);

    char name[32];
    std::snprintf(name, sizeof(name), "grasp_%05d", g);
    GraspSample base;
    base.grasp = g;
    base.shape = shape;
    base.objectPath = std::string("objects/") + name + ".obj";
    base.cloudPath = std::string("clouds/") + name + ".pcld";
    base.choirPath = std::string("choir/") + name + ".chor";
    base.cloudSeed = cloudSeed;
    base.gt = gt;
    base.split = splits[g];
    writeObj((root / base.objectPath).string(), obj.mesh);
    writePointCloud((root / base.cloudPath).string(), obj.cloud);
    writeBytes((root / base.choirPath).string(), serialize(encodeChoir(obj.cloud, forwardKinematics(gt), grid)));

    int const copies = base.split == Split::Train ? cfg.trainCopies : cfg.evalCopies;
    for (int c = 0; c < copies; ++c) {
      GraspSample s = base;
      s.copy = c;
      char id[48];
      std::snprintf(id, sizeof(id), "%s_p%02d", name, c);
      s.id = id;
      s.perturbed = perturbParams(gt, deriveSeed(cfg.seed, 3, (std::uint64_t(g) << 16) | std::uint64_t(c)),
                                  cfg.perturbation);
      samples.push_back(std::move(s));
    }
  }
  writeManifest((root / "manifest.json").string(), samples);
  return samples;
}

nlohmann::json toJson(GraspSample const &s)
{
  return {{"id", s.id},
          {"grasp", s.grasp},
          {"copy", s.copy},
          {"shape", {{"kind", toString(s.shape.kind)}, {"dims", {s.shape.dims(0), s.shape.dims(1), s.shape.dims(2)}}}},
          {"object", s.objectPath},
          {"cloud", s.cloudPath},
          {"cloud_seed", s.cloudSeed},
          {"choir", s.choirPath},
          {"gt", toJson(s.gt)},
          {"perturbed", toJson(s.perturbed)},
          {"split", toString(s.split)}};
}

GraspSample graspSampleFromJson(nlohmann::json const &j)
{
  try {
    GraspSample s;
    s.id = j.at("id").get<std::string>();
    s.grasp = j.at("grasp").get<int>();
    s.copy = j.at("copy").get<int>();
    s.shape.kind = shapeKindFromString(j.at("shape").at("kind").get<std::string>());
    auto const dims = j.at("shape").at("dims").get<std::vector<double>>();
    if (dims.size() != 3) { fail(ErrorCode::LengthMismatch, "shape dims need 3 values"); }
    s.shape.dims = Vec3d(dims[0], dims[1], dims[2]);
    s.objectPath = j.at("object").get<std::string>();
    s.cloudPath = j.at("cloud").get<std::string>();
    s.cloudSeed = j.at("cloud_seed").get<std::uint64_t>();
    s.choirPath = j.at("choir").get<std::string>();
    s.gt = handParamsFromJson(j.at("gt"));
    s.perturbed = handParamsFromJson(j.at("perturbed"));
    s.split = splitFromString(j.at("split").get<std::string>());
    return s;
  } catch (nlohmann::json::exception const &e) {
    fail(ErrorCode::MissingField, std::string("manifest record: ") + e.what());
  }
}

void writeManifest(std::string const &path, std::vector<GraspSample> const &samples)
{
  nlohmann::json j = nlohmann::json::array();
  for (auto const &s : samples) { j.push_back(toJson(s)); }
  writeTextFile(path, j.dump(1));
}

std::vector<GraspSample> readManifest(std::string const &path)
{
  nlohmann::json const j = readJsonFile(path);
  if (!j.is_array()) { fail(ErrorCode::Malformed, path + ": manifest must be a JSON array"); }
  std::vector<GraspSample> out;
  for (auto const &rec : j) { out.push_back(graspSampleFromJson(rec)); }
  return out;
}

std::vector<GraspSample> uniqueGrasps(std::vector<GraspSample> const &samples, std::optional<Split> split)
{
  std::vector<GraspSample> out;
  std::vector<bool> seen;
  for (auto const &s : samples) {
    if (split && s.split != *split) { continue; }
    if (s.grasp >= static_cast<int>(seen.size())) { seen.resize(s.grasp + 1, false); }
    if (seen[s.grasp]) { continue; }
    seen[s.grasp] = true;
    out.push_back(s);
  }
  return out;
}

} // namespace choir
