#include "choir/metrics.hpp"
#include "choir/error.hpp"
#include "choir/knn.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>

namespace choir {

namespace {

void checkSameShape(Points const &a, Points const &b)
{
  if (a.rows() != b.rows() || a.rows() == 0) {
    fail(ErrorCode::LengthMismatch, "point sets differ in size: " + std::to_string(a.rows()) + " vs " +
                                        std::to_string(b.rows()));
  }
}

} // namespace

double mpjpe(Points const &pred, Points const &gt)
{
  checkSameShape(pred, gt);
  return 1000.0 * (pred - gt).rowwise().norm().mean();
}

double rootAlignedMpjpe(Points const &pred, Points const &gt)
{
  checkSameShape(pred, gt);
  Points const p = pred.rowwise() - pred.row(0);
  Points const g = gt.rowwise() - gt.row(0);
  return mpjpe(p, g);
}

double mpvpe(Points const &pred, Points const &gt) { return mpjpe(pred, gt); }

Vec3d VoxelBox::centre(int i, int j, int k) const
{
  return (Vec3d(lo.x() + i, lo.y() + j, lo.z() + k).array() + 0.5).matrix() * size;
}

namespace {

// Sample points sit a tiny irrational fraction off the voxel centres so that rays never graze
// vertices or edges of meshes built on the same lattice.
Vec3d const kJitter = 1e-6 * Vec3d(std::sqrt(2.0), std::sqrt(3.0), std::sqrt(5.0));

// Adds one vote per axis whose ray finds the voxel inside the faces listed in `faceIds`.
void castAxis(TriangleMesh const &mesh, std::vector<Index> const &faceIds, VoxelBox const &box, int axis,
              std::vector<std::uint8_t> &votes)
{
  int const u = (axis + 1) % 3, w = (axis + 2) % 3;
  int const nu = box.count(u), nw = box.count(w), na = box.count(axis);
  std::vector<std::vector<double>> hits(Index(nu) * nw);
  double const h = box.size;
  auto coord = [&](int ax, int i) { return (box.lo(ax) + i + 0.5 + kJitter(ax)) * h; };
  for (Index f : faceIds) {
    Vec3d const a = mesh.vertex(mesh.faces(f, 0)), b = mesh.vertex(mesh.faces(f, 1)),
                c = mesh.vertex(mesh.faces(f, 2));
    double const umin = std::min({a(u), b(u), c(u)}), umax = std::max({a(u), b(u), c(u)});
    double const wmin = std::min({a(w), b(w), c(w)}), wmax = std::max({a(w), b(w), c(w)});
    int const i0 = std::max(0, int(std::floor(umin / h - 0.5 - box.lo(u))));
    int const i1 = std::min(nu - 1, int(std::ceil(umax / h - 0.5 - box.lo(u))));
    int const j0 = std::max(0, int(std::floor(wmin / h - 0.5 - box.lo(w))));
    int const j1 = std::min(nw - 1, int(std::ceil(wmax / h - 0.5 - box.lo(w))));
    double const area = (b(u) - a(u)) * (c(w) - a(w)) - (c(u) - a(u)) * (b(w) - a(w));
    if (area == 0.0) { continue; }
    for (int i = i0; i <= i1; ++i) {
      double const pu = coord(u, i);
      for (int j = j0; j <= j1; ++j) {
        double const pw = coord(w, j);
        double const e0 = (b(u) - pu) * (c(w) - pw) - (c(u) - pu) * (b(w) - pw);
        double const e1 = (c(u) - pu) * (a(w) - pw) - (a(u) - pu) * (c(w) - pw);
        double const e2 = (a(u) - pu) * (b(w) - pw) - (b(u) - pu) * (a(w) - pw);
        bool const inside = (e0 > 0 && e1 > 0 && e2 > 0) || (e0 < 0 && e1 < 0 && e2 < 0);
        if (!inside) { continue; }
        hits[Index(j) * nu + i].push_back((e0 * a(axis) + e1 * b(axis) + e2 * c(axis)) / area);
      }
    }
  }
  for (int j = 0; j < nw; ++j) {
    for (int i = 0; i < nu; ++i) {
      auto &col = hits[Index(j) * nu + i];
      if (col.empty()) { continue; }
      std::sort(col.begin(), col.end());
      size_t crossed = 0;
      for (int k = 0; k < na; ++k) {
        double const pa = coord(axis, k);
        while (crossed < col.size() && col[crossed] < pa) { ++crossed; }
        if (crossed % 2 == 1) {
          Eigen::Vector3i idx;
          idx(axis) = k;
          idx(u) = i;
          idx(w) = j;
          ++votes[box.linear(idx.x(), idx.y(), idx.z())];
        }
      }
    }
  }
}

Eigen::AlignedBox3d bounds(TriangleMesh const &mesh)
{
  Eigen::AlignedBox3d b;
  for (Index i = 0; i < mesh.numVertices(); ++i) { b.extend(mesh.vertex(i)); }
  return b;
}

VoxelBox boxCovering(Eigen::AlignedBox3d const &b, double size)
{
  VoxelBox box;
  box.size = size;
  if (b.isEmpty()) { return box; }
  for (int a = 0; a < 3; ++a) {
    int const lo = int(std::floor(b.min()(a) / size)) - 1;
    int const hi = int(std::ceil(b.max()(a) / size)) + 1;
    box.lo(a) = lo;
    box.count(a) = std::max(0, hi - lo);
  }
  return box;
}

} // namespace

std::vector<std::uint8_t> voxelizeInside(TriangleMesh const &mesh, VoxelBox const &box)
{
  std::vector<std::uint8_t> inside(box.total(), 0);
  if (box.total() == 0) { return inside; }
  int components = 0;
  std::vector<int> const comp = faceComponents(mesh, &components);
  std::vector<std::vector<Index>> faceIds(components);
  for (Index f = 0; f < mesh.numFaces(); ++f) { faceIds[comp[f]].push_back(f); }
  std::vector<std::uint8_t> votes(box.total());
  for (auto const &ids : faceIds) {
    std::fill(votes.begin(), votes.end(), 0);
    for (int axis = 0; axis < 3; ++axis) { castAxis(mesh, ids, box, axis, votes); }
    for (Index v = 0; v < box.total(); ++v) { inside[v] |= votes[v] >= 2 ? 1 : 0; }
  }
  return inside;
}

double intersectionVolume(TriangleMesh const &a, TriangleMesh const &b, double voxelSize)
{
  Eigen::AlignedBox3d const overlap = bounds(a).intersection(bounds(b));
  if (overlap.isEmpty()) { return 0.0; }
  VoxelBox const box = boxCovering(overlap, voxelSize);
  std::vector<std::uint8_t> const ia = voxelizeInside(a, box);
  std::vector<std::uint8_t> const ib = voxelizeInside(b, box);
  Index both = 0;
  for (Index v = 0; v < box.total(); ++v) { both += ia[v] & ib[v]; }
  return double(both) * std::pow(voxelSize, 3) * 1e6;
}

double voxelVolume(TriangleMesh const &mesh, double voxelSize)
{
  VoxelBox const box = boxCovering(bounds(mesh), voxelSize);
  std::vector<std::uint8_t> const in = voxelizeInside(mesh, box);
  return double(std::count(in.begin(), in.end(), 1)) * std::pow(voxelSize, 3) * 1e6;
}

std::vector<bool> contactMap(HandPose const &hand, Points const &object, double threshold)
{
  if (object.rows() == 0) { fail(ErrorCode::InvalidArgument, "contact map needs a non-empty object"); }
  TriangleMesh const fine = subdivideMidpoint(hand.mesh());
  KdTree const tree(object);
  std::vector<bool> out(fine.numVertices());
  for (Index i = 0; i < fine.numVertices(); ++i) { out[i] = tree.nearest(fine.vertex(i)).distance <= threshold; }
  return out;
}

ContactScores contactScores(std::vector<bool> const &pred, std::vector<bool> const &gt)
{
  if (pred.size() != gt.size()) { fail(ErrorCode::LengthMismatch, "contact maps differ in size"); }
  Index tp = 0, predPos = 0, gtPos = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    predPos += pred[i];
    gtPos += gt[i];
    tp += pred[i] && gt[i];
  }
  ContactScores s;
  s.precision = predPos > 0 ? double(tp) / predPos : 0.0;
  s.recall = gtPos > 0 ? double(tp) / gtPos : 0.0;
  s.f1 = s.precision + s.recall > 0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

ContactScores contactPrf(HandPose const &pred, HandPose const &gt, Points const &object, double threshold)
{
  return contactScores(contactMap(pred, object, threshold), contactMap(gt, object, threshold));
}

SampleMetrics evaluatePair(HandPose const &pred, HandPose const &gt, TriangleMesh const &objectMesh,
                           Points const &objectCloud)
{
  SampleMetrics m;
  m.mpjpe = mpjpe(pred.joints, gt.joints);
  m.rMpjpe = rootAlignedMpjpe(pred.joints, gt.joints);
  m.iv = intersectionVolume(pred.mesh(), objectMesh);
  m.contact = contactPrf(pred, gt, objectCloud);
  return m;
}

MetricsReport summarize(std::vector<SampleMetrics> const &samples)
{
  MetricsReport r;
  r.count = static_cast<Index>(samples.size());
  if (samples.empty()) { return r; }
  auto stat = [&](auto get) {
    Eigen::VectorXd v(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) { v(i) = get(samples[i]); }
    Stat s;
    s.mean = v.mean();
    s.std = std::sqrt((v.array() - s.mean).square().mean());
    return s;
  };
  r.mpjpe = stat([](SampleMetrics const &m) { return m.mpjpe; });
  r.rMpjpe = stat([](SampleMetrics const &m) { return m.rMpjpe; });
  r.iv = stat([](SampleMetrics const &m) { return m.iv; });
  r.precision = stat([](SampleMetrics const &m) { return m.contact.precision; });
  r.recall = stat([](SampleMetrics const &m) { return m.contact.recall; });
  r.f1 = stat([](SampleMetrics const &m) { return m.contact.f1; });
  return r;
}

std::string toJson(MetricsReport const &report)
{
  auto stat = [](Stat const &s) { return nlohmann::json{{"mean", s.mean}, {"std", s.std}}; };
  nlohmann::json j;
  j["count"] = report.count;
  j["mpjpe_mm"] = stat(report.mpjpe);
  j["r_mpjpe_mm"] = stat(report.rMpjpe);
  j["iv_cm3"] = stat(report.iv);
  j["precision"] = stat(report.precision);
  j["recall"] = stat(report.recall);
  j["f1"] = stat(report.f1);
  j["sd"] = "n/a";
  return j.dump(2);
}

} // namespace choir
