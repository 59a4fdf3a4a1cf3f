#include "choir/field.hpp"
#include "choir/binary.hpp"
#include "choir/error.hpp"
#include "choir/knn.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <random>

namespace choir {

AnchorAssignment AnchorAssignment::ordered(Index m)
{
  AnchorAssignment a;
  a.map.resize(m);
  for (Index j = 0; j < m; ++j) { a.map[j] = static_cast<int>(j % kNumAnchors); }
  return a;
}

AnchorAssignment AnchorAssignment::shuffled(Index m, std::uint64_t seed)
{
  AnchorAssignment a = ordered(m);
  a.scheme = Scheme::Shuffled;
  a.seed = seed;
  std::mt19937_64 rng(seed);
  std::shuffle(a.map.begin(), a.map.end(), rng);
  return a;
}

AnchorAssignment AnchorAssignment::make(Scheme scheme, Index m, std::uint64_t seed)
{
  return scheme == Scheme::Ordered ? ordered(m) : shuffled(m, seed);
}

Eigen::VectorXd encodeObject(PointCloud const &cloud, BasisPointSet const &grid)
{
  if (cloud.size() == 0) { fail(ErrorCode::InvalidArgument, "cannot encode an empty cloud"); }
  KdTree tree(cloud.points);
  Eigen::VectorXd out(grid.size());
  for (Index j = 0; j < grid.size(); ++j) { out(j) = tree.nearest(grid.points.row(j).transpose()).distance; }
  return out;
}

Eigen::VectorXd encodeHand(Points const &anchors, BasisPointSet const &grid, AnchorAssignment const &assignment)
{
  if (assignment.size() != grid.size()) { fail(ErrorCode::LengthMismatch, "assignment does not match grid size"); }
  if (anchors.rows() != kNumAnchors) { fail(ErrorCode::InvalidArgument, "expected 32 anchors"); }
  Eigen::VectorXd out(grid.size());
  for (Index j = 0; j < grid.size(); ++j) { out(j) = (grid.points.row(j) - anchors.row(assignment.map[j])).norm(); }
  return out;
}

ChoirField assemble(Eigen::VectorXd objectBps, std::optional<Eigen::VectorXd> handDists,
                    std::optional<ContactGaussians> contacts, AnchorAssignment assignment, FrameTransform transform)
{
  if (handDists && handDists->size() != objectBps.size()) {
    fail(ErrorCode::LengthMismatch, "object and hand fields differ in length");
  }
  if (assignment.map.empty()) { assignment = AnchorAssignment::ordered(objectBps.size()); }
  if (assignment.size() != objectBps.size()) { fail(ErrorCode::LengthMismatch, "assignment does not match field size"); }
  ChoirField f;
  f.objectBps = std::move(objectBps);
  f.handDists = std::move(handDists);
  f.contacts = std::move(contacts);
  f.assignment = std::move(assignment);
  f.transform = transform;
  return f;
}

ChoirField encodeChoir(PointCloud const &object, HandPose const &hand, BasisPointSet const &grid,
                       EncodeOptions const &opt)
{
  NormalizedPair const n = normalizeToGrid(object, hand, grid);
  AnchorAssignment assignment = AnchorAssignment::make(opt.scheme, grid.size(), opt.assignmentSeed);
  std::optional<Eigen::VectorXd> hd;
  if (opt.withHand) { hd = encodeHand(n.hand.anchors, grid, assignment); }
  std::optional<ContactGaussians> contacts;
  if (opt.withContacts) {
    // Weights are counted in world units so lambda keeps its metric meaning.
    contacts = encodeContacts(hand, object, opt.contact).transformed(n.transform);
  }
  return assemble(encodeObject(n.object, grid), std::move(hd), std::move(contacts), std::move(assignment), n.transform);
}

ChoirField encodeObjectOnly(PointCloud const &object, BasisPointSet const &grid)
{
  auto [cloud, tf] = normalizeToGrid(object, grid);
  return assemble(encodeObject(cloud, grid), std::nullopt, std::nullopt, {}, tf);
}

std::vector<std::uint8_t> serialize(ChoirField const &field)
{
  binary::Writer w;
  w.magic("CHOR");
  w.put(kChoirVersion);
  w.put(static_cast<std::uint32_t>(field.size()));
  bool const shuffled = field.assignment.scheme == AnchorAssignment::Scheme::Shuffled;
  std::uint8_t const flags = (field.hasHand() ? 1 : 0) | (field.hasContacts() ? 2 : 0) | (shuffled ? 4 : 0);
  w.put(flags);
  for (Index j = 0; j < field.size(); ++j) { w.f32(field.objectBps(j)); }
  if (field.hasHand()) {
    for (Index j = 0; j < field.size(); ++j) { w.f32((*field.handDists)(j)); }
  }
  if (field.hasContacts()) {
    auto const packed = field.contacts->packed();
    for (int a = 0; a < kNumAnchors; ++a) {
      for (int c = 0; c < 9; ++c) { w.f32(packed(a, c)); }
    }
    w.put(static_cast<std::uint32_t>(field.contacts->active.to_ulong()));
  }
  w.f32(field.transform.scale);
  for (int c = 0; c < 3; ++c) { w.f32(field.transform.translation(c)); }
  if (shuffled) { w.put(field.assignment.seed); }
  return w.take();
}

ChoirField deserialize(std::vector<std::uint8_t> const &bytes)
{
  binary::Reader r(bytes);
  r.expectMagic("CHOR");
  size_t const versionAt = r.offset();
  auto const version = r.get<std::uint8_t>();
  if (version != kChoirVersion) {
    fail(ErrorCode::UnsupportedVersion,
         "unsupported CHOIR version " + std::to_string(version) + " at byte offset " + std::to_string(versionAt));
  }
  auto const m = r.get<std::uint32_t>();
  size_t const flagsAt = r.offset();
  auto const flags = r.get<std::uint8_t>();
  if (flags & ~0x7u) { fail(ErrorCode::Malformed, "unknown flag bits at byte offset " + std::to_string(flagsAt)); }
  ChoirField f;
  f.objectBps.resize(m);
  for (Index j = 0; j < m; ++j) { f.objectBps(j) = r.f32(); }
  if (flags & 1) {
    Eigen::VectorXd hd(m);
    for (Index j = 0; j < m; ++j) { hd(j) = r.f32(); }
    f.handDists = std::move(hd);
  }
  if (flags & 2) {
    Eigen::Matrix<double, kNumAnchors, 9> packed;
    for (int a = 0; a < kNumAnchors; ++a) {
      for (int c = 0; c < 9; ++c) { packed(a, c) = r.f32(); }
    }
    auto const mask = r.get<std::uint32_t>();
    f.contacts = ContactGaussians::fromPacked(packed, std::bitset<kNumAnchors>(mask));
  }
  f.transform.scale = r.f32();
  for (int c = 0; c < 3; ++c) { f.transform.translation(c) = r.f32(); }
  if (flags & 4) {
    f.assignment = AnchorAssignment::shuffled(m, r.get<std::uint64_t>());
  } else {
    f.assignment = AnchorAssignment::ordered(m);
  }
  if (!r.atEnd()) { fail(ErrorCode::Malformed, "trailing bytes at byte offset " + std::to_string(r.offset())); }
  return f;
}

ChoirField roundedToFloat(ChoirField const &field)
{
  auto round = [](auto const &m) { return m.template cast<float>().template cast<double>().eval(); };
  ChoirField out = field;
  out.objectBps = round(field.objectBps);
  if (out.handDists) { *out.handDists = round(*field.handDists); }
  if (out.contacts) {
    out.contacts->mean = round(field.contacts->mean);
    out.contacts->chol = round(field.contacts->chol);
  }
  out.transform.scale = static_cast<double>(static_cast<float>(field.transform.scale));
  out.transform.translation = round(field.transform.translation);
  return out;
}

std::string toJson(ChoirField const &field)
{
  using nlohmann::json;
  auto vec = [](Eigen::VectorXd const &v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  json j;
  j["M"] = field.size();
  j["object_bps"] = vec(field.objectBps);
  j["hand_dists"] = field.hasHand() ? json(vec(*field.handDists)) : json(nullptr);
  if (field.hasContacts()) {
    json rows = json::array();
    auto const packed = field.contacts->packed();
    for (int a = 0; a < kNumAnchors; ++a) {
      std::vector<double> row(9);
      for (int c = 0; c < 9; ++c) { row[c] = packed(a, c); }
      rows.push_back({{"active", bool(field.contacts->active[a])}, {"mu_l", row}});
    }
    j["contacts"] = rows;
  } else {
    j["contacts"] = nullptr;
  }
  j["assignment"] = {{"scheme", field.assignment.scheme == AnchorAssignment::Scheme::Ordered ? "ordered" : "shuffled"},
                     {"seed", field.assignment.seed}};
  j["transform"] = {{"scale", field.transform.scale},
                    {"translation", {field.transform.translation.x(), field.transform.translation.y(),
                                     field.transform.translation.z()}}};
  return j.dump();
}

} // namespace choir
