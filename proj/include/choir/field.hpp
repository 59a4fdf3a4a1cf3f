#pragma once

#include "choir/contacts.hpp"
#include "choir/geometry.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace choir {

/// Maps every basis point to the anchor it measures.
struct AnchorAssignment
{
  enum class Scheme : std::uint8_t { Ordered = 0, Shuffled = 1 };

  Scheme scheme = Scheme::Ordered;
  std::uint64_t seed = 0;
  std::vector<int> map;

  /// Repeating 0..31 pattern.
  static AnchorAssignment ordered(Index m);
  /// Seeded permutation of the ordered pattern.
  static AnchorAssignment shuffled(Index m, std::uint64_t seed);
  static AnchorAssignment make(Scheme scheme, Index m, std::uint64_t seed);

  Index size() const { return static_cast<Index>(map.size()); }
  bool operator==(AnchorAssignment const &) const = default;
};

/// Object BPS distances, basis-to-anchor distances and contact Gaussians, all in the grid frame.
/// Hand distances are absent in synthesis contexts; contacts are absent in refinement observations.
struct ChoirField
{
  Eigen::VectorXd objectBps;
  std::optional<Eigen::VectorXd> handDists;
  std::optional<ContactGaussians> contacts;
  AnchorAssignment assignment;
  FrameTransform transform;

  Index size() const { return objectBps.size(); }
  bool hasHand() const { return handDists.has_value(); }
  bool hasContacts() const { return contacts.has_value(); }
};

/// Distance from every basis point to its nearest cloud point.
Eigen::VectorXd encodeObject(PointCloud const &cloud, BasisPointSet const &grid);

/// Distance from every basis point to its assigned anchor.
Eigen::VectorXd encodeHand(Points const &anchors, BasisPointSet const &grid, AnchorAssignment const &assignment);

ChoirField assemble(Eigen::VectorXd objectBps, std::optional<Eigen::VectorXd> handDists,
                    std::optional<ContactGaussians> contacts, AnchorAssignment assignment = {},
                    FrameTransform transform = {});

struct EncodeOptions
{
  AnchorAssignment::Scheme scheme = AnchorAssignment::Scheme::Ordered;
  std::uint64_t assignmentSeed = 0;
  bool withHand = true;
  bool withContacts = true;
  ContactConfig contact;
};

/// Full pipeline for one hand-object pair given in world coordinates: normalize into the grid,
/// encode object, hand and contacts.
ChoirField encodeChoir(PointCloud const &object, HandPose const &hand, BasisPointSet const &grid,
                       EncodeOptions const &opt = {});
ChoirField encodeObjectOnly(PointCloud const &object, BasisPointSet const &grid);

// Binary layout: "CHOR", u8 version, u32 M, u8 flags (bit0 hand, bit1 contacts, bit2 shuffled
// assignment), f32 object_bps[M], [f32 hand_dists[M]], [f32 contacts[32*9], u32 active mask],
// f32 transform[4] (scale, tx, ty, tz), [u64 assignment seed when bit2].
inline constexpr std::uint8_t kChoirVersion = 1;
std::vector<std::uint8_t> serialize(ChoirField const &field);
ChoirField deserialize(std::vector<std::uint8_t> const &bytes);

std::string toJson(ChoirField const &field);

/// Field with every value rounded through f32, i.e. what a serialize/deserialize roundtrip yields.
ChoirField roundedToFloat(ChoirField const &field);

} // namespace choir
