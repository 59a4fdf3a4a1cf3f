#pragma once

#include "choir/geometry.hpp"
#include "choir/hand.hpp"

#include <string>
#include <vector>

namespace choir {

/// Mean per-joint Euclidean error in millimetres.
double mpjpe(Points const &pred, Points const &gt);
/// MPJPE after subtracting the wrist (joint 0) from both sets.
double rootAlignedMpjpe(Points const &pred, Points const &gt);
/// Mean per-vertex error in millimetres.
double mpvpe(Points const &pred, Points const &gt);

/// Regular voxel lattice with centres at (i + 0.5) * size.
struct VoxelBox
{
  Eigen::Vector3i lo = Eigen::Vector3i::Zero(); // first voxel index per axis
  Eigen::Vector3i count = Eigen::Vector3i::Zero();
  double size = 0.001;

  Index total() const { return Index(count.x()) * count.y() * count.z(); }
  Index linear(int i, int j, int k) const { return (Index(k) * count.y() + j) * count.x() + i; }
  Vec3d centre(int i, int j, int k) const;
};

/// Voxels whose centre lies inside the closed mesh: parity ray casts along x, y and z with a
/// majority vote. Meshes with several connected components are treated as the union of the
/// components, each tested on its own.
std::vector<std::uint8_t> voxelizeInside(TriangleMesh const &mesh, VoxelBox const &box);

/// Volume of the overlap of two closed meshes on a voxel grid, in cm^3.
double intersectionVolume(TriangleMesh const &a, TriangleMesh const &b, double voxelSize = 0.001);
/// Volume enclosed by a closed mesh on the same voxel grid, in cm^3.
double voxelVolume(TriangleMesh const &mesh, double voxelSize = 0.001);

struct ContactScores
{
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Per-vertex contact flags of the once-subdivided hand surface: within `threshold` of the
/// nearest object point.
std::vector<bool> contactMap(HandPose const &hand, Points const &object, double threshold = 0.002);
ContactScores contactScores(std::vector<bool> const &pred, std::vector<bool> const &gt);
ContactScores contactPrf(HandPose const &pred, HandPose const &gt, Points const &object, double threshold = 0.002);

struct SampleMetrics
{
  double mpjpe = 0.0;
  double rMpjpe = 0.0;
  double iv = 0.0;
  ContactScores contact;
};

SampleMetrics evaluatePair(HandPose const &pred, HandPose const &gt, TriangleMesh const &objectMesh,
                           Points const &objectCloud);

struct Stat
{
  double mean = 0.0;
  double std = 0.0;
};

struct MetricsReport
{
  Stat mpjpe, rMpjpe, iv, precision, recall, f1;
  Index count = 0;
};

MetricsReport summarize(std::vector<SampleMetrics> const &samples);
/// JSON summary; simulation displacement is not computed and reported as "n/a".
std::string toJson(MetricsReport const &report);

} // namespace choir
