#pragma once

#include "choir/field.hpp"
#include "choir/hand.hpp"
#include "choir/objects.hpp"
#include "choir/seed.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace choir {

nlohmann::json toJson(HandParams const &params);
HandParams handParamsFromJson(nlohmann::json const &j);
HandParams readHandParams(std::string const &path);
void writeHandParams(std::string const &path, HandParams const &params);

struct GraspConfig
{
  double depth = 0.001;          // palm and phalanges settle this far inside the surface
  double contactBand = 0.002;    // a vertex within this signed distance counts as touching
  int minContacts = 3;
  double betaSigma = 0.5;
  double approachJitter = 25.0 * M_PI / 180.0; // tilt of the approach direction
  double twistJitter = 15.0 * M_PI / 180.0;    // roll about the approach direction
  int maxAttempts = 20;
};

/// Places the palm against the object along a jittered shape-specific approach direction, then
/// closes each finger joint from proximal to distal until its distal part reaches the surface.
HandParams generateGrasp(ShapeSpec const &shape, std::mt19937_64 &rng, GraspConfig const &cfg = {});

/// Hand vertices whose signed distance to the shape is at most `band`.
int countTouching(Points const &vertices, ShapeSpec const &shape, double band);

enum class Split { Train, Val, Test };
std::string toString(Split split);
Split splitFromString(std::string const &name);

/// One perturbed copy of a ground-truth grasp.
struct GraspSample
{
  std::string id;
  int grasp = 0;
  int copy = 0;
  ShapeSpec shape;
  std::string objectPath; // OBJ mesh, relative to the manifest directory
  std::string cloudPath;  // PCLD positions, relative
  std::uint64_t cloudSeed = 0;
  std::string choirPath; // ground-truth CHOIR field, relative
  HandParams gt;
  HandParams perturbed;
  Split split = Split::Train;
};

struct DatasetConfig
{
  int grasps = 100;
  std::uint64_t seed = 0;
  int cloudPoints = 4096;
  int trainCopies = 16;
  int evalCopies = 4;
  double trainFraction = 0.7;
  double valFraction = 0.1;
  int gridResolution = 16;
  double gridExtent = 0.2;
  GraspConfig grasp;
  PerturbationConfig perturbation;
};

/// Split of every grasp index: a seeded shuffle cut into train/val/test by the configured fractions.
std::vector<Split> assignSplits(int grasps, std::uint64_t seed, double trainFraction, double valFraction);

/// Generates meshes, clouds, ground-truth CHOIR fields and perturbed copies under `outDir`, and
/// writes `outDir/manifest.json`.
std::vector<GraspSample> generateDataset(DatasetConfig const &cfg, std::string const &outDir);

nlohmann::json toJson(GraspSample const &s);
GraspSample graspSampleFromJson(nlohmann::json const &j);
void writeManifest(std::string const &path, std::vector<GraspSample> const &samples);
std::vector<GraspSample> readManifest(std::string const &path);

/// Object surface for one sample: the mesh from disk and the cloud regenerated from it with the
/// recorded seed (normals included).
struct ObjectData
{
  TriangleMesh mesh;
  PointCloud cloud;
};
ObjectData objectData(ShapeSpec const &shape, int cloudPoints, std::uint64_t cloudSeed);
ObjectData loadObject(GraspSample const &s, std::string const &baseDir, int cloudPoints = 4096);

/// First record of every ground-truth grasp in the given split (all splits when empty).
std::vector<GraspSample> uniqueGrasps(std::vector<GraspSample> const &samples, std::optional<Split> split = {});

} // namespace choir
