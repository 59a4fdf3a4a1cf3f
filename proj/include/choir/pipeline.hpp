#pragma once

#include "choir/dataset.hpp"
#include "choir/ddpm.hpp"
#include "choir/metrics.hpp"
#include "choir/tto.hpp"

#include <map>
#include <string>
#include <vector>

namespace choir {

/// Loads objects and encodes fields for manifest records, caching per ground-truth grasp.
class SampleEncoder
{
public:
  SampleEncoder(std::string baseDir, BasisPointSet grid, int cloudPoints = 4096, EncodeOptions options = {});

  BasisPointSet const &grid() const { return grid_; }
  ObjectData const &object(GraspSample const &s);
  /// Ground-truth field with hand distances and contacts.
  ChoirField const &groundTruth(GraspSample const &s);
  /// Refinement observation: the perturbed hand, no contacts.
  ChoirField observation(GraspSample const &s);
  /// Synthesis context: object distances only.
  ChoirField objectContext(GraspSample const &s);

private:
  std::string baseDir_;
  BasisPointSet grid_;
  int cloudPoints_;
  EncodeOptions options_;
  std::map<int, ObjectData> objects_;
  std::map<int, ChoirField> gt_;
};

/// Training pairs from the train split: every perturbed copy in refine mode, every grasp once in
/// synth mode.
std::vector<TrainingPair> buildTrainingPairs(std::vector<GraspSample> const &samples, SampleEncoder &encoder,
                                             ContextMode mode, Split split = Split::Train);

struct InferenceConfig
{
  Stage1Config stage1;
  Stage2Config stage2;
  double temperature = 0.0; // 0 runs the deterministic mean chain
};

struct Inference
{
  ChoirField field;
  FullFit fit;
};

/// Refinement: sample a field conditioned on the perturbed observation, then fit from the
/// perturbed parameters.
Inference refine(DdpmModel const &model, GraspSample const &s, SampleEncoder &encoder, std::uint64_t seed,
                 InferenceConfig const &cfg = {});
/// Synthesis: sample a field conditioned on the object alone, then fit from the rest hand.
Inference synthesize(DdpmModel const &model, GraspSample const &s, SampleEncoder &encoder, std::uint64_t seed,
                     InferenceConfig const &cfg = {});

SampleMetrics evaluate(HandParams const &pred, GraspSample const &s, SampleEncoder &encoder);

} // namespace choir
