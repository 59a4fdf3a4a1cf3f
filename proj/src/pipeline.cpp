#include "choir/pipeline.hpp"
#include "choir/metrics.hpp"

namespace choir {

SampleEncoder::SampleEncoder(std::string baseDir, BasisPointSet grid, int cloudPoints, EncodeOptions options)
  : baseDir_(std::move(baseDir))
  , grid_(std::move(grid))
  , cloudPoints_(cloudPoints)
  , options_(options)
{
}

ObjectData const &SampleEncoder::object(GraspSample const &s)
{
  auto it = objects_.find(s.grasp);
  if (it == objects_.end()) { it = objects_.emplace(s.grasp, loadObject(s, baseDir_, cloudPoints_)).first; }
  return it->second;
}

ChoirField const &SampleEncoder::groundTruth(GraspSample const &s)
{
  auto it = gt_.find(s.grasp);
  if (it == gt_.end()) {
    it = gt_.emplace(s.grasp, encodeChoir(object(s).cloud, forwardKinematics(s.gt), grid_, options_)).first;
  }
  return it->second;
}

ChoirField SampleEncoder::observation(GraspSample const &s)
{
  EncodeOptions opt = options_;
  opt.withContacts = false;
  return encodeChoir(object(s).cloud, forwardKinematics(s.perturbed), grid_, opt);
}

ChoirField SampleEncoder::objectContext(GraspSample const &s) { return encodeObjectOnly(object(s).cloud, grid_); }

std::vector<TrainingPair> buildTrainingPairs(std::vector<GraspSample> const &samples, SampleEncoder &encoder,
                                             ContextMode mode, Split split)
{
  std::vector<TrainingPair> out;
  auto const records = mode == ContextMode::Refine ? samples : uniqueGrasps(samples);
  for (auto const &s : records) {
    if (s.split != split) { continue; }
    ChoirField const &gt = encoder.groundTruth(s);
    ChoirField const ctx = mode == ContextMode::Refine ? encoder.observation(s) : encoder.objectContext(s);
    out.push_back({diffusionTarget(gt), diffusionContext(ctx, mode)});
  }
  return out;
}

Inference refine(DdpmModel const &model, GraspSample const &s, SampleEncoder &encoder, std::uint64_t seed,
                 InferenceConfig const &cfg)
{
  Inference out;
  out.field = sampleField(model, encoder.observation(s), seed, cfg.temperature);
  out.fit = fitFull(s.perturbed, out.field, encoder.object(s).cloud, encoder.grid(), cfg.stage1, cfg.stage2);
  return out;
}

Inference synthesize(DdpmModel const &model, GraspSample const &s, SampleEncoder &encoder, std::uint64_t seed,
                     InferenceConfig const &cfg)
{
  Inference out;
  out.field = sampleField(model, encoder.objectContext(s), seed, cfg.temperature);
  out.fit = fitFull(std::nullopt, out.field, encoder.object(s).cloud, encoder.grid(), cfg.stage1, cfg.stage2);
  return out;
}

SampleMetrics evaluate(HandParams const &pred, GraspSample const &s, SampleEncoder &encoder)
{
  ObjectData const &obj = encoder.object(s);
  return evaluatePair(forwardKinematics(pred), forwardKinematics(s.gt), obj.mesh, obj.cloud.points);
}

} // namespace choir
