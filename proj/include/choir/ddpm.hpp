#pragma once

#include "choir/field.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace choir {

struct NoiseSchedule
{
  Eigen::VectorXd beta;     // beta(t - 1) for t = 1..T
  Eigen::VectorXd alpha;    // 1 - beta
  Eigen::VectorXd alphaBar; // cumulative product of alpha

  int steps() const { return static_cast<int>(beta.size()); }
};

/// Linear beta schedule from betaMin to betaMax over T steps.
NoiseSchedule buildSchedule(int T, double betaMin = 1e-4, double betaMax = 0.02);

/// x_t = sqrt(alphaBar_t) x0 + sqrt(1 - alphaBar_t) noise, for t in [1, T].
Eigen::VectorXd forwardDiffuse(NoiseSchedule const &s, Eigen::VectorXd const &x0, int t,
                               Eigen::VectorXd const &noise);

enum class ContextMode { Refine, Synth };
std::string toString(ContextMode mode);
ContextMode contextModeFromString(std::string const &name);

struct DdpmConfig
{
  ContextMode mode = ContextMode::Refine;
  int basisCount = 512; // M
  int steps = 100;      // T
  double betaMin = 1e-3;
  double betaMax = 0.2;
  int width = 128;
  int blocks = 4;
  double contactWeight = 1.0;
  // training
  int epochs = 200;
  int batchSize = 64;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

inline constexpr int kContactDims = kNumAnchors * 9;

/// Per-dimension z-score statistics of the diffused sample and the context.
struct Normalization
{
  Eigen::VectorXd xMean, xStd;
  Eigen::VectorXd cMean, cStd;
  Eigen::VectorXd xLo, xHi;    // per-channel range of the normalized training targets
  double activeDiagonal = 0.0; // mean Cholesky diagonal of active anchors in the training set
};

/// Residual-MLP denoiser. The input is the noisy sample concatenated with the context; a learned
/// timestep embedding is added before every residual block. The distance head reads the trunk
/// output, the contact head reads the trunk output concatenated with the noisy sample. The noise
/// prediction is sqrt(1 - abar_t) x_t + sqrt(abar_t) head(...).
class Denoiser
{
public:
  struct Tensor
  {
    std::string name;
    Index rows, cols, offset;
  };

  Denoiser() = default;
  Denoiser(DdpmConfig const &cfg, std::uint64_t seed);

  DdpmConfig const &config() const { return cfg_; }
  Index sampleDims() const { return cfg_.basisCount + kContactDims; }
  Index contextDims() const;
  Index parameterCount() const { return params_.size(); }

  Eigen::VectorXd &parameters() { return params_; }
  Eigen::VectorXd const &parameters() const { return params_; }
  std::vector<Tensor> const &tensors() const { return tensors_; }

  /// Batched forward pass; columns are samples. Returns the stacked [eps_d; eps_c] prediction.
  Eigen::MatrixXd predict(Eigen::MatrixXd const &xt, std::vector<int> const &t, Eigen::MatrixXd const &context) const;

  struct Loss
  {
    double total = 0.0, d = 0.0, c = 0.0;
  };
  /// Training loss mean_b(MSE_d + w_c MSE_c) and its gradient with respect to all parameters.
  Loss lossParts(Eigen::MatrixXd const &xt, std::vector<int> const &t, Eigen::MatrixXd const &context,
                 Eigen::MatrixXd const &noise, Eigen::VectorXd *grad) const;
  double lossAndGradient(Eigen::MatrixXd const &xt, std::vector<int> const &t, Eigen::MatrixXd const &context,
                         Eigen::MatrixXd const &noise, Eigen::VectorXd *grad) const;

private:
  using MapM = Eigen::Map<Eigen::MatrixXd>;
  using CMapM = Eigen::Map<Eigen::MatrixXd const>;
  Index add(std::string name, Index rows, Index cols);
  CMapM view(Index i) const;

  DdpmConfig cfg_;
  Eigen::VectorXd params_;
  std::vector<Tensor> tensors_;
};

struct DdpmModel
{
  DdpmConfig config;
  NoiseSchedule schedule;
  Normalization norm;
  Denoiser net;
};

/// Diffusion target and context for one training pair, in raw (unnormalized) units.
struct TrainingPair
{
  Eigen::VectorXd x0;      // [hand_dists (M); contacts packed 32 x 9 row-major]
  Eigen::VectorXd context; // refine: [object_bps; observed hand_dists], synth: [object_bps]
};

Eigen::VectorXd diffusionTarget(ChoirField const &gt);
Eigen::VectorXd diffusionContext(ChoirField const &observation, ContextMode mode);

struct EpochLog
{
  int epoch = 0;
  double lossD = 0.0;
  double lossC = 0.0;
};

/// Trains a model from scratch; deterministic for a given config seed.
DdpmModel trainDdpm(std::vector<TrainingPair> const &data, DdpmConfig const &cfg,
                    std::function<void(EpochLog const &)> const &onEpoch = {});

/// Per-element errors of one denoising call, split by head (for evaluation and logging).
EpochLog evaluateLoss(DdpmModel const &model, std::vector<TrainingPair> const &data, std::uint64_t seed);

/// Noise prediction for one normalized sample.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> denoiseStep(DdpmModel const &model, Eigen::VectorXd const &xt, int t,
                                                        Eigen::VectorXd const &context, ContextMode mode);

/// Ancestral sampling from t = T down to 1. Each step clips the implied x0 estimate to the
/// training range and draws from the posterior q(x_{t-1} | x_t, x0). Temperature scales the
/// initial and per-step noise; at temperature 0 the chain starts from zero and is deterministic.
ChoirField sampleField(DdpmModel const &model, ChoirField const &context, std::uint64_t seed,
                       double temperature = 1.0);
/// Same chain on raw vectors; returns the denormalized sample.
Eigen::VectorXd sampleRaw(DdpmModel const &model, Eigen::VectorXd const &rawContext, std::uint64_t seed,
                          double temperature = 1.0);

/// Turns a denormalized sample into hand distances and contact Gaussians.
ChoirField decodeSample(DdpmModel const &model, Eigen::VectorXd const &x, ChoirField const &context);

inline constexpr std::uint32_t kCheckpointVersion = 1;
std::vector<std::uint8_t> saveCheckpoint(DdpmModel const &model);
DdpmModel loadCheckpoint(std::vector<std::uint8_t> const &bytes);

} // namespace choir
