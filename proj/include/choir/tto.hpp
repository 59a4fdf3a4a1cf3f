#pragma once

#include "choir/field.hpp"
#include "choir/knn.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace choir {

struct LossTerms
{
  double rec = 0.0;
  double shape = 0.0;
  double pose = 0.0;
  double pen = 0.0;
};

/// Objective value and its exact gradient over the 61 hand parameters.
struct GradientTape
{
  double value = 0.0;
  ParamVectord gradient = ParamVectord::Zero();
  LossTerms terms;
};

struct AdamConfig
{
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam
{
public:
  Adam(Index size, AdamConfig cfg);
  /// Returns the parameter update (to be added) for gradient g.
  Eigen::VectorXd step(Eigen::VectorXd const &g);
  int iterations() const { return t_; }
  AdamConfig &config() { return cfg_; }

private:
  AdamConfig cfg_;
  Eigen::VectorXd m_, v_;
  int t_ = 0;
};

struct Stage1Config
{
  double lambda1 = 1000.0;
  double lambda2 = 1e-4;
  double lambda3 = 1e-8;
  double lr = 2e-2;
  int maxIterations = 1000;
  int patience = 20;
  double tolerance = 3e-5; // minimum best-loss improvement over `patience` steps
};

struct Stage2Config
{
  double lambda4 = 1e5; // weights the density-normalized reconstruction term
  double lambda5 = 1000.0;
  double lambda6 = 0.5;
  double lambda2 = 1e-4;
  double eta1 = 1e-2;
  double eta2 = 1e-1;
  int k = 5;
  double lr = 3e-4;
  int maxIterations = 500;
  int refreshEvery = 10;
  bool normalizeDensity = true; // scale the per-vertex density weights to [0, 1] by their maximum
};

/// Stage-1 objective: lambda1 * MSE(anchor distances, target) + lambda2 |beta| + lambda3 |theta - theta_init|.
/// The pose term is dropped when `init` is empty.
GradientTape stage1Loss(HandParams const &params, ChoirField const &target, BasisPointSet const &grid,
                        std::optional<HandParams> const &init, Stage1Config const &cfg);

/// Piecewise-constant correspondences for stage 2, recomputed periodically during fitting.
struct Stage2Correspondences
{
  std::vector<int> anchor;  // nearest active anchor per vertex (-1 if none)
  Eigen::VectorXd phi;      // contact density weight per vertex
  Eigen::MatrixXi nearest;  // N x K nearest object points per vertex, ascending
};

Stage2Correspondences stage2Correspondences(HandPose const &pose, ChoirField const &target, KdTree const &object,
                                            int k, bool normalizeDensity = true);

GradientTape stage2Loss(HandParams const &params, ChoirField const &target, PointCloud const &object,
                        HandParams const &stage1, Stage2Config const &cfg, Stage2Correspondences const &corr);
GradientTape stage2Loss(HandParams const &params, ChoirField const &target, PointCloud const &object,
                        HandParams const &stage1, Stage2Config const &cfg);

/// Sum over hand vertices of the depth behind the tangent plane of their nearest object point.
double penetrationLoss(Points const &handVertices, PointCloud const &object);
inline double penetrationLoss(HandPose const &hand, PointCloud const &object)
{
  return penetrationLoss(hand.vertices, object);
}
/// Same objective with fixed nearest-point correspondences, plus its gradient.
GradientTape penetrationLossWithGradient(HandParams const &params, PointCloud const &object,
                                         std::vector<int> const &nearest);

struct IterationRecord
{
  int iter = 0;
  double loss = 0.0;
  LossTerms terms;
  double gradNorm = 0.0;
};

struct FitResult
{
  HandParams params;
  double bestLoss = 0.0;
  double firstLoss = 0.0;
  int iterations = 0;
  int convergedAt = 0;
  bool aborted = false;
  std::vector<IterationRecord> trace;
};

FitResult fitStage1(HandParams const &init, ChoirField const &target, BasisPointSet const &grid,
                    Stage1Config const &cfg, bool poseRegularizer = true);
FitResult fitStage2(HandParams const &stage1, ChoirField const &target, PointCloud const &object,
                    Stage2Config const &cfg);

struct FullFit
{
  FitResult stage1;
  std::optional<FitResult> stage2;
  HandParams params;
};

/// Stage 1, then stage 2 when the target carries contacts. Without an initial estimate the fit
/// starts from the rest hand placed at the grid centre and runs without the pose regularizer.
FullFit fitFull(std::optional<HandParams> const &init, ChoirField const &target, PointCloud const &object,
                BasisPointSet const &grid, Stage1Config const &cfg1, Stage2Config const &cfg2);

HandParams synthesisSeed(ChoirField const &target, BasisPointSet const &grid);

Eigen::VectorXd finiteDifferenceGradient(std::function<double(Eigen::VectorXd const &)> const &f,
                                         Eigen::VectorXd const &x, double h = 1e-5);
/// |a - n| / max(|a|, |n|) in the Euclidean norm; 0 when both vanish.
double gradientRelativeError(Eigen::VectorXd const &analytic, Eigen::VectorXd const &numeric);

std::string toJsonLine(IterationRecord const &rec);

} // namespace choir
