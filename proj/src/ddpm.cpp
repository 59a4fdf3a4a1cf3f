#include "choir/ddpm.hpp"
#include "choir/binary.hpp"
#include "choir/error.hpp"
#include "choir/seed.hpp"
#include "choir/tto.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

namespace choir {

NoiseSchedule buildSchedule(int T, double betaMin, double betaMax)
{
  if (T < 2 || !(betaMin > 0.0) || !(betaMin < betaMax) || !(betaMax < 1.0)) {
    fail(ErrorCode::InvalidArgument, "schedule needs T >= 2 and 0 < beta_min < beta_max < 1");
  }
  NoiseSchedule s;
  s.beta = Eigen::VectorXd::LinSpaced(T, betaMin, betaMax);
  s.alpha = 1.0 - s.beta.array();
  s.alphaBar.resize(T);
  double prod = 1.0;
  for (int t = 0; t < T; ++t) {
    prod *= s.alpha(t);
    s.alphaBar(t) = prod;
  }
  return s;
}

Eigen::VectorXd forwardDiffuse(NoiseSchedule const &s, Eigen::VectorXd const &x0, int t, Eigen::VectorXd const &noise)
{
  if (t < 1 || t > s.steps()) { fail(ErrorCode::InvalidArgument, "timestep " + std::to_string(t) + " out of range"); }
  if (noise.size() != x0.size()) { fail(ErrorCode::LengthMismatch, "noise and sample differ in size"); }
  double const ab = s.alphaBar(t - 1);
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * noise;
}

std::string toString(ContextMode mode) { return mode == ContextMode::Refine ? "refine" : "synth"; }

ContextMode contextModeFromString(std::string const &name)
{
  if (name == "refine") { return ContextMode::Refine; }
  if (name == "synth") { return ContextMode::Synth; }
  fail(ErrorCode::InvalidArgument, "unknown context mode '" + name + "'");
}

// ---------------------------------------------------------------------------------------------
// Denoiser

namespace {

Eigen::ArrayXXd sigmoid(Eigen::ArrayXXd const &x) { return 1.0 / (1.0 + (-x).exp()); }
Eigen::MatrixXd silu(Eigen::MatrixXd const &x) { return (x.array() * sigmoid(x.array())).matrix(); }
Eigen::ArrayXXd siluGrad(Eigen::MatrixXd const &x)
{
  Eigen::ArrayXXd const s = sigmoid(x.array());
  return s * (1.0 + x.array() * (1.0 - s));
}

} // namespace

Index Denoiser::contextDims() const
{
  return cfg_.mode == ContextMode::Refine ? 2 * Index(cfg_.basisCount) : Index(cfg_.basisCount);
}

Index Denoiser::add(std::string name, Index rows, Index cols)
{
  Index const offset = tensors_.empty() ? 0 : tensors_.back().offset + tensors_.back().rows * tensors_.back().cols;
  tensors_.push_back({std::move(name), rows, cols, offset});
  return static_cast<Index>(tensors_.size()) - 1;
}

Denoiser::CMapM Denoiser::view(Index i) const
{
  Tensor const &t = tensors_[i];
  return CMapM(params_.data() + t.offset, t.rows, t.cols);
}

// Tensor order is fixed: input layer, time table, blocks, distance head, contact head.
namespace {
enum : Index { kInW = 0, kInB = 1, kTime = 2, kBlock0 = 3 };
}

Denoiser::Denoiser(DdpmConfig const &cfg, std::uint64_t seed)
  : cfg_(cfg)
{
  if (cfg.basisCount < 1 || cfg.width < 2 || cfg.blocks < 0 || cfg.steps < 2) {
    fail(ErrorCode::InvalidArgument, "invalid denoiser configuration");
  }
  Index const H = cfg.width, D = sampleDims(), C = contextDims(), M = cfg.basisCount;
  add("in.W", H, D + C);
  add("in.b", H, 1);
  add("time.E", H, cfg.steps);
  for (int k = 0; k < cfg.blocks; ++k) {
    std::string const p = "block" + std::to_string(k) + ".";
    add(p + "W1", H, H);
    add(p + "b1", H, 1);
    add(p + "W2", H, H);
    add(p + "b2", H, 1);
  }
  add("head_d.W", M, H);
  add("head_d.b", M, 1);
  add("head_c.W", kContactDims, H + D);
  add("head_c.b", kContactDims, 1);
  params_ = Eigen::VectorXd::Zero(tensors_.back().offset + tensors_.back().rows * tensors_.back().cols);

  std::mt19937_64 rng(seed);
  for (Tensor const &t : tensors_) {
    MapM w(params_.data() + t.offset, t.rows, t.cols);
    if (t.name == "time.E") {
      for (Index step = 0; step < t.cols; ++step) {
        for (Index i = 0; i + 1 < t.rows; i += 2) {
          double const freq = std::pow(10000.0, -double(i) / double(t.rows));
          w(i, step) = std::sin(double(step + 1) * freq);
          w(i + 1, step) = std::cos(double(step + 1) * freq);
        }
      }
    } else if (t.cols > 1) {
      double bound = 1.0 / std::sqrt(double(t.cols));
      if (t.name.ends_with("W2")) { bound *= 0.1; }
      std::uniform_real_distribution<double> u(-bound, bound);
      for (Index c = 0; c < t.cols; ++c) {
        for (Index r = 0; r < t.rows; ++r) { w(r, c) = u(rng); }
      }
    }
  }
}

namespace {

struct Forward
{
  Eigen::MatrixXd input;             // [xt; context]
  std::vector<Eigen::MatrixXd> u, z1; // per block: pre-activation input and hidden pre-activation
  Eigen::MatrixXd h;                  // trunk output before the final activation
  Eigen::MatrixXd s;                  // silu(h)
  Eigen::MatrixXd headC;              // [s; xt]
  Eigen::MatrixXd out;                // [eps_d; eps_c]
  Eigen::VectorXd gain;               // sqrt(abar_t) per column
};

Eigen::VectorXd outputGain(DdpmConfig const &cfg, std::vector<int> const &t)
{
  NoiseSchedule const s = buildSchedule(cfg.steps, cfg.betaMin, cfg.betaMax);
  Eigen::VectorXd g(static_cast<Index>(t.size()));
  for (Index b = 0; b < g.size(); ++b) { g(b) = std::sqrt(s.alphaBar(t[b] - 1)); }
  return g;
}

} // namespace

namespace {

Forward runForward(Denoiser const &net, std::vector<Denoiser::Tensor> const &tensors, Eigen::VectorXd const &params,
                   Eigen::MatrixXd const &xt, std::vector<int> const &t, Eigen::MatrixXd const &context, int blocks)
{
  auto V = [&](Index i) {
    auto const &ts = tensors[i];
    return Eigen::Map<Eigen::MatrixXd const>(params.data() + ts.offset, ts.rows, ts.cols);
  };
  Index const B = xt.cols(), M = net.config().basisCount;
  Forward f;
  f.input.resize(xt.rows() + context.rows(), B);
  f.input << xt, context;
  Eigen::MatrixXd h = V(kInW) * f.input;
  h.colwise() += V(kInB).col(0);
  auto const E = V(kTime);
  Eigen::MatrixXd emb(h.rows(), B);
  for (Index b = 0; b < B; ++b) { emb.col(b) = E.col(t[b] - 1); }
  for (int k = 0; k < blocks; ++k) {
    Index const base = kBlock0 + 4 * k;
    Eigen::MatrixXd u = h + emb;
    Eigen::MatrixXd z1 = V(base) * silu(u);
    z1.colwise() += V(base + 1).col(0);
    Eigen::MatrixXd z2 = V(base + 2) * silu(z1);
    z2.colwise() += V(base + 3).col(0);
    h += z2;
    f.u.push_back(std::move(u));
    f.z1.push_back(std::move(z1));
  }
  f.h = h;
  f.s = silu(h);
  Index const head = kBlock0 + 4 * blocks;
  f.headC.resize(f.s.rows() + xt.rows(), B);
  f.headC << f.s, xt;
  f.out.resize(M + kContactDims, B);
  f.out.topRows(M) = V(head) * f.s;
  f.out.topRows(M).colwise() += V(head + 1).col(0);
  f.out.bottomRows(kContactDims) = V(head + 2) * f.headC;
  f.out.bottomRows(kContactDims).colwise() += V(head + 3).col(0);
  // Fixed skip: eps = sqrt(1 - abar) x_t + sqrt(abar) F, so the trunk only has to carry the
  // low-dimensional x0 structure and never the full-width noise.
  f.gain = outputGain(net.config(), t);
  for (Index b = 0; b < B; ++b) {
    f.out.col(b) = std::sqrt(1.0 - f.gain(b) * f.gain(b)) * xt.col(b) + f.gain(b) * f.out.col(b);
  }
  return f;
}

void checkBatch(Denoiser const &net, Eigen::MatrixXd const &xt, std::vector<int> const &t,
                Eigen::MatrixXd const &context)
{
  if (xt.rows() != net.sampleDims() || context.rows() != net.contextDims() || xt.cols() != context.cols() ||
      static_cast<Index>(t.size()) != xt.cols()) {
    fail(ErrorCode::LengthMismatch, "denoiser batch has inconsistent shapes");
  }
  for (int s : t) {
    if (s < 1 || s > net.config().steps) { fail(ErrorCode::InvalidArgument, "timestep out of range"); }
  }
}

} // namespace

Eigen::MatrixXd Denoiser::predict(Eigen::MatrixXd const &xt, std::vector<int> const &t,
                                  Eigen::MatrixXd const &context) const
{
  checkBatch(*this, xt, t, context);
  return runForward(*this, tensors_, params_, xt, t, context, cfg_.blocks).out;
}

double Denoiser::lossAndGradient(Eigen::MatrixXd const &xt, std::vector<int> const &t, Eigen::MatrixXd const &context,
                                 Eigen::MatrixXd const &noise, Eigen::VectorXd *grad) const
{
  return lossParts(xt, t, context, noise, grad).total;
}

Denoiser::Loss Denoiser::lossParts(Eigen::MatrixXd const &xt, std::vector<int> const &t,
                                   Eigen::MatrixXd const &context, Eigen::MatrixXd const &noise,
                                   Eigen::VectorXd *grad) const
{
  checkBatch(*this, xt, t, context);
  if (noise.rows() != xt.rows() || noise.cols() != xt.cols()) {
    fail(ErrorCode::LengthMismatch, "noise target has the wrong shape");
  }
  Forward const f = runForward(*this, tensors_, params_, xt, t, context, cfg_.blocks);
  Index const B = xt.cols(), M = cfg_.basisCount;
  Eigen::MatrixXd const diff = f.out - noise;
  Loss loss;
  loss.d = diff.topRows(M).squaredNorm() / double(B * M);
  loss.c = diff.bottomRows(kContactDims).squaredNorm() / double(B * kContactDims);
  loss.total = loss.d + cfg_.contactWeight * loss.c;
  if (!grad) { return loss; }

  grad->setZero(params_.size());
  auto G = [&](Index i) {
    Tensor const &ts = tensors_[i];
    return MapM(grad->data() + ts.offset, ts.rows, ts.cols);
  };
  Eigen::MatrixXd const gd = diff.topRows(M) * (2.0 / double(B * M)) * f.gain.asDiagonal();
  Eigen::MatrixXd const gc =
    diff.bottomRows(kContactDims) * (2.0 * cfg_.contactWeight / double(B * kContactDims)) * f.gain.asDiagonal();
  Index const head = kBlock0 + 4 * cfg_.blocks;
  G(head).noalias() = gd * f.s.transpose();
  G(head + 1) = gd.rowwise().sum();
  G(head + 2).noalias() = gc * f.headC.transpose();
  G(head + 3) = gc.rowwise().sum();
  Eigen::MatrixXd ds = view(head).transpose() * gd;
  ds += (view(head + 2).transpose() * gc).topRows(cfg_.width);
  Eigen::MatrixXd dh = (ds.array() * siluGrad(f.h)).matrix();
  Eigen::MatrixXd dEmb = Eigen::MatrixXd::Zero(cfg_.width, B);
  for (int k = cfg_.blocks - 1; k >= 0; --k) {
    Index const base = kBlock0 + 4 * k;
    Eigen::MatrixXd const s2 = silu(f.z1[k]);
    G(base + 2).noalias() = dh * s2.transpose();
    G(base + 3) = dh.rowwise().sum();
    Eigen::MatrixXd const dz1 = ((view(base + 2).transpose() * dh).array() * siluGrad(f.z1[k])).matrix();
    G(base).noalias() = dz1 * silu(f.u[k]).transpose();
    G(base + 1) = dz1.rowwise().sum();
    Eigen::MatrixXd const du = ((view(base).transpose() * dz1).array() * siluGrad(f.u[k])).matrix();
    dh += du;
    dEmb += du;
  }
  auto gE = G(kTime);
  for (Index b = 0; b < B; ++b) { gE.col(t[b] - 1) += dEmb.col(b); }
  G(kInW).noalias() = dh * f.input.transpose();
  G(kInB) = dh.rowwise().sum();
  return loss;
}

// ---------------------------------------------------------------------------------------------
// Data layout

Eigen::VectorXd diffusionTarget(ChoirField const &gt)
{
  if (!gt.hasHand() || !gt.hasContacts()) {
    fail(ErrorCode::MissingField, "diffusion targets need hand distances and contacts");
  }
  Index const M = gt.size();
  Eigen::VectorXd x(M + kContactDims);
  x.head(M) = *gt.handDists;
  Eigen::Matrix<double, kNumAnchors, 9, Eigen::RowMajor> const packed = gt.contacts->packed();
  x.tail(kContactDims) = Eigen::Map<Eigen::VectorXd const>(packed.data(), kContactDims);
  return x;
}

Eigen::VectorXd diffusionContext(ChoirField const &observation, ContextMode mode)
{
  Index const M = observation.size();
  if (mode == ContextMode::Synth) { return observation.objectBps; }
  if (!observation.hasHand()) { fail(ErrorCode::ModeMismatch, "refine context needs observed hand distances"); }
  Eigen::VectorXd c(2 * M);
  c << observation.objectBps, *observation.handDists;
  return c;
}

namespace {

Normalization computeNormalization(std::vector<TrainingPair> const &data, Index M)
{
  auto stats = [&](auto get, Eigen::VectorXd &mean, Eigen::VectorXd &sd) {
    Index const n = get(data.front()).size();
    mean = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(n);
    for (auto const &p : data) {
      mean += get(p);
      sq += get(p).cwiseAbs2();
    }
    mean /= double(data.size());
    sd = (sq / double(data.size()) - mean.cwiseAbs2()).cwiseMax(0.0).cwiseSqrt();
    // Constant channels stay unscaled.
    for (Index i = 0; i < n; ++i) {
      if (sd(i) < 1e-9) { sd(i) = 1.0; }
    }
  };
  Normalization norm;
  stats([](TrainingPair const &p) -> Eigen::VectorXd const & { return p.x0; }, norm.xMean, norm.xStd);
  stats([](TrainingPair const &p) -> Eigen::VectorXd const & { return p.context; }, norm.cMean, norm.cStd);
  double sum = 0.0;
  Index count = 0;
  for (auto const &p : data) {
    for (int a = 0; a < kNumAnchors; ++a) {
      Index const base = M + 9 * a + 3;
      double const diag = (p.x0(base) + p.x0(base + 2) + p.x0(base + 5)) / 3.0;
      if (diag > 0.0) {
        sum += diag;
        ++count;
      }
    }
  }
  norm.activeDiagonal = count > 0 ? sum / double(count) : 0.0;
  norm.xLo = Eigen::VectorXd::Constant(norm.xMean.size(), std::numeric_limits<double>::infinity());
  norm.xHi = -norm.xLo;
  for (auto const &p : data) {
    Eigen::VectorXd const z = (p.x0 - norm.xMean).cwiseQuotient(norm.xStd);
    norm.xLo = norm.xLo.cwiseMin(z);
    norm.xHi = norm.xHi.cwiseMax(z);
  }
  return norm;
}

Eigen::VectorXd normalize(Eigen::VectorXd const &v, Eigen::VectorXd const &mean, Eigen::VectorXd const &sd)
{
  return (v - mean).cwiseQuotient(sd);
}

void checkPair(TrainingPair const &p, DdpmConfig const &cfg)
{
  Index const M = cfg.basisCount;
  Index const c = cfg.mode == ContextMode::Refine ? 2 * M : M;
  if (p.x0.size() != M + kContactDims || p.context.size() != c) {
    fail(ErrorCode::ModeMismatch, "training pair does not match the " + toString(cfg.mode) + " layout with M = " +
                                      std::to_string(M));
  }
}

} // namespace

DdpmModel trainDdpm(std::vector<TrainingPair> const &data, DdpmConfig const &cfg,
                    std::function<void(EpochLog const &)> const &onEpoch)
{
  if (data.empty()) { fail(ErrorCode::InvalidArgument, "cannot train on an empty dataset"); }
  for (auto const &p : data) { checkPair(p, cfg); }
  DdpmModel model;
  model.config = cfg;
  model.schedule = buildSchedule(cfg.steps, cfg.betaMin, cfg.betaMax);
  model.norm = computeNormalization(data, cfg.basisCount);
  model.net = Denoiser(cfg, deriveSeed(cfg.seed, 1));

  Index const D = model.net.sampleDims(), C = model.net.contextDims(), N = static_cast<Index>(data.size());
  Eigen::MatrixXd x0(D, N), ctx(C, N);
  for (Index i = 0; i < N; ++i) {
    x0.col(i) = normalize(data[i].x0, model.norm.xMean, model.norm.xStd);
    ctx.col(i) = normalize(data[i].context, model.norm.cMean, model.norm.cStd);
  }

  std::mt19937_64 rng(deriveSeed(cfg.seed, 2));
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> step(1, cfg.steps);
  Adam adam(model.net.parameterCount(), {.lr = cfg.lr});
  std::vector<Index> order(N);
  std::iota(order.begin(), order.end(), 0);
  Eigen::VectorXd grad;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog log{epoch, 0.0, 0.0};
    Index batches = 0;
    for (Index start = 0; start < N; start += cfg.batchSize) {
      Index const B = std::min<Index>(cfg.batchSize, N - start);
      Eigen::MatrixXd xt(D, B), c(C, B), noise(D, B);
      std::vector<int> t(B);
      for (Index b = 0; b < B; ++b) {
        Index const i = order[start + b];
        t[b] = step(rng);
        for (Index r = 0; r < D; ++r) { noise(r, b) = normal(rng); }
        double const ab = model.schedule.alphaBar(t[b] - 1);
        xt.col(b) = std::sqrt(ab) * x0.col(i) + std::sqrt(1.0 - ab) * noise.col(b);
        c.col(b) = ctx.col(i);
      }
      Denoiser::Loss const loss = model.net.lossParts(xt, t, c, noise, &grad);
      if (!std::isfinite(loss.total)) { fail(ErrorCode::NonFinite, "training loss became non-finite"); }
      model.net.parameters() += adam.step(grad);
      log.lossD += loss.d;
      log.lossC += loss.c;
      ++batches;
    }
    log.lossD /= double(batches);
    log.lossC /= double(batches);
    if (onEpoch) { onEpoch(log); }
  }
  return model;
}

EpochLog evaluateLoss(DdpmModel const &model, std::vector<TrainingPair> const &data, std::uint64_t seed)
{
  EpochLog log;
  if (data.empty()) { return log; }
  Index const D = model.net.sampleDims(), C = model.net.contextDims(), N = static_cast<Index>(data.size());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> step(1, model.config.steps);
  Eigen::MatrixXd xt(D, N), c(C, N), noise(D, N);
  std::vector<int> t(N);
  for (Index i = 0; i < N; ++i) {
    checkPair(data[i], model.config);
    t[i] = step(rng);
    for (Index r = 0; r < D; ++r) { noise(r, i) = normal(rng); }
    xt.col(i) = forwardDiffuse(model.schedule, normalize(data[i].x0, model.norm.xMean, model.norm.xStd), t[i],
                               noise.col(i));
    c.col(i) = normalize(data[i].context, model.norm.cMean, model.norm.cStd);
  }
  Denoiser::Loss const loss = model.net.lossParts(xt, t, c, noise, nullptr);
  log.lossD = loss.d;
  log.lossC = loss.c;
  return log;
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> denoiseStep(DdpmModel const &model, Eigen::VectorXd const &xt, int t,
                                                        Eigen::VectorXd const &context, ContextMode mode)
{
  if (mode != model.config.mode) {
    fail(ErrorCode::ModeMismatch, "model was trained for " + toString(model.config.mode) + " context");
  }
  Eigen::VectorXd const out = model.net.predict(xt, {t}, context).col(0);
  Index const M = model.config.basisCount;
  Eigen::Matrix<double, kNumAnchors, 9, Eigen::RowMajor> const c =
    Eigen::Map<Eigen::Matrix<double, kNumAnchors, 9, Eigen::RowMajor> const>(out.data() + M);
  return {out.head(M), Eigen::MatrixXd(c)};
}

Eigen::VectorXd sampleRaw(DdpmModel const &model, Eigen::VectorXd const &rawContext, std::uint64_t seed,
                          double temperature)
{
  Index const C = model.net.contextDims(), D = model.net.sampleDims();
  if (rawContext.size() != C) {
    fail(ErrorCode::ModeMismatch, "context has " + std::to_string(rawContext.size()) + " channels, model expects " +
                                      std::to_string(C));
  }
  Eigen::MatrixXd const ctx = normalize(rawContext, model.norm.cMean, model.norm.cStd);
  NoiseSchedule const &s = model.schedule;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  auto gaussian = [&] {
    Eigen::VectorXd z(D);
    for (Index i = 0; i < D; ++i) { z(i) = normal(rng); }
    return z;
  };
  Eigen::VectorXd x = temperature > 0.0 ? Eigen::VectorXd(temperature * gaussian()) : Eigen::VectorXd::Zero(D);
  for (int t = s.steps(); t >= 1; --t) {
    Eigen::VectorXd const eps = model.net.predict(x, {t}, ctx).col(0);
    double const beta = s.beta(t - 1), ab = s.alphaBar(t - 1);
    double const abPrev = t > 1 ? s.alphaBar(t - 2) : 1.0;
    Eigen::VectorXd const x0 =
      ((x - std::sqrt(1.0 - ab) * eps) / std::sqrt(ab)).cwiseMax(model.norm.xLo).cwiseMin(model.norm.xHi);
    x = (std::sqrt(abPrev) * beta / (1.0 - ab)) * x0 + (std::sqrt(s.alpha(t - 1)) * (1.0 - abPrev) / (1.0 - ab)) * x;
    if (t > 1) {
      double const var = beta * (1.0 - abPrev) / (1.0 - ab);
      Eigen::VectorXd const z = gaussian();
      if (temperature > 0.0) { x += temperature * std::sqrt(var) * z; }
    }
  }
  return x.cwiseProduct(model.norm.xStd) + model.norm.xMean;
}

ChoirField decodeSample(DdpmModel const &model, Eigen::VectorXd const &x, ChoirField const &context)
{
  Index const M = model.config.basisCount;
  Eigen::VectorXd const d = x.head(M).cwiseMax(0.0);
  Eigen::Matrix<double, kNumAnchors, 9, Eigen::RowMajor> packed =
    Eigen::Map<Eigen::Matrix<double, kNumAnchors, 9, Eigen::RowMajor> const>(x.data() + M);
  std::bitset<kNumAnchors> active;
  double const threshold = 0.5 * model.norm.activeDiagonal;
  double const floor = std::sqrt(ContactConfig{}.epsilon);
  for (int a = 0; a < kNumAnchors; ++a) {
    double const diag = (packed(a, 3) + packed(a, 5) + packed(a, 8)) / 3.0;
    if (threshold > 0.0 && diag > threshold) {
      active.set(a);
      for (int c : {3, 5, 8}) { packed(a, c) = std::max(std::abs(packed(a, c)), floor); }
    } else {
      packed.row(a).setZero();
    }
  }
  return assemble(context.objectBps, d, ContactGaussians::fromPacked(packed, active), context.assignment,
                  context.transform);
}

ChoirField sampleField(DdpmModel const &model, ChoirField const &context, std::uint64_t seed, double temperature)
{
  if (context.size() != model.config.basisCount) {
    fail(ErrorCode::LengthMismatch, "context field has M = " + std::to_string(context.size()) + ", model expects " +
                                        std::to_string(model.config.basisCount));
  }
  Eigen::VectorXd const x = sampleRaw(model, diffusionContext(context, model.config.mode), seed, temperature);
  return decodeSample(model, x, context);
}

// ---------------------------------------------------------------------------------------------
// Checkpoint: "CDPM", u32 version, u32 length + JSON config, u32 tensor count, per tensor
// (u32 name length, name, u32 rows, u32 cols, u64 offset in floats), then all f32 data.

namespace {

nlohmann::json configJson(DdpmModel const &m)
{
  DdpmConfig const &c = m.config;
  return {{"mode", toString(c.mode)},  {"basis_count", c.basisCount}, {"steps", c.steps},
          {"beta_min", c.betaMin},     {"beta_max", c.betaMax},       {"width", c.width},
          {"blocks", c.blocks},        {"contact_weight", c.contactWeight}, {"epochs", c.epochs},
          {"batch_size", c.batchSize}, {"lr", c.lr},                  {"seed", c.seed},
          {"active_diagonal", m.norm.activeDiagonal}};
}

} // namespace

std::vector<std::uint8_t> saveCheckpoint(DdpmModel const &model)
{
  struct Entry
  {
    std::string name;
    Eigen::MatrixXd value;
  };
  std::vector<Entry> entries;
  for (auto const &t : model.net.tensors()) {
    entries.push_back({t.name, Eigen::Map<Eigen::MatrixXd const>(model.net.parameters().data() + t.offset, t.rows,
                                                                 t.cols)});
  }
  entries.push_back({"norm.x_mean", model.norm.xMean});
  entries.push_back({"norm.x_std", model.norm.xStd});
  entries.push_back({"norm.c_mean", model.norm.cMean});
  entries.push_back({"norm.c_std", model.norm.cStd});
  entries.push_back({"norm.x_lo", model.norm.xLo});
  entries.push_back({"norm.x_hi", model.norm.xHi});

  binary::Writer w;
  w.magic("CDPM");
  w.put<std::uint32_t>(kCheckpointVersion);
  std::string const cfg = configJson(model).dump();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(cfg.size()));
  w.bytes(cfg.data(), cfg.size());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(entries.size()));
  std::uint64_t offset = 0;
  for (auto const &e : entries) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(e.name.size()));
    w.bytes(e.name.data(), e.name.size());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(e.value.rows()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(e.value.cols()));
    w.put<std::uint64_t>(offset);
    offset += static_cast<std::uint64_t>(e.value.size());
  }
  for (auto const &e : entries) {
    for (Index i = 0; i < e.value.size(); ++i) { w.f32(e.value.data()[i]); }
  }
  return w.take();
}

DdpmModel loadCheckpoint(std::vector<std::uint8_t> const &bytes)
{
  binary::Reader r(bytes);
  r.expectMagic("CDPM");
  size_t const versionAt = r.offset();
  std::uint32_t const version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    fail(ErrorCode::UnsupportedVersion, "checkpoint version " + std::to_string(version) + " at byte offset " +
                                            std::to_string(versionAt));
  }
  std::uint32_t const cfgLen = r.get<std::uint32_t>();
  size_t const cfgAt = r.offset();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(r.str(cfgLen));
  } catch (nlohmann::json::exception const &e) {
    fail(ErrorCode::Malformed, "checkpoint config at byte offset " + std::to_string(cfgAt) + ": " + e.what());
  }
  DdpmModel m;
  try {
    DdpmConfig &c = m.config;
    c.mode = contextModeFromString(j.at("mode").get<std::string>());
    c.basisCount = j.at("basis_count").get<int>();
    c.steps = j.at("steps").get<int>();
    c.betaMin = j.at("beta_min").get<double>();
    c.betaMax = j.at("beta_max").get<double>();
    c.width = j.at("width").get<int>();
    c.blocks = j.at("blocks").get<int>();
    c.contactWeight = j.at("contact_weight").get<double>();
    c.epochs = j.at("epochs").get<int>();
    c.batchSize = j.at("batch_size").get<int>();
    c.lr = j.at("lr").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    m.norm.activeDiagonal = j.at("active_diagonal").get<double>();
  } catch (nlohmann::json::exception const &e) {
    fail(ErrorCode::MissingField, std::string("checkpoint config: ") + e.what());
  }
  m.schedule = buildSchedule(m.config.steps, m.config.betaMin, m.config.betaMax);
  m.net = Denoiser(m.config, 0);

  struct Entry
  {
    std::string name;
    Index rows, cols;
    std::uint64_t offset;
  };
  std::uint32_t const count = r.get<std::uint32_t>();
  std::vector<Entry> index;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t const len = r.get<std::uint32_t>();
    Entry e;
    e.name = r.str(len);
    e.rows = r.get<std::uint32_t>();
    e.cols = r.get<std::uint32_t>();
    e.offset = r.get<std::uint64_t>();
    index.push_back(e);
  }
  size_t const dataAt = r.offset();
  std::uint64_t total = 0;
  for (auto const &e : index) { total = std::max<std::uint64_t>(total, e.offset + std::uint64_t(e.rows * e.cols)); }
  r.need(total * sizeof(float));
  if (dataAt + total * sizeof(float) != bytes.size()) {
    fail(ErrorCode::Malformed, "trailing bytes after checkpoint data at byte offset " +
                                   std::to_string(dataAt + total * sizeof(float)));
  }
  auto read = [&](Entry const &e) {
    Eigen::MatrixXd v(e.rows, e.cols);
    for (Index i = 0; i < v.size(); ++i) {
      float f;
      std::memcpy(&f, bytes.data() + dataAt + (e.offset + std::uint64_t(i)) * sizeof(float), sizeof(float));
      v.data()[i] = f;
    }
    return v;
  };
  auto find = [&](std::string const &name, Index rows, Index cols) {
    for (auto const &e : index) {
      if (e.name != name) { continue; }
      if (e.rows != rows || e.cols != cols) {
        fail(ErrorCode::LengthMismatch, "checkpoint tensor " + name + " has shape " + std::to_string(e.rows) + "x" +
                                            std::to_string(e.cols));
      }
      return read(e);
    }
    fail(ErrorCode::MissingField, "checkpoint lacks tensor " + name);
  };
  for (auto const &t : m.net.tensors()) {
    Eigen::Map<Eigen::MatrixXd>(m.net.parameters().data() + t.offset, t.rows, t.cols) = find(t.name, t.rows, t.cols);
  }
  Index const D = m.net.sampleDims(), C = m.net.contextDims();
  m.norm.xMean = find("norm.x_mean", D, 1);
  m.norm.xStd = find("norm.x_std", D, 1);
  m.norm.cMean = find("norm.c_mean", C, 1);
  m.norm.cStd = find("norm.c_std", C, 1);
  m.norm.xLo = find("norm.x_lo", D, 1);
  m.norm.xHi = find("norm.x_hi", D, 1);
  return m;
}

} // namespace choir
