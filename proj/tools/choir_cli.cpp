// Command-line front end: dataset generation, encoding, fitting, diffusion training and sampling,
// evaluation and encoding benchmarks.

#include "choir/dataset.hpp"
#include "choir/ddpm.hpp"
#include "choir/error.hpp"
#include "choir/mesh_io.hpp"
#include "choir/metrics.hpp"
#include "choir/pipeline.hpp"
#include "choir/tto.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using namespace choir;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitNumeric = 3;

int exitCode(ErrorCode code)
{
  switch (code) {
  case ErrorCode::InvalidArgument:
  case ErrorCode::ModeMismatch: return kExitUsage;
  case ErrorCode::Io:
  case ErrorCode::Malformed:
  case ErrorCode::UnsupportedVersion:
  case ErrorCode::MissingField:
  case ErrorCode::LengthMismatch: return kExitIo;
  case ErrorCode::NonFinite:
  case ErrorCode::NotPositiveDefinite:
  case ErrorCode::DegenerateInput:
  case ErrorCode::IsolatedVertex: return kExitNumeric;
  }
  return kExitNumeric;
}

double seconds(std::chrono::steady_clock::time_point since)
{
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

std::string graspName(int grasp)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "grasp_%05d", grasp);
  return buf;
}

void writeText(fs::path const &path, std::string const &text)
{
  if (path.has_parent_path()) { fs::create_directories(path.parent_path()); }
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) { fail(ErrorCode::Io, "cannot write " + path.string()); }
}

int gridResolutionFor(Index m)
{
  int const r = static_cast<int>(std::lround(std::cbrt(static_cast<double>(m))));
  if (static_cast<Index>(r) * r * r != m) {
    fail(ErrorCode::LengthMismatch, "field of size " + std::to_string(m) + " is not a cubic grid");
  }
  return r;
}

// Options shared by commands that read a manifest.
struct ManifestArgs
{
  std::string manifest;
  std::string split = "test";
  int limit = 0;

  void add(CLI::App *cmd, std::string defaultSplit = "test")
  {
    split = std::move(defaultSplit);
    cmd->add_option("--manifest", manifest, "Dataset manifest (JSON)")->required();
    cmd->add_option("--split", split, "Records to process: train, val, test or all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}));
    cmd->add_option("--limit", limit, "Process at most this many records (0 = all)")->check(CLI::NonNegativeNumber);
  }

  fs::path baseDir() const { return fs::path(manifest).parent_path(); }

  std::vector<GraspSample> records(bool uniquePerGrasp = false) const
  {
    std::vector<GraspSample> all = readManifest(manifest);
    if (uniquePerGrasp) { all = uniqueGrasps(all); }
    std::vector<GraspSample> out;
    for (auto const &s : all) {
      if (split != "all" && toString(s.split) != split) { continue; }
      out.push_back(s);
      if (limit > 0 && static_cast<int>(out.size()) >= limit) { break; }
    }
    return out;
  }
};

// --- gen-data -----------------------------------------------------------------------------------

struct GenArgs
{
  DatasetConfig cfg;
  std::string out;
};

void runGen(GenArgs const &a)
{
  auto const start = std::chrono::steady_clock::now();
  std::vector<GraspSample> const samples = generateDataset(a.cfg, a.out);
  std::map<std::string, int> counts;
  for (auto const &s : samples) { ++counts[toString(s.split)]; }
  nlohmann::json report = {{"grasps", a.cfg.grasps},
                           {"records", samples.size()},
                           {"train_records", counts["train"]},
                           {"val_records", counts["val"]},
                           {"test_records", counts["test"]},
                           {"seed", a.cfg.seed},
                           {"seconds", seconds(start)}};
  writeText(fs::path(a.out) / "gen_report.json", report.dump(2) + "\n");
  std::cout << report.dump(2) << "\n";
}

// --- encode -------------------------------------------------------------------------------------

struct EncodeArgs
{
  ManifestArgs m;
  std::string out;
  int resolution = 16;
  double extent = 0.2;
  std::string scheme = "ordered";
  std::uint64_t assignmentSeed = 0;
  bool observations = false;
};

void runEncode(EncodeArgs const &a)
{
  EncodeOptions opt;
  opt.scheme = a.scheme == "ordered" ? AnchorAssignment::Scheme::Ordered : AnchorAssignment::Scheme::Shuffled;
  opt.assignmentSeed = a.assignmentSeed;
  SampleEncoder enc(a.m.baseDir().string(), buildBpsGrid(a.resolution, a.extent), 4096, opt);
  fs::create_directories(a.out);
  std::ostringstream csv;
  csv << "id,kind,M,active_anchors,ms\n";
  int written = 0;
  for (auto const &s : a.m.records(!a.observations)) {
    auto const start = std::chrono::steady_clock::now();
    std::string name;
    ChoirField field;
    if (a.observations) {
      name = s.id;
      field = enc.observation(s);
    } else {
      name = graspName(s.grasp);
      field = enc.groundTruth(s);
    }
    double const ms = 1e3 * seconds(start);
    writeBytes((fs::path(a.out) / (name + ".chor")).string(), serialize(field));
    csv << name << ',' << (a.observations ? "observation" : "ground_truth") << ',' << field.size() << ','
        << (field.hasContacts() ? field.contacts->active.count() : 0) << ',' << ms << '\n';
    ++written;
  }
  writeText(fs::path(a.out) / "encode_report.csv", csv.str());
  std::cout << "encoded " << written << " fields into " << a.out << "\n";
}

// --- fit ----------------------------------------------------------------------------------------

struct FitArgs
{
  ManifestArgs m;
  std::string fields;
  std::string out;
  std::string init = "perturbed";
  bool stage1Only = false;
  double extent = 0.2;
  Stage1Config stage1;
  Stage2Config stage2;
  std::string trace;
};

std::optional<ChoirField> findField(std::string const &dir, GraspSample const &s, fs::path const &base)
{
  if (!dir.empty()) {
    for (std::string const &name : {s.id, graspName(s.grasp)}) {
      fs::path const p = fs::path(dir) / (name + ".chor");
      if (fs::exists(p)) { return deserialize(readBytes(p.string())); }
    }
    return std::nullopt;
  }
  return deserialize(readBytes((base / s.choirPath).string()));
}

void runFit(FitArgs const &a)
{
  fs::create_directories(a.out);
  std::ostringstream csv;
  csv << "id,stage1_iterations,stage1_converged_at,stage1_loss,stage2_iterations,stage2_loss,seconds\n";
  std::ofstream trace;
  if (!a.trace.empty()) {
    trace.open(a.trace);
    if (!trace) { fail(ErrorCode::Io, "cannot write " + a.trace); }
  }
  std::map<int, ObjectData> objects;
  int fitted = 0;
  for (auto const &s : a.m.records()) {
    std::optional<ChoirField> field = findField(a.fields, s, a.m.baseDir());
    if (!field) { fail(ErrorCode::Io, "no field for " + s.id + " in " + a.fields); }
    BasisPointSet const grid = buildBpsGrid(gridResolutionFor(field->size()), a.extent);
    auto it = objects.find(s.grasp);
    if (it == objects.end()) { it = objects.emplace(s.grasp, loadObject(s, a.m.baseDir().string())).first; }
    if (a.stage1Only) { field->contacts.reset(); }
    std::optional<HandParams> init;
    if (a.init == "perturbed") { init = s.perturbed; }

    auto const start = std::chrono::steady_clock::now();
    FullFit const fit = fitFull(init, *field, it->second.cloud, grid, a.stage1, a.stage2);
    double const secs = seconds(start);
    writeHandParams((fs::path(a.out) / (s.id + ".json")).string(), fit.params);
    csv << s.id << ',' << fit.stage1.iterations << ',' << fit.stage1.convergedAt << ',' << fit.stage1.bestLoss << ','
        << (fit.stage2 ? fit.stage2->iterations : 0) << ',' << (fit.stage2 ? fit.stage2->bestLoss : 0.0) << ','
        << secs << '\n';
    if (trace) {
      for (auto const &rec : fit.stage1.trace) { trace << "{\"id\":\"" << s.id << "\",\"stage\":1," << toJsonLine(rec).substr(1) << "\n"; }
      if (fit.stage2) {
        for (auto const &rec : fit.stage2->trace) {
          trace << "{\"id\":\"" << s.id << "\",\"stage\":2," << toJsonLine(rec).substr(1) << "\n";
        }
      }
    }
    ++fitted;
  }
  writeText(fs::path(a.out) / "fit_report.csv", csv.str());
  std::cout << "fitted " << fitted << " records into " << a.out << "\n";
}

// --- train --------------------------------------------------------------------------------------

struct TrainArgs
{
  ManifestArgs m;
  DdpmConfig cfg;
  std::string mode = "refine";
  int resolution = 8;
  double extent = 0.2;
  std::string out;
  std::string log;
};

void runTrain(TrainArgs a)
{
  a.cfg.mode = contextModeFromString(a.mode);
  a.cfg.basisCount = a.resolution * a.resolution * a.resolution;
  SampleEncoder enc(a.m.baseDir().string(), buildBpsGrid(a.resolution, a.extent));
  std::vector<GraspSample> const samples = readManifest(a.m.manifest);
  std::vector<TrainingPair> const pairs = buildTrainingPairs(samples, enc, a.cfg.mode, Split::Train);
  std::string const logPath = a.log.empty() ? a.out + ".csv" : a.log;
  std::ostringstream csv;
  csv << "epoch,loss_d,loss_c\n";
  auto const start = std::chrono::steady_clock::now();
  DdpmModel const model = trainDdpm(pairs, a.cfg, [&](EpochLog const &l) {
    csv << l.epoch << ',' << l.lossD << ',' << l.lossC << '\n';
  });
  writeBytes(a.out, saveCheckpoint(model));
  writeText(logPath, csv.str());
  std::cout << "trained " << toString(a.cfg.mode) << " model on " << pairs.size() << " pairs in " << seconds(start)
            << " s; wrote " << a.out << "\n";
}

// --- sample -------------------------------------------------------------------------------------

struct SampleArgs
{
  ManifestArgs m;
  std::string model;
  std::string out;
  std::uint64_t seed = 0;
  double extent = 0.2;
  InferenceConfig inference;
  bool noFit = false;
};

void runSample(SampleArgs const &a)
{
  DdpmModel const model = loadCheckpoint(readBytes(a.model));
  bool const synth = model.config.mode == ContextMode::Synth;
  SampleEncoder enc(a.m.baseDir().string(), buildBpsGrid(gridResolutionFor(model.config.basisCount), a.extent));
  fs::create_directories(a.out);
  std::ostringstream csv;
  csv << "id,active_anchors,stage1_iterations,stage2_iterations,seconds\n";
  int n = 0;
  for (auto const &s : a.m.records(synth)) {
    std::string const name = synth ? graspName(s.grasp) : s.id;
    std::uint64_t const seed = deriveSeed(a.seed, static_cast<std::uint64_t>(s.grasp), static_cast<std::uint64_t>(s.copy));
    auto const start = std::chrono::steady_clock::now();
    ChoirField field;
    if (a.noFit) {
      field = sampleField(model, synth ? enc.objectContext(s) : enc.observation(s), seed, a.inference.temperature);
    } else {
      Inference const inf = synth ? synthesize(model, s, enc, seed, a.inference) : refine(model, s, enc, seed, a.inference);
      field = inf.field;
      writeHandParams((fs::path(a.out) / (name + ".json")).string(), inf.fit.params);
      csv << name << ',' << field.contacts->active.count() << ',' << inf.fit.stage1.iterations << ','
          << (inf.fit.stage2 ? inf.fit.stage2->iterations : 0) << ',' << seconds(start) << '\n';
    }
    writeBytes((fs::path(a.out) / (name + ".chor")).string(), serialize(field));
    ++n;
  }
  if (!a.noFit) { writeText(fs::path(a.out) / "sample_report.csv", csv.str()); }
  std::cout << "sampled " << n << " " << (synth ? "grasps" : "records") << " into " << a.out << "\n";
}

// --- eval ---------------------------------------------------------------------------------------

struct EvalArgs
{
  ManifestArgs m;
  std::string predictions;
  std::string out;
};

void runEval(EvalArgs const &a)
{
  SampleEncoder enc(a.m.baseDir().string(), buildBpsGrid(2, 0.2));
  bool const gt = a.predictions == "gt", perturbed = a.predictions == "perturbed";
  std::vector<SampleMetrics> rows;
  std::ostringstream csv;
  csv << "id,mpjpe_mm,r_mpjpe_mm,iv_cm3,precision,recall,f1\n";
  std::set<std::string> seen;
  for (auto const &s : a.m.records(gt)) {
    std::string name = s.id;
    HandParams pred;
    if (gt) {
      name = graspName(s.grasp);
      pred = s.gt;
    } else if (perturbed) {
      pred = s.perturbed;
    } else {
      fs::path p = fs::path(a.predictions) / (s.id + ".json");
      if (!fs::exists(p)) {
        name = graspName(s.grasp);
        p = fs::path(a.predictions) / (name + ".json");
      }
      if (!fs::exists(p)) { continue; }
      if (!seen.insert(name).second) { continue; }
      pred = readHandParams(p.string());
    }
    SampleMetrics const m = evaluate(pred, s, enc);
    rows.push_back(m);
    csv << name << ',' << m.mpjpe << ',' << m.rMpjpe << ',' << m.iv << ',' << m.contact.precision << ','
        << m.contact.recall << ',' << m.contact.f1 << '\n';
  }
  if (rows.empty()) { fail(ErrorCode::Io, "no predictions found in " + a.predictions); }
  std::string const json = toJson(summarize(rows));
  writeText(a.out + ".csv", csv.str());
  writeText(a.out + ".json", json + "\n");
  std::cout << json << "\n";
}

// --- bench --------------------------------------------------------------------------------------

struct BenchArgs
{
  ManifestArgs m;
  int resolution = 16;
  double extent = 0.2;
  int repeats = 1;
  std::string out;
};

void runBench(BenchArgs const &a)
{
  BasisPointSet const grid = buildBpsGrid(a.resolution, a.extent);
  std::vector<double> ms;
  for (auto const &s : a.m.records()) {
    ObjectData const obj = loadObject(s, a.m.baseDir().string());
    HandPose const hand = forwardKinematics(s.gt);
    for (int r = 0; r < a.repeats; ++r) {
      auto const start = std::chrono::steady_clock::now();
      ChoirField const f = encodeChoir(obj.cloud, hand, grid);
      ms.push_back(1e3 * seconds(start));
      if (f.size() != grid.size()) { fail(ErrorCode::DegenerateInput, "unexpected field size"); }
    }
  }
  if (ms.empty()) { fail(ErrorCode::InvalidArgument, "no records to benchmark"); }
  double mean = 0.0, sq = 0.0;
  for (double v : ms) { mean += v; }
  mean /= double(ms.size());
  for (double v : ms) { sq += (v - mean) * (v - mean); }
  double const sd = std::sqrt(sq / double(ms.size()));
  nlohmann::json report = {{"samples", ms.size()},
                           {"basis_points", grid.size()},
                           {"cloud_points", 4096},
                           {"encode_ms_mean", mean},
                           {"encode_ms_std", sd}};
  if (!a.out.empty()) { writeText(a.out, report.dump(2) + "\n"); }
  std::cout << report.dump(2) << "\n";
}

// Appends `--key=value` for every line of a flat config file, right after the subcommand name, so
// explicit flags given later on the command line take precedence.
std::vector<std::string> expandConfig(std::vector<std::string> args)
{
  for (size_t i = 0; i < args.size(); ++i) {
    std::string path;
    size_t erase = 0;
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      erase = 2;
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      erase = 1;
    } else {
      continue;
    }
    std::ifstream in(path);
    if (!in) { fail(ErrorCode::Io, "cannot read config " + path); }
    std::vector<std::string> flags;
    std::string line;
    while (std::getline(in, line)) {
      auto const hash = line.find('#');
      if (hash != std::string::npos) { line.erase(hash); }
      auto const eq = line.find('=');
      auto trim = [](std::string s) {
        s.erase(0, s.find_first_not_of(" \t\r"));
        s.erase(s.find_last_not_of(" \t\r") + 1);
        return s;
      };
      if (trim(line).empty()) { continue; }
      if (eq == std::string::npos) { fail(ErrorCode::InvalidArgument, "config line without '=': " + line); }
      flags.push_back("--" + trim(line.substr(0, eq)) + "=" + trim(line.substr(eq + 1)));
    }
    args.erase(args.begin() + static_cast<long>(i), args.begin() + static_cast<long>(i + erase));
    // args[0] is the program, args[1] the subcommand.
    size_t const at = std::min<size_t>(2, args.size());
    args.insert(args.begin() + static_cast<long>(at), flags.begin(), flags.end());
    break;
  }
  return args;
}

} // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Hand-object interaction fields: data generation, encoding, fitting and diffusion"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  GenArgs gen;
  auto *genCmd = app.add_subcommand("gen-data", "Generate a synthetic grasp dataset and manifest");
  genCmd->add_option("--out", gen.out, "Output directory")->required();
  genCmd->add_option("--grasps", gen.cfg.grasps, "Number of ground-truth grasps")->check(CLI::PositiveNumber);
  genCmd->add_option("--seed", gen.cfg.seed, "Dataset seed");
  genCmd->add_option("--cloud-points", gen.cfg.cloudPoints, "Object cloud size")->check(CLI::PositiveNumber);
  genCmd->add_option("--train-copies", gen.cfg.trainCopies, "Perturbed copies per train grasp");
  genCmd->add_option("--eval-copies", gen.cfg.evalCopies, "Perturbed copies per val/test grasp");
  genCmd->add_option("--resolution", gen.cfg.gridResolution, "Grid resolution of the stored fields")->check(CLI::Range(2, 64));
  genCmd->add_option("--extent", gen.cfg.gridExtent, "Grid half-width in meters")->check(CLI::PositiveNumber);

  EncodeArgs enc;
  auto *encCmd = app.add_subcommand("encode", "Encode ground-truth (or observed) fields for manifest records");
  enc.m.add(encCmd, "all");
  encCmd->add_option("--out", enc.out, "Output directory for .chor files")->required();
  encCmd->add_option("--resolution", enc.resolution, "Grid resolution")->check(CLI::Range(2, 64));
  encCmd->add_option("--extent", enc.extent, "Grid half-width in meters")->check(CLI::PositiveNumber);
  encCmd->add_option("--scheme", enc.scheme, "Anchor assignment")->check(CLI::IsMember({"ordered", "shuffled"}));
  encCmd->add_option("--assignment-seed", enc.assignmentSeed, "Seed of the shuffled assignment");
  encCmd->add_flag("--observations", enc.observations, "Encode perturbed hands without contacts, one per record");

  FitArgs fit;
  auto *fitCmd = app.add_subcommand("fit", "Fit hand parameters to fields by test-time optimization");
  fit.m.add(fitCmd);
  fitCmd->add_option("--fields", fit.fields, "Directory of .chor fields (default: ground truth from the manifest)");
  fitCmd->add_option("--out", fit.out, "Output directory for fitted parameters")->required();
  fitCmd->add_option("--init", fit.init, "Initial estimate")->check(CLI::IsMember({"perturbed", "none"}));
  fitCmd->add_flag("--stage1-only", fit.stage1Only, "Skip the contact stage");
  fitCmd->add_option("--extent", fit.extent, "Grid half-width in meters")->check(CLI::PositiveNumber);
  fitCmd->add_option("--stage1-lr", fit.stage1.lr, "Stage-1 learning rate")->check(CLI::PositiveNumber);
  fitCmd->add_option("--stage1-iterations", fit.stage1.maxIterations, "Stage-1 iteration cap")->check(CLI::PositiveNumber);
  fitCmd->add_option("--stage2-lr", fit.stage2.lr, "Stage-2 learning rate")->check(CLI::PositiveNumber);
  fitCmd->add_option("--stage2-iterations", fit.stage2.maxIterations, "Stage-2 iteration cap")->check(CLI::PositiveNumber);
  fitCmd->add_option("--trace", fit.trace, "Write per-iteration JSON lines here");

  TrainArgs train;
  auto *trainCmd = app.add_subcommand("train", "Train a conditional diffusion model on the train split");
  trainCmd->add_option("--manifest", train.m.manifest, "Dataset manifest (JSON)")->required();
  trainCmd->add_option("--mode", train.mode, "Conditioning")->check(CLI::IsMember({"refine", "synth"}));
  trainCmd->add_option("--out", train.out, "Checkpoint path")->required();
  trainCmd->add_option("--log", train.log, "Training log CSV (default: <out>.csv)");
  trainCmd->add_option("--resolution", train.resolution, "Grid resolution")->check(CLI::Range(2, 32));
  trainCmd->add_option("--extent", train.extent, "Grid half-width in meters")->check(CLI::PositiveNumber);
  trainCmd->add_option("--steps", train.cfg.steps, "Diffusion steps")->check(CLI::Range(2, 10000));
  trainCmd->add_option("--beta-min", train.cfg.betaMin, "First noise variance")->check(CLI::PositiveNumber);
  trainCmd->add_option("--beta-max", train.cfg.betaMax, "Last noise variance")->check(CLI::PositiveNumber);
  trainCmd->add_option("--width", train.cfg.width, "Hidden width")->check(CLI::PositiveNumber);
  trainCmd->add_option("--blocks", train.cfg.blocks, "Residual blocks")->check(CLI::PositiveNumber);
  trainCmd->add_option("--contact-weight", train.cfg.contactWeight, "Weight of the contact loss");
  trainCmd->add_option("--epochs", train.cfg.epochs, "Training epochs")->check(CLI::PositiveNumber);
  trainCmd->add_option("--batch-size", train.cfg.batchSize, "Minibatch size")->check(CLI::PositiveNumber);
  trainCmd->add_option("--lr", train.cfg.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  trainCmd->add_option("--seed", train.cfg.seed, "Training seed");

  SampleArgs sample;
  auto *sampleCmd = app.add_subcommand("sample", "Sample fields with a trained model and fit hands to them");
  sample.m.add(sampleCmd);
  sampleCmd->add_option("--model", sample.model, "Checkpoint")->required();
  sampleCmd->add_option("--out", sample.out, "Output directory")->required();
  sampleCmd->add_option("--seed", sample.seed, "Sampling seed");
  sampleCmd->add_option("--temperature", sample.inference.temperature, "Noise temperature")->check(CLI::NonNegativeNumber);
  sampleCmd->add_option("--extent", sample.extent, "Grid half-width in meters")->check(CLI::PositiveNumber);
  sampleCmd->add_flag("--no-fit", sample.noFit, "Only write the sampled fields");

  EvalArgs eval;
  auto *evalCmd = app.add_subcommand("eval", "Evaluate predicted hands against ground truth");
  eval.m.add(evalCmd);
  evalCmd->add_option("--predictions", eval.predictions, "Directory of <id>.json parameters, or 'gt' / 'perturbed'")
    ->required();
  evalCmd->add_option("--out", eval.out, "Report path prefix (writes .csv and .json)")->required();

  BenchArgs bench;
  auto *benchCmd = app.add_subcommand("bench", "Time single-sample encoding");
  bench.m.add(benchCmd);
  bench.m.limit = 50;
  benchCmd->add_option("--resolution", bench.resolution, "Grid resolution")->check(CLI::Range(2, 64));
  benchCmd->add_option("--extent", bench.extent, "Grid half-width in meters")->check(CLI::PositiveNumber);
  benchCmd->add_option("--repeats", bench.repeats, "Timed repetitions per record")->check(CLI::PositiveNumber);
  benchCmd->add_option("--out", bench.out, "Write the JSON report here");

  for (auto *cmd : app.get_subcommands({})) { cmd->add_option("--config", "Flat key=value file of option defaults"); }

  try {
    std::vector<std::string> args = expandConfig(std::vector<std::string>(argv, argv + argc));
    std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
    app.parse(rev);
  } catch (CLI::CallForHelp const &e) {
    return app.exit(e);
  } catch (CLI::CallForAllHelp const &e) {
    return app.exit(e);
  } catch (CLI::ParseError const &e) {
    app.exit(e);
    return kExitUsage;
  } catch (Error const &e) {
    std::cerr << "error: " << e.what() << "\n";
    return exitCode(e.code());
  }

  try {
    if (*genCmd) { runGen(gen); }
    if (*encCmd) { runEncode(enc); }
    if (*fitCmd) { runFit(fit); }
    if (*trainCmd) { runTrain(train); }
    if (*sampleCmd) { runSample(sample); }
    if (*evalCmd) { runEval(eval); }
    if (*benchCmd) { runBench(bench); }
  } catch (Error const &e) {
    std::cerr << "error: " << e.what() << "\n";
    return exitCode(e.code());
  } catch (nlohmann::json::exception const &e) {
    std::cerr << "error: malformed JSON: " << e.what() << "\n";
    return kExitIo;
  } catch (fs::filesystem_error const &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (std::exception const &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return 0;
}
