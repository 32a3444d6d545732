// src/pipeline.cc

// Copyright 2026  gdistill authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "gdistill/pipeline.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <ostream>
#include <thread>

#include "json.hpp"

#include "gdistill/checkpoint.h"
#include "gdistill/common.h"
#include "gdistill/distill.h"
#include "gdistill/rng.h"

namespace gdistill {

namespace {

std::vector<int> ParseIntList(const std::string &text,
                              const std::string &what) {
  std::vector<int> out;
  size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && text[pos] == ' ') ++pos;
    if (pos >= text.size()) break;
    size_t end = text.find(' ', pos);
    if (end == std::string::npos) end = text.size();
    std::string token = text.substr(pos, end - pos);
    char *stop = nullptr;
    long v = std::strtol(token.c_str(), &stop, 10);
    if (stop == token.c_str() || *stop != '\0')
      throw ConfigError(Cat(what, ": '", token, "' is not an integer"));
    out.push_back(static_cast<int>(v));
    pos = end;
  }
  if (out.empty()) throw ConfigError(Cat(what, ": empty list"));
  return out;
}

std::vector<double> ParseDoubleList(const std::string &text,
                                    const std::string &what) {
  std::vector<double> out;
  size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && text[pos] == ' ') ++pos;
    if (pos >= text.size()) break;
    size_t end = text.find(' ', pos);
    if (end == std::string::npos) end = text.size();
    std::string token = text.substr(pos, end - pos);
    char *stop = nullptr;
    double v = std::strtod(token.c_str(), &stop);
    if (stop == token.c_str() || *stop != '\0')
      throw ConfigError(Cat(what, ": '", token, "' is not a number"));
    out.push_back(v);
    pos = end;
  }
  if (out.empty()) throw ConfigError(Cat(what, ": empty list"));
  return out;
}

// One "channels:kernel:pool" triplet per layer.
std::vector<DavenetLayer> ParseDavenetLayers(const std::string &text) {
  std::vector<DavenetLayer> out;
  size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && text[pos] == ' ') ++pos;
    if (pos >= text.size()) break;
    size_t end = text.find(' ', pos);
    if (end == std::string::npos) end = text.size();
    std::string token = text.substr(pos, end - pos);
    DavenetLayer layer;
    if (std::sscanf(token.c_str(), "%d:%d:%d", &layer.channels, &layer.kernel,
                    &layer.pool) != 3)
      throw ConfigError(Cat("model.davenet_layers: '", token,
                            "' is not channels:kernel:pool"));
    out.push_back(layer);
    pos = end;
  }
  if (out.empty()) throw ConfigError("model.davenet_layers: empty list");
  return out;
}

int GetIntChecked(const ConfigFile &c, const std::string &section,
                  const std::string &key, int fallback) {
  return static_cast<int>(c.GetInt(section, key, fallback));
}

std::string ReadTextFile(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw DataError(Cat("cannot open ", path));
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

void WriteTextFile(const std::string &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out.good()) throw DataError(Cat("cannot open ", path, " for writing"));
  out << text;
  if (!out.good()) throw DataError(Cat("failed writing ", path));
}

class Stopwatch {
 public:
  double Seconds() const {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ =
      std::chrono::steady_clock::now();
};

// Runs tasks [0, n) on up to `jobs` threads, task i on worker i mod jobs.
// Any task failure is rethrown (lowest task index first) after all workers
// finish, so partial output never goes unnoticed.
void RunTasks(int64_t n, int jobs,
              const std::function<void(int64_t)> &task) {
  if (jobs < 1) throw ConfigError(Cat("jobs must be >= 1, got ", jobs));
  if (n <= 0) return;
  int workers = static_cast<int>(std::min<int64_t>(jobs, n));
  if (workers == 1) {
    for (int64_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (int64_t i = w; i < n; i += workers) {
        try {
          task(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto &t : pool) t.join();
  for (const auto &err : errors)
    if (err) std::rethrow_exception(err);
}

void EnsureDir(const std::string &dir) {
  if (dir.empty()) throw ConfigError("output directory must not be empty");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError(Cat("cannot create ", dir, ": ", ec.message()));
}

std::string JoinPath(const std::string &dir, const std::string &name) {
  return (std::filesystem::path(dir) / name).string();
}

std::string FormatDouble(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

}  // namespace

ModelConfig ModelConfigFromFile(const ConfigFile &config) {
  const std::string s = "model";
  config.ExpectKeys(
      s, {"preset", "kind", "embed_dim", "input_mels", "stem_channels",
          "stack_channels", "kernel", "blocks_per_stack", "stack_stride",
          "davenet_layers", "image_channels", "image_kernel", "image_size",
          "presence_input", "presence_dim"});

  std::string preset = config.GetOr(s, "preset", "mini");
  ModelConfig m;
  if (preset == "mini") {
    m = ModelConfig::MiniPreset();
  } else if (preset == "paper") {
    // The stock defaults are the full-width architecture.
  } else {
    throw ConfigError(Cat("model.preset must be mini or paper, got '", preset,
                          "'"));
  }

  m.kind = ModelKindFromName(config.GetOr(s, "kind", ModelKindName(m.kind)));
  if (config.Has(s, "input_mels")) {
    int mels = GetIntChecked(config, s, "input_mels", 0);
    m.resdavenet.input_mels = mels;
    m.davenet.input_mels = mels;
  }
  if (config.Has(s, "stem_channels"))
    m.resdavenet.stem_channels = GetIntChecked(config, s, "stem_channels", 0);
  if (config.Has(s, "stack_channels"))
    m.resdavenet.stack_channels =
        ParseIntList(config.Get(s, "stack_channels"), "model.stack_channels");
  if (config.Has(s, "kernel"))
    m.resdavenet.kernel = GetIntChecked(config, s, "kernel", 0);
  if (config.Has(s, "blocks_per_stack"))
    m.resdavenet.blocks_per_stack =
        GetIntChecked(config, s, "blocks_per_stack", 0);
  if (config.Has(s, "stack_stride"))
    m.resdavenet.stack_stride = GetIntChecked(config, s, "stack_stride", 0);
  if (config.Has(s, "davenet_layers"))
    m.davenet.layers = ParseDavenetLayers(config.Get(s, "davenet_layers"));
  if (config.Has(s, "image_channels"))
    m.image.conv_channels =
        ParseIntList(config.Get(s, "image_channels"), "model.image_channels");
  if (config.Has(s, "image_kernel"))
    m.image.kernel = GetIntChecked(config, s, "image_kernel", 0);
  if (config.Has(s, "image_size"))
    m.image.image_size = GetIntChecked(config, s, "image_size", 0);
  m.image.presence_input = config.GetBool(s, "presence_input",
                                          m.image.presence_input);
  if (config.Has(s, "presence_dim"))
    m.image.presence_dim = GetIntChecked(config, s, "presence_dim", 0);

  // The audio embedding width follows the architecture; the image branch
  // must meet it, so embed_dim defaults to whatever the audio side says.
  m.image.embed_dim = GetIntChecked(config, s, "embed_dim", m.AudioEmbedDim());

  m.Validate();
  return m;
}

TrainingConfig TrainingConfigFromFile(const ConfigFile &config) {
  const std::string s = "training";
  config.ExpectKeys(s, {"margin", "batch_size", "lr", "momentum", "epochs",
                        "semi_hard_fraction", "crop_frames",
                        "holdout_fraction", "seed"});
  TrainingConfig t;
  t.margin = config.GetDouble(s, "margin", t.margin);
  t.batch_size = GetIntChecked(config, s, "batch_size", t.batch_size);
  t.lr = config.GetDouble(s, "lr", t.lr);
  t.momentum = config.GetDouble(s, "momentum", t.momentum);
  t.epochs = GetIntChecked(config, s, "epochs", t.epochs);
  t.semi_hard_fraction =
      config.GetDouble(s, "semi_hard_fraction", t.semi_hard_fraction);
  t.crop_frames = GetIntChecked(config, s, "crop_frames", t.crop_frames);
  t.holdout_fraction =
      config.GetDouble(s, "holdout_fraction", t.holdout_fraction);
  t.seed = static_cast<uint64_t>(
      config.GetInt(s, "seed", static_cast<int64_t>(t.seed)));
  t.Validate();
  return t;
}

namespace {

const std::vector<std::string> kProbeKeys = {
    "hidden", "epochs", "batch_size", "lr", "seed", "pca_sample"};

}  // namespace

ProbeConfig ProbeConfigFromFile(const ConfigFile &config) {
  const std::string s = "probe";
  config.ExpectKeys(s, kProbeKeys);
  ProbeConfig p;
  p.hidden = GetIntChecked(config, s, "hidden", p.hidden);
  p.epochs = GetIntChecked(config, s, "epochs", p.epochs);
  p.batch_size = GetIntChecked(config, s, "batch_size", p.batch_size);
  p.lr = config.GetDouble(s, "lr", p.lr);
  p.seed = static_cast<uint64_t>(
      config.GetInt(s, "seed", static_cast<int64_t>(p.seed)));
  p.Validate();
  return p;
}

int64_t PcaSampleFromFile(const ConfigFile &config) {
  config.ExpectKeys("probe", kProbeKeys);
  int64_t n = config.GetInt("probe", "pca_sample", 512);
  if (n < 3)
    throw ConfigError(Cat("probe.pca_sample must be >= 3, got ", n));
  return n;
}

std::vector<double> ScalingFractionsFromFile(const ConfigFile &config) {
  config.ExpectKeys("scaling", {"fractions"});
  if (!config.Has("scaling", "fractions")) return {0.25, 0.5, 1.0};
  return ParseDoubleList(config.Get("scaling", "fractions"),
                         "scaling.fractions");
}

void RunManifest::AddArtifact(const std::string &path) {
  if (std::find(artifacts.begin(), artifacts.end(), path) == artifacts.end())
    artifacts.push_back(path);
}

void RunManifest::AddTiming(const std::string &name, double seconds) {
  timings.push_back({name, seconds});
}

std::string RunManifest::ToJson() const {
  nlohmann::json j;
  j["run_id"] = run_id;
  j["command"] = command;
  j["tool_version"] = tool_version;
  j["seed"] = seed;
  j["config"] = config_snapshot;
  j["artifacts"] = artifacts;
  j["timings"] = nlohmann::json::array();
  for (const auto &t : timings)
    j["timings"].push_back({{"name", t.name}, {"seconds", t.seconds}});
  return j.dump(2) + "\n";
}

RunManifest RunManifest::FromJson(const std::string &text) {
  RunManifest m;
  try {
    nlohmann::json j = nlohmann::json::parse(text);
    m.run_id = j.at("run_id").get<std::string>();
    m.command = j.at("command").get<std::string>();
    m.tool_version = j.at("tool_version").get<std::string>();
    m.seed = j.at("seed").get<uint64_t>();
    m.config_snapshot = j.at("config").get<std::string>();
    m.artifacts = j.at("artifacts").get<std::vector<std::string>>();
    for (const auto &t : j.at("timings"))
      m.timings.push_back({t.at("name").get<std::string>(),
                           t.at("seconds").get<double>()});
  } catch (const nlohmann::json::exception &e) {
    throw DataError(Cat("run manifest: ", e.what()));
  }
  return m;
}

RunManifest NewRunManifest(const std::string &command,
                           const ConfigFile &config, uint64_t seed) {
  RunManifest m;
  m.command = command;
  m.tool_version = VersionString();
  m.seed = seed;
  m.config_snapshot = config.Serialize();
  uint64_t h = Fnv1a64(m.config_snapshot);
  h = Fnv1a64(command) ^ (h * 1099511628211ull) ^ seed;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  m.run_id = command + "-" + buf;
  return m;
}

void WriteRunManifest(const RunManifest &manifest, const std::string &path) {
  WriteTextFile(path, manifest.ToJson());
}

RunManifest ReadRunManifest(const std::string &path) {
  return RunManifest::FromJson(ReadTextFile(path));
}

TrainPipelineResult TrainPipeline(const Corpus &corpus,
                                  const ConfigFile &config,
                                  const std::string &out_dir,
                                  std::ostream *log, RunManifest *manifest) {
  ModelConfig mcfg = ModelConfigFromFile(config);
  TrainingConfig tcfg = TrainingConfigFromFile(config);
  EnsureDir(out_dir);

  TrainPipelineResult result;
  result.checkpoint_path = JoinPath(out_dir, "model.gdck");

  Stopwatch train_watch;
  result.train = TrainLoop(corpus, mcfg, tcfg, result.checkpoint_path,
                           nullptr, log);
  if (manifest) manifest->AddTiming("train", train_watch.Seconds());

  // Score the checkpoint that was actually kept, not the last-epoch state.
  Stopwatch eval_watch;
  GroundingModel<float> best = LoadCheckpoint(result.checkpoint_path);
  DataSplit split =
      SplitPairs(static_cast<int>(corpus.pairs.size()), tcfg.holdout_fraction);
  result.heldout = EvaluateRetrieval(best, corpus, split.heldout);
  if (manifest) manifest->AddTiming("eval-retrieval", eval_watch.Seconds());

  std::string curve_path = JoinPath(out_dir, "loss_curve.csv");
  std::string csv_path = JoinPath(out_dir, "retrieval.csv");
  std::string txt_path = JoinPath(out_dir, "retrieval.txt");
  WriteTextFile(curve_path, result.train.CurveCsv());
  WriteTextFile(csv_path, result.heldout.Csv());
  WriteTextFile(txt_path, result.heldout.TextTable());
  if (manifest) {
    manifest->AddArtifact(result.checkpoint_path);
    manifest->AddArtifact(curve_path);
    manifest->AddArtifact(csv_path);
    manifest->AddArtifact(txt_path);
  }
  return result;
}

std::string TapArchivePath(const std::string &checkpoint_path,
                           const std::string &layer,
                           const std::string &out_dir) {
  std::filesystem::path ckpt(checkpoint_path);
  std::filesystem::path dir =
      out_dir.empty() ? ckpt.parent_path() : std::filesystem::path(out_dir);
  return (dir / (ckpt.stem().string() + "-" + layer + ".gdfa")).string();
}

std::vector<std::string> DistillPipeline(const std::string &checkpoint_path,
                                         const Corpus &corpus,
                                         const std::vector<std::string> &layers,
                                         const std::string &out_dir, int jobs,
                                         RunManifest *manifest) {
  if (layers.empty()) throw ConfigError("no layers to distill");
  for (size_t i = 0; i < layers.size(); ++i)
    for (size_t k = i + 1; k < layers.size(); ++k)
      if (layers[i] == layers[k])
        throw ConfigError(Cat("layer '", layers[i], "' listed twice"));
  if (!out_dir.empty()) EnsureDir(out_dir);

  Stopwatch watch;
  Checkpoint ckpt = ReadCheckpoint(checkpoint_path);
  uint64_t hash = CheckpointFileHash(checkpoint_path);

  // Validate every layer name before any thread starts writing files.
  {
    GroundingModel<float> model = ModelFromCheckpoint(ckpt);
    std::vector<std::string> known = model.TapNames();
    for (const auto &layer : layers)
      if (std::find(known.begin(), known.end(), layer) == known.end()) {
        std::string list;
        for (const auto &k : known) list += (list.empty() ? "" : ", ") + k;
        throw ConfigError(Cat("unknown tap '", layer, "'; this model has: ",
                              list));
      }
  }

  std::vector<std::string> paths(layers.size());
  for (size_t i = 0; i < layers.size(); ++i)
    paths[i] = TapArchivePath(checkpoint_path, layers[i], out_dir);

  RunTasks(static_cast<int64_t>(layers.size()), jobs, [&](int64_t i) {
    // Each task gets a private model instance; the parsed checkpoint is
    // shared read-only.
    GroundingModel<float> model = ModelFromCheckpoint(ckpt);
    FeatureArchive archive = DistillCorpus(model, corpus, layers[i], hash);
    WriteArchive(archive, paths[i]);
  });

  if (manifest) {
    for (const auto &p : paths) manifest->AddArtifact(p);
    manifest->AddTiming("distill", watch.Seconds());
  }
  return paths;
}

ProbeReport ProbeArchive(const FeatureArchive &archive, const Corpus &corpus,
                         const ProbeConfig &cfg) {
  FrameDataset all = DatasetFromArchive(archive, corpus);
  FrameDataset train_pool = FilterSpeakerGroup(all, 1);
  FrameDataset test_pool = FilterSpeakerGroup(all, 2);

  // Phone probe: in-domain (condition A) training frames only, evaluated on
  // unseen speakers across all conditions.
  FrameDataset phone_train = FilterCondition(train_pool, 'A');
  ProbeModel probe = TrainFrameProbe(phone_train, cfg);
  ConditionFer fer = EvalFrameProbe(probe, test_pool);

  ProbeReport report;
  report.feature_name = archive.header.layer_name;
  report.fer_a = fer.fer[0];
  report.fer_b = fer.fer[1];
  report.fer_c = fer.fer[2];
  report.fer_d = fer.fer[3];
  report.gap = InvarianceGap(fer);
  report.domain_accuracy = TrainDomainProbe(train_pool, test_pool, cfg);
  return report;
}

InvarianceTable ProbePipeline(const std::vector<std::string> &archive_paths,
                              const Corpus &corpus, const ProbeConfig &cfg,
                              int jobs) {
  if (archive_paths.empty()) throw ConfigError("no archives to probe");

  std::vector<FeatureArchive> archives;
  archives.reserve(archive_paths.size());
  for (const auto &path : archive_paths) archives.push_back(ReadArchive(path));

  std::vector<const FeatureArchive *> ptrs;
  for (const auto &a : archives) ptrs.push_back(&a);
  RequireSameCheckpoint(ptrs);

  std::vector<ProbeReport> reports(archives.size());
  RunTasks(static_cast<int64_t>(archives.size()), jobs, [&](int64_t i) {
    // Seed per archive by its layer name, so adding or dropping an archive
    // never changes another archive's numbers.
    ProbeConfig task_cfg = cfg;
    task_cfg.seed =
        DeriveSeed(cfg.seed, Cat("probe:", archives[i].header.layer_name));
    reports[i] = ProbeArchive(archives[i], corpus, task_cfg);
  });
  return BuildInvarianceTable(std::move(reports));
}

std::string ScalingTable::Csv() const {
  std::string out = "fraction,train_pairs,r10";
  for (const auto &layer : layers) out += ",gap_" + layer;
  out += "\n";
  for (const auto &row : rows) {
    out += FormatDouble(row.fraction, 4) + "," +
           std::to_string(row.train_pairs) + "," + FormatDouble(row.r10, 6);
    for (double g : row.gaps) out += "," + FormatDouble(g, 6);
    out += "\n";
  }
  return out;
}

std::string ScalingTable::TextTable() const {
  auto pad = [](std::string s, size_t w) {
    s.resize(std::max(s.size(), w), ' ');
    return s;
  };
  std::string out = "fraction  pairs   R@10   ";
  for (const auto &layer : layers) out += "  " + pad("gap:" + layer, 10);
  out += "\n";
  for (const auto &row : rows) {
    out += pad(FormatDouble(row.fraction, 2), 8) + "  " +
           pad(std::to_string(row.train_pairs), 6) +
           pad(FormatDouble(row.r10, 4), 7);
    for (double g : row.gaps) out += "  " + pad(FormatDouble(g, 4), 10);
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += "\n";
  }
  return out;
}

ScalingTable ScalingExperiment(const Corpus &corpus, const ConfigFile &config,
                               std::vector<double> fractions,
                               const std::string &out_dir, int jobs,
                               std::ostream *log, RunManifest *manifest) {
  if (fractions.empty()) throw ConfigError("no fractions to run");
  for (double f : fractions) {
    if (f > 1.0) throw ConfigError(Cat("fraction ", f, " > 1"));
    if (!(f > 0.0)) throw ConfigError(Cat("fraction ", f, " must be > 0"));
  }
  for (size_t i = 1; i < fractions.size(); ++i)
    if (fractions[i] <= fractions[i - 1])
      throw ConfigError(Cat("fractions must be strictly ascending; ",
                            fractions[i], " follows ", fractions[i - 1]));
  std::vector<int64_t> permille(fractions.size());
  for (size_t i = 0; i < fractions.size(); ++i) {
    permille[i] = std::llround(fractions[i] * 1000.0);
    if (i > 0 && permille[i] == permille[i - 1])
      throw ConfigError(Cat("fractions ", fractions[i - 1], " and ",
                            fractions[i], " are too close to name apart"));
  }

  ModelConfig mcfg = ModelConfigFromFile(config);
  TrainingConfig tcfg = TrainingConfigFromFile(config);
  ProbeConfig pcfg = ProbeConfigFromFile(config);
  EnsureDir(out_dir);

  DataSplit split =
      SplitPairs(static_cast<int>(corpus.pairs.size()), tcfg.holdout_fraction);
  if (split.train.empty()) throw DataError("training split is empty");

  // One shuffled ordering; every fraction trains on a prefix of it, which
  // makes the subsets nested by construction.
  std::vector<int> order = split.train;
  Rng order_rng(DeriveSeed(tcfg.seed, "scaling-order"));
  for (size_t i = order.size() - 1; i > 0; --i)
    std::swap(order[i], order[order_rng.UniformInt(static_cast<int64_t>(i) + 1)]);

  std::vector<std::string> tap_names;
  {
    GroundingModel<float> shape_probe(mcfg, 0);
    tap_names = shape_probe.TapNames();
  }

  ScalingTable table;
  table.layers.push_back("fbank");
  for (const auto &name : tap_names) table.layers.push_back(name);

  // The raw-feature row does not depend on the trained model, so probe it
  // once and reuse the result for every fraction.
  ProbeReport raw_report;
  {
    Stopwatch watch;
    FeatureArchive raw = RawFeatureArchive(corpus);
    ProbeConfig raw_cfg = pcfg;
    raw_cfg.seed = DeriveSeed(pcfg.seed, "probe:fbank");
    raw_report = ProbeArchive(raw, corpus, raw_cfg);
    if (manifest) manifest->AddTiming("probe-fbank", watch.Seconds());
  }

  for (size_t fi = 0; fi < fractions.size(); ++fi) {
    double fraction = fractions[fi];
    std::string tag = Cat("frac-", permille[fi]);
    int64_t want = static_cast<int64_t>(
        std::ceil(fraction * static_cast<double>(order.size())));
    std::vector<int> subset(order.begin(), order.begin() + want);
    std::sort(subset.begin(), subset.end());

    if (log)
      *log << tag << ": " << subset.size() << " of " << order.size()
           << " training pairs\n";

    std::string ckpt_path = JoinPath(out_dir, tag + ".gdck");
    Stopwatch train_watch;
    TrainLoop(corpus, mcfg, tcfg, ckpt_path, &subset, log);
    if (manifest) {
      manifest->AddTiming(tag + "-train", train_watch.Seconds());
      manifest->AddArtifact(ckpt_path);
    }

    GroundingModel<float> model = LoadCheckpoint(ckpt_path);
    RetrievalReport retrieval = EvaluateRetrieval(model, corpus, split.heldout);

    std::vector<std::string> tap_paths =
        DistillPipeline(ckpt_path, corpus, tap_names, out_dir, jobs, manifest);

    Stopwatch probe_watch;
    std::vector<ProbeReport> reports(tap_names.size());
    RunTasks(static_cast<int64_t>(tap_names.size()), jobs, [&](int64_t i) {
      FeatureArchive archive = ReadArchive(tap_paths[i]);
      ProbeConfig task_cfg = pcfg;
      task_cfg.seed =
          DeriveSeed(pcfg.seed, Cat("probe:", archive.header.layer_name));
      reports[i] = ProbeArchive(archive, corpus, task_cfg);
    });
    if (manifest) manifest->AddTiming(tag + "-probe", probe_watch.Seconds());

    ScalingRow row;
    row.fraction = fraction;
    row.train_pairs = static_cast<int>(subset.size());
    row.r10 = retrieval.mean_recall10;
    row.gaps.push_back(raw_report.gap);
    for (const auto &r : reports) row.gaps.push_back(r.gap);
    table.rows.push_back(row);

    // Per-fraction probe table, raw row included for comparison.
    std::vector<ProbeReport> with_raw = reports;
    with_raw.push_back(raw_report);
    InvarianceTable probes = BuildInvarianceTable(std::move(with_raw));
    std::string probes_csv = JoinPath(out_dir, tag + "-probes.csv");
    std::string probes_txt = JoinPath(out_dir, tag + "-probes.txt");
    WriteTextFile(probes_csv, probes.Csv());
    WriteTextFile(probes_txt, probes.TextTable());
    if (manifest) {
      manifest->AddArtifact(probes_csv);
      manifest->AddArtifact(probes_txt);
    }

    if (log)
      *log << tag << ": heldout R@10 " << FormatDouble(row.r10, 4) << "\n";
  }

  std::string csv_path = JoinPath(out_dir, "scaling.csv");
  std::string txt_path = JoinPath(out_dir, "scaling.txt");
  WriteTextFile(csv_path, table.Csv());
  WriteTextFile(txt_path, table.TextTable());
  if (manifest) {
    manifest->AddArtifact(csv_path);
    manifest->AddArtifact(txt_path);
  }
  return table;
}

}  // namespace gdistill
