// tools/gdistill_main.cc

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

// Command-line front end. Exit codes: 0 success, 1 usage error, 2 bad data
// or config, 3 runtime failure (numeric trouble mid-run). Each command
// writes a <command>-manifest.json run manifest into its output directory
// listing every file it produced.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gdistill/archive.h"
#include "gdistill/checkpoint.h"
#include "gdistill/common.h"
#include "gdistill/config_file.h"
#include "gdistill/corpus.h"
#include "gdistill/corpus_io.h"
#include "gdistill/pipeline.h"
#include "gdistill/probe.h"
#include "gdistill/retrieval.h"
#include "gdistill/rng.h"
#include "gdistill/training.h"

namespace {

using gdistill::ConfigFile;
using gdistill::Corpus;
using gdistill::RunManifest;

std::vector<std::string> SplitCommaList(const std::string &text,
                                        const std::string &what) {
  std::vector<std::string> out;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t end = text.find(',', pos);
    if (end == std::string::npos) end = text.size();
    std::string token = text.substr(pos, end - pos);
    while (!token.empty() && token.front() == ' ') token.erase(0, 1);
    while (!token.empty() && token.back() == ' ') token.pop_back();
    if (!token.empty()) out.push_back(token);
    pos = end + 1;
  }
  if (out.empty())
    throw gdistill::ConfigError(gdistill::Cat(what, ": empty list"));
  return out;
}

std::vector<double> ParseFractions(const std::string &text) {
  std::vector<double> out;
  for (const auto &token : SplitCommaList(text, "--fractions")) {
    char *stop = nullptr;
    double v = std::strtod(token.c_str(), &stop);
    if (stop == token.c_str() || *stop != '\0')
      throw gdistill::ConfigError(
          gdistill::Cat("--fractions: '", token, "' is not a number"));
    out.push_back(v);
  }
  return out;
}

std::string JoinPath(const std::string &dir, const std::string &name) {
  return (std::filesystem::path(dir) / name).string();
}

void EnsureDir(const std::string &dir) {
  if (dir.empty())
    throw gdistill::ConfigError("output directory must not be empty");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw gdistill::DataError(
        gdistill::Cat("cannot create ", dir, ": ", ec.message()));
}

void WriteTextFile(const std::string &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out.good())
    throw gdistill::DataError(
        gdistill::Cat("cannot open ", path, " for writing"));
  out << text;
  if (!out.good())
    throw gdistill::DataError(gdistill::Cat("failed writing ", path));
}

// Everything the subcommands can take; unused fields stay at defaults.
struct Args {
  std::string config_path;
  std::string corpus_dir;
  std::string out_dir;
  std::string ckpt_path;
  std::string layers = "";
  std::string archives;
  std::string fractions;
  std::string manifest_path;
  uint64_t seed = 0;
  bool seed_given = false;
  bool pca = false;
  bool show_config = false;
  int jobs = 1;
};

int RunGenData(const Args &a, const std::string &cmdline) {
  ConfigFile cfg = ConfigFile::Load(a.config_path);
  gdistill::CorpusConfig ccfg = gdistill::CorpusConfigFromFile(cfg);
  if (a.seed_given) ccfg.seed = a.seed;

  RunManifest manifest = gdistill::NewRunManifest("gen-data", cfg, ccfg.seed);
  manifest.command = cmdline;

  auto start = std::chrono::steady_clock::now();
  Corpus corpus = gdistill::GenerateCorpus(ccfg);
  gdistill::WriteCorpus(corpus, a.out_dir);
  manifest.AddTiming("gen-data", std::chrono::duration<double>(
                                     std::chrono::steady_clock::now() - start)
                                     .count());

  manifest.AddArtifact(JoinPath(a.out_dir, "manifest.txt"));
  manifest.AddArtifact(JoinPath(a.out_dir, "corpus.cfg"));
  for (const auto &pair : corpus.pairs) {
    manifest.AddArtifact(JoinPath(a.out_dir, "utt/" + pair.pair_id + ".gdfa"));
    manifest.AddArtifact(JoinPath(a.out_dir, "img/" + pair.pair_id + ".gdfa"));
  }
  gdistill::WriteRunManifest(manifest,
                             JoinPath(a.out_dir, "gen-data-manifest.json"));

  int64_t frames = 0;
  for (const auto &pair : corpus.pairs)
    frames += pair.utterance.features.num_frames;
  std::cout << "wrote " << corpus.pairs.size() << " pairs (" << frames
            << " frames) to " << a.out_dir << "\n";
  return 0;
}

int RunTrain(const Args &a, const std::string &cmdline) {
  ConfigFile cfg = ConfigFile::Load(a.config_path);
  gdistill::TrainingConfig tcfg = gdistill::TrainingConfigFromFile(cfg);
  Corpus corpus = gdistill::ReadCorpus(a.corpus_dir);

  RunManifest manifest = gdistill::NewRunManifest("train", cfg, tcfg.seed);
  manifest.command = cmdline;

  gdistill::TrainPipelineResult result =
      gdistill::TrainPipeline(corpus, cfg, a.out_dir, &std::cerr, &manifest);
  gdistill::WriteRunManifest(manifest,
                             JoinPath(a.out_dir, "train-manifest.json"));

  std::cout << "checkpoint: " << result.checkpoint_path << " (best epoch "
            << result.train.best_epoch << ", heldout R@10 "
            << result.train.best_r10 << ")\n\n"
            << result.heldout.TextTable();
  return 0;
}

int RunEvalRetrieval(const Args &a, const std::string &cmdline) {
  ConfigFile cfg =
      a.config_path.empty() ? ConfigFile() : ConfigFile::Load(a.config_path);
  gdistill::TrainingConfig tcfg = gdistill::TrainingConfigFromFile(cfg);
  Corpus corpus = gdistill::ReadCorpus(a.corpus_dir);
  gdistill::GroundingModel<float> model =
      gdistill::LoadCheckpoint(a.ckpt_path);

  gdistill::DataSplit split = gdistill::SplitPairs(
      static_cast<int>(corpus.pairs.size()), tcfg.holdout_fraction);
  gdistill::RetrievalReport report =
      gdistill::EvaluateRetrieval(model, corpus, split.heldout);
  std::cout << report.TextTable();

  if (!a.out_dir.empty()) {
    EnsureDir(a.out_dir);
    RunManifest manifest =
        gdistill::NewRunManifest("eval-retrieval", cfg, tcfg.seed);
    manifest.command = cmdline;
    std::string csv_path = JoinPath(a.out_dir, "retrieval.csv");
    std::string txt_path = JoinPath(a.out_dir, "retrieval.txt");
    WriteTextFile(csv_path, report.Csv());
    WriteTextFile(txt_path, report.TextTable());
    manifest.AddArtifact(csv_path);
    manifest.AddArtifact(txt_path);
    gdistill::WriteRunManifest(
        manifest, JoinPath(a.out_dir, "eval-retrieval-manifest.json"));
  }
  return 0;
}

int RunDistill(const Args &a, const std::string &cmdline) {
  Corpus corpus = gdistill::ReadCorpus(a.corpus_dir);

  std::vector<std::string> layers;
  if (a.layers.empty()) {
    // Default to every tap the checkpointed model has.
    gdistill::GroundingModel<float> model =
        gdistill::LoadCheckpoint(a.ckpt_path);
    layers = model.TapNames();
  } else {
    layers = SplitCommaList(a.layers, "--layers");
  }

  RunManifest manifest = gdistill::NewRunManifest("distill", ConfigFile(), 0);
  manifest.command = cmdline;
  std::vector<std::string> paths = gdistill::DistillPipeline(
      a.ckpt_path, corpus, layers, a.out_dir, a.jobs, &manifest);

  std::string manifest_dir =
      a.out_dir.empty()
          ? std::filesystem::path(a.ckpt_path).parent_path().string()
          : a.out_dir;
  gdistill::WriteRunManifest(manifest,
                             JoinPath(manifest_dir, "distill-manifest.json"));
  for (const auto &p : paths) std::cout << p << "\n";
  return 0;
}

int RunProbe(const Args &a, const std::string &cmdline) {
  ConfigFile cfg =
      a.config_path.empty() ? ConfigFile() : ConfigFile::Load(a.config_path);
  gdistill::ProbeConfig pcfg = gdistill::ProbeConfigFromFile(cfg);
  Corpus corpus = gdistill::ReadCorpus(a.corpus_dir);
  std::vector<std::string> paths = SplitCommaList(a.archives, "--archives");

  RunManifest manifest = gdistill::NewRunManifest("probe", cfg, pcfg.seed);
  manifest.command = cmdline;

  auto start = std::chrono::steady_clock::now();
  gdistill::InvarianceTable table =
      gdistill::ProbePipeline(paths, corpus, pcfg, a.jobs);
  manifest.AddTiming("probe", std::chrono::duration<double>(
                                  std::chrono::steady_clock::now() - start)
                                  .count());
  std::cout << table.TextTable();

  if (!a.out_dir.empty()) {
    EnsureDir(a.out_dir);
    std::string csv_path = JoinPath(a.out_dir, "probes.csv");
    std::string txt_path = JoinPath(a.out_dir, "probes.txt");
    WriteTextFile(csv_path, table.Csv());
    WriteTextFile(txt_path, table.TextTable());
    manifest.AddArtifact(csv_path);
    manifest.AddArtifact(txt_path);

    if (a.pca) {
      int64_t sample_size = gdistill::PcaSampleFromFile(cfg);
      for (const auto &path : paths) {
        gdistill::FeatureArchive archive = gdistill::ReadArchive(path);
        gdistill::FrameDataset ds =
            gdistill::DatasetFromArchive(archive, corpus);
        gdistill::FrameDataset sample = gdistill::SampleFrames(
            ds, sample_size,
            gdistill::DeriveSeed(pcfg.seed,
                                 "pca:" + archive.header.layer_name));
        gdistill::Pca2d pca =
            gdistill::PcaProject2d(sample.x, sample.Size(), sample.dim);
        std::string pca_path = JoinPath(
            a.out_dir, archive.header.layer_name + "-pca.csv");
        WriteTextFile(pca_path,
                      gdistill::PcaCsv(pca, sample, corpus.inventory));
        manifest.AddArtifact(pca_path);
      }
    }
    gdistill::WriteRunManifest(manifest,
                               JoinPath(a.out_dir, "probe-manifest.json"));
  }
  return 0;
}

int RunScalingExp(const Args &a, const std::string &cmdline) {
  ConfigFile cfg = ConfigFile::Load(a.config_path);
  gdistill::TrainingConfig tcfg = gdistill::TrainingConfigFromFile(cfg);
  Corpus corpus = gdistill::ReadCorpus(a.corpus_dir);

  std::vector<double> fractions = a.fractions.empty()
                                      ? gdistill::ScalingFractionsFromFile(cfg)
                                      : ParseFractions(a.fractions);

  RunManifest manifest = gdistill::NewRunManifest("scaling-exp", cfg,
                                                  tcfg.seed);
  manifest.command = cmdline;
  gdistill::ScalingTable table = gdistill::ScalingExperiment(
      corpus, cfg, fractions, a.out_dir, a.jobs, &std::cerr, &manifest);
  gdistill::WriteRunManifest(manifest,
                             JoinPath(a.out_dir, "scaling-exp-manifest.json"));
  std::cout << table.TextTable();
  return 0;
}

int RunReport(const Args &a) {
  RunManifest m = gdistill::ReadRunManifest(a.manifest_path);
  std::cout << "run:      " << m.run_id << "\n"
            << "command:  " << m.command << "\n"
            << "tool:     " << m.tool_version << "\n"
            << "seed:     " << m.seed << "\n";
  if (!m.timings.empty()) {
    std::cout << "timings:\n";
    for (const auto &t : m.timings)
      std::cout << "  " << t.name << ": " << t.seconds << " s\n";
  }

  // An artifact may be recorded relative to the run's working directory;
  // also try resolving it next to the manifest before calling it missing.
  std::filesystem::path base =
      std::filesystem::path(a.manifest_path).parent_path();
  int missing = 0;
  std::cout << "artifacts:\n";
  for (const auto &artifact : m.artifacts) {
    bool ok = std::filesystem::exists(artifact) ||
              std::filesystem::exists(base / artifact);
    if (!ok) ++missing;
    std::cout << "  [" << (ok ? "ok" : "MISSING") << "] " << artifact << "\n";
  }
  if (a.show_config)
    std::cout << "config:\n" << m.config_snapshot;
  if (missing > 0)
    throw gdistill::DataError(gdistill::Cat(
        missing, " artifact(s) listed in the manifest are missing"));
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Synthetic audio-visual grounding: corpus generation, triplet "
               "training, retrieval evaluation, feature distillation, "
               "probing, and scaling experiments."};
  app.require_subcommand(1);
  Args a;

  CLI::App *gen = app.add_subcommand("gen-data",
                                     "Generate a synthetic paired corpus");
  gen->add_option("--config", a.config_path, "Config file with a [corpus] section")
      ->required();
  gen->add_option("--out", a.out_dir, "Corpus output directory")->required();
  gen->add_option("--seed", a.seed, "Override the config's corpus seed");

  CLI::App *train = app.add_subcommand("train",
                                       "Train a grounding model on a corpus");
  train->add_option("--config", a.config_path,
                    "Config file ([model], [training])")
      ->required();
  train->add_option("--corpus", a.corpus_dir, "Corpus directory")->required();
  train->add_option("--out", a.out_dir, "Run output directory")->required();

  CLI::App *eval = app.add_subcommand("eval-retrieval",
                                      "Score held-out cross-modal retrieval");
  eval->add_option("--ckpt", a.ckpt_path, "Model checkpoint")->required();
  eval->add_option("--corpus", a.corpus_dir, "Corpus directory")->required();
  eval->add_option("--config", a.config_path,
                   "Optional config (holdout fraction)");
  eval->add_option("--out", a.out_dir, "Optional report output directory");

  CLI::App *distill = app.add_subcommand(
      "distill", "Extract per-layer feature archives from a checkpoint");
  distill->add_option("--ckpt", a.ckpt_path, "Model checkpoint")->required();
  distill->add_option("--corpus", a.corpus_dir, "Corpus directory")
      ->required();
  distill->add_option("--layers", a.layers,
                      "Comma-separated tap names (default: all)");
  distill->add_option("--out", a.out_dir,
                      "Archive directory (default: beside the checkpoint)");
  distill->add_option("--jobs", a.jobs, "Distill up to N layers in parallel");

  CLI::App *probe = app.add_subcommand(
      "probe", "Train phonetic and condition probes over feature archives");
  probe->add_option("--corpus", a.corpus_dir, "Corpus directory")->required();
  probe->add_option("--archives", a.archives,
                    "Comma-separated feature archives")
      ->required();
  probe->add_option("--config", a.config_path,
                    "Optional config ([probe] section)");
  CLI::Option *probe_out =
      probe->add_option("--out", a.out_dir, "Report output directory");
  probe->add_flag("--pca", a.pca, "Also write 2-D projections per archive")
      ->needs(probe_out);
  probe->add_option("--jobs", a.jobs, "Probe up to N archives in parallel");

  CLI::App *scaling = app.add_subcommand(
      "scaling-exp", "Train on nested data fractions and compare trends");
  scaling->add_option("--config", a.config_path, "Config file")->required();
  scaling->add_option("--corpus", a.corpus_dir, "Corpus directory")
      ->required();
  scaling->add_option("--out", a.out_dir, "Run output directory")->required();
  scaling->add_option("--fractions", a.fractions,
                      "Comma-separated ascending fractions in (0, 1]");
  scaling->add_option("--jobs", a.jobs, "Intra-step parallelism");

  CLI::App *report = app.add_subcommand(
      "report", "Summarize a run manifest and verify its artifacts");
  report->add_option("--manifest", a.manifest_path, "run manifest JSON path")
      ->required();
  report->add_flag("--show-config", a.show_config,
                   "Print the config snapshot too");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "error: " << e.what() << "\n\n" << app.help() << "\n";
    return 1;
  }

  a.seed_given = gen->count("--seed") > 0;

  std::string cmdline;
  for (int i = 0; i < argc; ++i) {
    if (i) cmdline += " ";
    cmdline += argv[i];
  }

  try {
    if (gen->parsed()) return RunGenData(a, cmdline);
    if (train->parsed()) return RunTrain(a, cmdline);
    if (eval->parsed()) return RunEvalRetrieval(a, cmdline);
    if (distill->parsed()) return RunDistill(a, cmdline);
    if (probe->parsed()) return RunProbe(a, cmdline);
    if (scaling->parsed()) return RunScalingExp(a, cmdline);
    if (report->parsed()) return RunReport(a);
  } catch (const gdistill::ConfigError &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const gdistill::DataError &e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const gdistill::ShapeError &e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception &e) {
    // NumericError (NaN loss, refused steps) and anything unforeseen.
    std::cerr << "runtime error: " << e.what() << "\n";
    return 3;
  }
  return 1;  // unreachable with require_subcommand(1)
}
