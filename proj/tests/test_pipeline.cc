// tests/test_pipeline.cc

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

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

#include "gdistill/archive.h"
#include "gdistill/checkpoint.h"
#include "gdistill/common.h"
#include "gdistill/config_file.h"
#include "gdistill/corpus.h"
#include "gdistill/distill.h"
#include "gdistill/models.h"
#include "gdistill/pipeline.h"
#include "gdistill/probe.h"
#include "gdistill/training.h"

namespace gdistill {
namespace {

// Scratch directory that cleans up after itself. Each test gets its own so
// parallel ctest invocations cannot collide.
struct TestDir {
  std::filesystem::path path;

  explicit TestDir(const std::string &tag) {
    path = std::filesystem::temp_directory_path() /
           ("gdistill-pipe-" + tag + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TestDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string Sub(const std::string &name) const {
    return (path / name).string();
  }
};

Corpus TinyCorpus(int n_pairs, uint64_t seed) {
  CorpusConfig cfg;
  cfg.n_pairs = n_pairs;
  cfg.vocab_size = 10;
  cfg.n_phones = 8;
  cfg.n_speakers = 4;
  cfg.seed = seed;
  return GenerateCorpus(cfg);
}

// A model small enough that one training epoch takes well under a second.
std::string TinyConfigText() {
  return "[model]\n"
         "stem_channels = 8\n"
         "stack_channels = 8 16\n"
         "kernel = 3\n"
         "blocks_per_stack = 1\n"
         "image_channels = 4 8\n"
         "[training]\n"
         "epochs = 1\n"
         "batch_size = 4\n"
         "crop_frames = 16\n"
         "holdout_fraction = 0.5\n"
         "seed = 3\n"
         "[probe]\n"
         "epochs = 2\n"
         "batch_size = 64\n"
         "seed = 1\n";
}

std::string SaveTinyCheckpoint(const std::string &path, uint64_t seed) {
  ConfigFile cfg = ConfigFile::Parse(TinyConfigText(), "tiny");
  ModelConfig mcfg = ModelConfigFromFile(cfg);
  GroundingModel<float> model(mcfg, seed);
  SaveCheckpoint(model, 0, path);
  return path;
}

std::string ReadFileBytes(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

TEST_CASE("run manifest: json round-trip is exact") {
  TestDir dir("manifest");
  ConfigFile cfg = ConfigFile::Parse("[training]\nepochs = 2\n", "t");
  RunManifest m = NewRunManifest("train", cfg, 42);
  m.command = "gdistill train --config t.cfg";
  m.AddArtifact("out/model.gdck");
  m.AddArtifact("out/loss_curve.csv");
  m.AddArtifact("out/model.gdck");  // duplicate, must be dropped
  m.AddTiming("train", 1.5);
  m.AddTiming("eval-retrieval", 0.25);

  CHECK(m.artifacts.size() == 2);
  CHECK(m.seed == 42);
  CHECK(m.run_id.rfind("train-", 0) == 0);
  CHECK(m.tool_version == VersionString());

  std::string path = dir.Sub("m.json");
  WriteRunManifest(m, path);
  RunManifest r = ReadRunManifest(path);
  CHECK(r.run_id == m.run_id);
  CHECK(r.command == m.command);
  CHECK(r.tool_version == m.tool_version);
  CHECK(r.seed == m.seed);
  CHECK(r.config_snapshot == m.config_snapshot);
  CHECK(r.artifacts == m.artifacts);
  REQUIRE(r.timings.size() == 2);
  CHECK(r.timings[0].name == "train");
  CHECK(r.timings[0].seconds == doctest::Approx(1.5));
  CHECK(r.timings[1].name == "eval-retrieval");

  // The snapshot alone must rebuild the original configuration.
  ConfigFile back = ConfigFile::Parse(r.config_snapshot, "snapshot");
  CHECK(TrainingConfigFromFile(back).epochs == 2);
}

TEST_CASE("run manifest: malformed input is rejected") {
  TestDir dir("manifest-bad");
  std::string path = dir.Sub("bad.json");
  { std::ofstream(path) << "{\"run_id\": [not json"; }
  CHECK_THROWS_AS(ReadRunManifest(path), DataError);
  CHECK_THROWS_AS(ReadRunManifest(dir.Sub("absent.json")), DataError);
}

TEST_CASE("config sections: model defaults, presets, and overrides") {
  ConfigFile empty;
  ModelConfig mini = ModelConfigFromFile(empty);
  CHECK(mini.resdavenet.stack_channels == ModelConfig::MiniPreset()
                                              .resdavenet.stack_channels);

  ConfigFile paper = ConfigFile::Parse("[model]\npreset = paper\n", "t");
  ModelConfig full = ModelConfigFromFile(paper);
  CHECK(full.resdavenet.stack_channels ==
        std::vector<int>{128, 256, 512, 1024});
  CHECK(full.image.embed_dim == 1024);

  ConfigFile dav = ConfigFile::Parse(
      "[model]\nkind = davenet\ndavenet_layers = 32:1:0 64:11:2\n"
      "image_channels = 4 8\n",
      "t");
  ModelConfig d = ModelConfigFromFile(dav);
  CHECK(d.kind == ModelKind::kDavenet);
  REQUIRE(d.davenet.layers.size() == 2);
  CHECK(d.davenet.layers[1].channels == 64);
  CHECK(d.davenet.layers[1].kernel == 11);
  CHECK(d.davenet.layers[1].pool == 2);
  CHECK(d.image.embed_dim == 64);  // defaults to the audio embedding width

  ConfigFile junk = ConfigFile::Parse("[model]\nstem_chanels = 8\n", "t");
  CHECK_THROWS_AS(ModelConfigFromFile(junk), ConfigError);
}

TEST_CASE("config sections: training and probe values") {
  ConfigFile empty;
  TrainingConfig tdef = TrainingConfigFromFile(empty);
  CHECK(tdef.margin == TrainingConfig{}.margin);
  CHECK(tdef.batch_size == TrainingConfig{}.batch_size);

  ConfigFile t = ConfigFile::Parse(
      "[training]\nmargin = 0.5\nbatch_size = 8\nepochs = 3\nseed = 9\n",
      "t");
  TrainingConfig tc = TrainingConfigFromFile(t);
  CHECK(tc.margin == doctest::Approx(0.5));
  CHECK(tc.batch_size == 8);
  CHECK(tc.epochs == 3);
  CHECK(tc.seed == 9);

  ConfigFile p = ConfigFile::Parse("[probe]\nhidden = 16\nlr = 0.2\n", "t");
  ProbeConfig pc = ProbeConfigFromFile(p);
  CHECK(pc.hidden == 16);
  CHECK(pc.lr == doctest::Approx(0.2));

  ConfigFile bad = ConfigFile::Parse("[training]\nbatch_size = 0\n", "t");
  CHECK_THROWS_AS(TrainingConfigFromFile(bad), ConfigError);
  ConfigFile unknown = ConfigFile::Parse("[probe]\nepochz = 2\n", "t");
  CHECK_THROWS_AS(ProbeConfigFromFile(unknown), ConfigError);
}

TEST_CASE("config sections: scaling fractions and pca sample size") {
  ConfigFile empty;
  CHECK(ScalingFractionsFromFile(empty) ==
        std::vector<double>{0.25, 0.5, 1.0});
  CHECK(PcaSampleFromFile(empty) == 512);

  ConfigFile cfg = ConfigFile::Parse(
      "[scaling]\nfractions = 0.1 0.4 1.0\n[probe]\npca_sample = 64\n", "t");
  CHECK(ScalingFractionsFromFile(cfg) == std::vector<double>{0.1, 0.4, 1.0});
  CHECK(PcaSampleFromFile(cfg) == 64);

  ConfigFile tiny = ConfigFile::Parse("[probe]\npca_sample = 2\n", "t");
  CHECK_THROWS_AS(PcaSampleFromFile(tiny), ConfigError);
}

TEST_CASE("tap archive paths sit next to the checkpoint by default") {
  CHECK(TapArchivePath("/a/b/model.gdck", "L2", "") == "/a/b/model-L2.gdfa");
  CHECK(TapArchivePath("/a/b/model.gdck", "L4", "/x") == "/x/model-L4.gdfa");
  CHECK(TapArchivePath("model.gdck", "L1", "") == "model-L1.gdfa");
}

TEST_CASE("train pipeline: artifacts exist and are all in the manifest") {
  TestDir dir("train");
  Corpus corpus = TinyCorpus(20, 11);
  ConfigFile cfg = ConfigFile::Parse(TinyConfigText(), "tiny");

  RunManifest manifest = NewRunManifest("train", cfg, 3);
  TrainPipelineResult result =
      TrainPipeline(corpus, cfg, dir.Sub("run"), nullptr, &manifest);

  CHECK(std::filesystem::exists(result.checkpoint_path));
  CHECK(result.heldout.pool_size == 10);
  CHECK(result.train.loss_curve.size() == result.train.steps);
  CHECK(result.train.steps >= 1);

  // Every artifact named in the manifest must exist, and the files the run
  // is known to produce must be named.
  CHECK(manifest.artifacts.size() >= 4);
  for (const auto &artifact : manifest.artifacts)
    CHECK(std::filesystem::exists(artifact));
  auto listed = [&](const std::string &name) {
    for (const auto &artifact : manifest.artifacts)
      if (artifact.find(name) != std::string::npos) return true;
    return false;
  };
  CHECK(listed("model.gdck"));
  CHECK(listed("loss_curve.csv"));
  CHECK(listed("retrieval.csv"));
  CHECK(!manifest.timings.empty());
}

TEST_CASE("distill pipeline: tap list validation") {
  TestDir dir("distill-bad");
  std::string ckpt = SaveTinyCheckpoint(dir.Sub("m.gdck"), 1);
  Corpus corpus = TinyCorpus(4, 2);

  RunManifest m = NewRunManifest("distill", ConfigFile(), 0);
  CHECK_THROWS_AS(
      DistillPipeline(ckpt, corpus, {"L1", "L1"}, "", 1, &m), ConfigError);
  CHECK_THROWS_AS(DistillPipeline(ckpt, corpus, {}, "", 1, &m), ConfigError);
  CHECK_THROWS_WITH_AS(
      DistillPipeline(ckpt, corpus, {"L9"}, "", 1, &m),
      doctest::Contains("unknown tap"), ConfigError);
}

TEST_CASE("distill pipeline: two workers write the same bytes as one") {
  TestDir dir("distill-jobs");
  std::string ckpt = SaveTinyCheckpoint(dir.Sub("m.gdck"), 7);
  Corpus corpus = TinyCorpus(6, 3);

  RunManifest m1 = NewRunManifest("distill", ConfigFile(), 0);
  RunManifest m2 = NewRunManifest("distill", ConfigFile(), 0);
  std::vector<std::string> seq = DistillPipeline(
      ckpt, corpus, {"L1", "L2"}, dir.Sub("seq"), 1, &m1);
  std::vector<std::string> par = DistillPipeline(
      ckpt, corpus, {"L1", "L2"}, dir.Sub("par"), 2, &m2);

  REQUIRE(seq.size() == 2);
  REQUIRE(par.size() == 2);
  CHECK(seq[0].find("m-L1.gdfa") != std::string::npos);
  for (size_t i = 0; i < seq.size(); ++i)
    CHECK(ReadFileBytes(seq[i]) == ReadFileBytes(par[i]));
  CHECK(m1.artifacts.size() == 2);
}

TEST_CASE("probe pipeline: deterministic table, sorted rows") {
  TestDir dir("probe-pipe");
  std::string ckpt = SaveTinyCheckpoint(dir.Sub("m.gdck"), 5);
  Corpus corpus = TinyCorpus(16, 8);
  RunManifest m = NewRunManifest("distill", ConfigFile(), 0);
  std::vector<std::string> archives =
      DistillPipeline(ckpt, corpus, {"L2", "L1"}, "", 1, &m);

  ProbeConfig pcfg;
  pcfg.epochs = 2;
  pcfg.batch_size = 64;
  pcfg.seed = 4;

  InvarianceTable a = ProbePipeline(archives, corpus, pcfg, 1);
  InvarianceTable b = ProbePipeline(archives, corpus, pcfg, 2);
  REQUIRE(a.rows.size() == 2);
  CHECK(a.rows[0].feature_name == "L1");
  CHECK(a.rows[1].feature_name == "L2");
  CHECK(a.Csv() == b.Csv());  // worker count must not change the numbers

  ProbeReport lone = ProbeArchive(ReadArchive(archives[0]), corpus, pcfg);
  CHECK(lone.fer_a >= 0.0);
  CHECK(lone.fer_a <= 1.0);
  CHECK(lone.domain_accuracy >= 0.0);
  CHECK(lone.domain_accuracy <= 1.0);
}

TEST_CASE("probe pipeline: archives from different checkpoints refused") {
  TestDir dir("probe-mixed");
  std::string ckpt1 = SaveTinyCheckpoint(dir.Sub("m1.gdck"), 5);
  std::string ckpt2 = SaveTinyCheckpoint(dir.Sub("m2.gdck"), 6);
  Corpus corpus = TinyCorpus(8, 8);

  RunManifest m = NewRunManifest("distill", ConfigFile(), 0);
  std::vector<std::string> a1 =
      DistillPipeline(ckpt1, corpus, {"L1"}, "", 1, &m);
  std::vector<std::string> a2 =
      DistillPipeline(ckpt2, corpus, {"L2"}, "", 1, &m);

  ProbeConfig pcfg;
  pcfg.epochs = 1;
  CHECK_THROWS_AS(ProbePipeline({a1[0], a2[0]}, corpus, pcfg, 1), DataError);
}

TEST_CASE("scaling experiment: fraction lists are validated up front") {
  Corpus corpus = TinyCorpus(8, 1);
  ConfigFile cfg = ConfigFile::Parse(TinyConfigText(), "tiny");
  TestDir dir("scale-bad");
  RunManifest m = NewRunManifest("scaling-exp", cfg, 3);

  auto run = [&](std::vector<double> f) {
    ScalingExperiment(corpus, cfg, f, dir.Sub("out"), 1, nullptr, &m);
  };
  CHECK_THROWS_WITH_AS(run({0.5, 1.5}), doctest::Contains("> 1"),
                       ConfigError);
  CHECK_THROWS_AS(run({0.0, 1.0}), ConfigError);
  CHECK_THROWS_AS(run({-0.5}), ConfigError);
  CHECK_THROWS_AS(run({0.5, 0.25}), ConfigError);     // not ascending
  CHECK_THROWS_AS(run({0.5, 0.5}), ConfigError);      // not strictly
  CHECK_THROWS_AS(run({}), ConfigError);
  CHECK_THROWS_WITH_AS(run({0.5001, 0.5002}),
                       doctest::Contains("too close"), ConfigError);
}

TEST_CASE("scaling experiment: nested fractions produce a full table") {
  TestDir dir("scale-run");
  Corpus corpus = TinyCorpus(24, 13);
  ConfigFile cfg = ConfigFile::Parse(TinyConfigText(), "tiny");

  RunManifest manifest = NewRunManifest("scaling-exp", cfg, 3);
  ScalingTable table = ScalingExperiment(corpus, cfg, {0.5, 1.0},
                                         dir.Sub("out"), 1, nullptr,
                                         &manifest);

  REQUIRE(table.rows.size() == 2);
  CHECK(table.layers == std::vector<std::string>{"fbank", "L1", "L2"});
  CHECK(table.rows[0].fraction == doctest::Approx(0.5));
  CHECK(table.rows[0].train_pairs == 6);   // half of the 12 training pairs
  CHECK(table.rows[1].train_pairs == 12);
  for (const auto &row : table.rows) {
    REQUIRE(row.gaps.size() == table.layers.size());
    CHECK(row.r10 >= 0.0);
    CHECK(row.r10 <= 1.0);
  }

  // The raw-feature baseline is probed once, so its gap is the same in
  // every row.
  CHECK(table.rows[0].gaps[0] == doctest::Approx(table.rows[1].gaps[0]));

  std::string csv = table.Csv();
  CHECK(csv.rfind("fraction,train_pairs,r10,gap_fbank,gap_L1,gap_L2", 0) ==
        0);

  for (const auto &artifact : manifest.artifacts)
    CHECK(std::filesystem::exists(artifact));
  bool has_table = false;
  for (const auto &artifact : manifest.artifacts)
    if (artifact.find("scaling.csv") != std::string::npos) has_table = true;
  CHECK(has_table);
}

#ifdef GDISTILL_BIN
int RunCli(const std::string &args) {
  std::string cmd = std::string(GDISTILL_BIN) + " " + args +
                    " >/dev/null 2>/dev/null";
  int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

TEST_CASE("cli: exit codes follow the error contract") {
  TestDir dir("cli");
  CHECK(RunCli("definitely-not-a-command") == 1);
  CHECK(RunCli("") == 1);
  CHECK(RunCli("--help") == 0);
  CHECK(RunCli("gen-data --out " + dir.Sub("c") + " --config " +
               dir.Sub("absent.cfg")) == 2);
  CHECK(RunCli("report --manifest " + dir.Sub("absent.json")) == 2);

  // A well-formed corpus generation run exits 0 and its manifest verifies.
  std::ofstream(dir.Sub("c.cfg"))
      << "[corpus]\nn_pairs = 4\nvocab_size = 8\nn_phones = 6\n"
         "n_speakers = 2\nseed = 1\n";
  CHECK(RunCli("gen-data --config " + dir.Sub("c.cfg") + " --out " +
               dir.Sub("corpus")) == 0);
  CHECK(RunCli("report --manifest " +
               dir.Sub("corpus/gen-data-manifest.json")) == 0);
}
#endif

}  // namespace
}  // namespace gdistill
