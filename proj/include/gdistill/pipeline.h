// include/gdistill/pipeline.h

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

#ifndef GDISTILL_PIPELINE_H_
#define GDISTILL_PIPELINE_H_

// Glue between the config file and the library modules: typed loaders for
// each config section, run manifests that record what a command produced,
// and the multi-step experiment flows (train, distill, probe, scaling) the
// command-line tool exposes. Everything here is deterministic given the
// config and its seeds; wall-clock timings are the one exception and are
// recorded for humans, not for comparison.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gdistill/archive.h"
#include "gdistill/config_file.h"
#include "gdistill/corpus.h"
#include "gdistill/models.h"
#include "gdistill/probe.h"
#include "gdistill/retrieval.h"
#include "gdistill/training.h"

namespace gdistill {

// Section loaders. Missing sections and keys fall back to the documented
// defaults; unknown keys in a present section are rejected so typos cannot
// silently change an experiment.
ModelConfig ModelConfigFromFile(const ConfigFile &config);       // [model]
TrainingConfig TrainingConfigFromFile(const ConfigFile &config); // [training]
ProbeConfig ProbeConfigFromFile(const ConfigFile &config);       // [probe]
// [scaling] fractions, default {0.25, 0.5, 1.0}.
std::vector<double> ScalingFractionsFromFile(const ConfigFile &config);
// [probe] pca_sample: frames sampled for the 2-D projection, default 512.
int64_t PcaSampleFromFile(const ConfigFile &config);

// Record of one command invocation. Every file a run produces is listed in
// `artifacts`, and the config snapshot plus seed is enough to reproduce all
// numeric outputs bit-exactly in single-threaded mode.
struct StageTiming {
  std::string name;
  double seconds = 0.0;
};

struct RunManifest {
  std::string run_id;
  std::string command;
  std::string tool_version;
  uint64_t seed = 0;
  std::string config_snapshot;  // verbatim config text
  std::vector<std::string> artifacts;
  std::vector<StageTiming> timings;

  void AddArtifact(const std::string &path);  // duplicates ignored
  void AddTiming(const std::string &name, double seconds);

  std::string ToJson() const;
  static RunManifest FromJson(const std::string &text);  // DataError on junk
};

// Fills run_id (a stable hash of command, config, and seed), the tool
// version, and the config snapshot.
RunManifest NewRunManifest(const std::string &command, const ConfigFile &config,
                           uint64_t seed);

void WriteRunManifest(const RunManifest &manifest, const std::string &path);
RunManifest ReadRunManifest(const std::string &path);

// Trains a model on the corpus per the [model]/[training] sections, keeping
// the best-by-heldout-R@10 checkpoint at <out_dir>/model.gdck, then reloads
// it and scores held-out retrieval. Writes the loss curve and retrieval
// report next to the checkpoint. `log` receives per-epoch progress lines.
struct TrainPipelineResult {
  std::string checkpoint_path;
  TrainResult train;
  RetrievalReport heldout;
};

TrainPipelineResult TrainPipeline(const Corpus &corpus,
                                  const ConfigFile &config,
                                  const std::string &out_dir,
                                  std::ostream *log, RunManifest *manifest);

// Archive path for one distilled tap: the checkpoint's basename with the
// extension replaced by "-<layer>.gdfa", placed in `out_dir` (or next to the
// checkpoint when out_dir is empty).
std::string TapArchivePath(const std::string &checkpoint_path,
                           const std::string &layer,
                           const std::string &out_dir);

// Distills the named taps of a saved checkpoint over the corpus, one archive
// per layer, stamped with the checkpoint file hash. `jobs` > 1 distills
// layers concurrently (each worker loads its own model copy); outputs are
// identical to the sequential ones. Returns the archive paths, layer order
// preserved.
std::vector<std::string> DistillPipeline(const std::string &checkpoint_path,
                                         const Corpus &corpus,
                                         const std::vector<std::string> &layers,
                                         const std::string &out_dir, int jobs,
                                         RunManifest *manifest);

// Full probe battery for one archive: a phone probe trained on condition-A
// frames of speaker group 1 and scored per condition on speaker group 2,
// plus a condition probe for leakage. The row is named after the archive's
// layer.
ProbeReport ProbeArchive(const FeatureArchive &archive, const Corpus &corpus,
                         const ProbeConfig &cfg);

// Loads the archives, refuses mixed checkpoints, probes each one (in
// parallel when jobs > 1, with per-archive seeds derived from the layer
// name), and assembles the comparison table.
InvarianceTable ProbePipeline(const std::vector<std::string> &archive_paths,
                              const Corpus &corpus, const ProbeConfig &cfg,
                              int jobs);

// Data-scaling experiment: nested training subsets of the listed fractions,
// one model each, retrieval plus the distill+probe battery per model.
struct ScalingRow {
  double fraction = 0.0;
  int train_pairs = 0;
  double r10 = 0.0;           // held-out mean R@10 of the best checkpoint
  std::vector<double> gaps;   // aligned with ScalingTable::layers
};

struct ScalingTable {
  std::vector<std::string> layers;  // gap column names, "fbank" first
  std::vector<ScalingRow> rows;     // ascending fraction

  std::string Csv() const;
  std::string TextTable() const;
};

// Fractions must be strictly ascending and inside (0, 1]. Subsets are
// prefixes of one seed-shuffled ordering of the training split, so smaller
// fractions are strict subsets of larger ones and all share the held-out
// pool. Every model, archive, and probe report lands in `out_dir`.
ScalingTable ScalingExperiment(const Corpus &corpus, const ConfigFile &config,
                               std::vector<double> fractions,
                               const std::string &out_dir, int jobs,
                               std::ostream *log, RunManifest *manifest);

}  // namespace gdistill

#endif  // GDISTILL_PIPELINE_H_
