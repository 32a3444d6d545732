// include/gdistill/checkpoint.h

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

#ifndef GDISTILL_CHECKPOINT_H_
#define GDISTILL_CHECKPOINT_H_

#include <cstdint>
#include <string>
#include <vector>

#include "gdistill/models.h"

namespace gdistill {

// Model state as stored on disk. The binary layout is fixed little-endian:
// "GDCK" magic, format version, kind name, config as JSON, seed, step,
// named parameter tensors, named BatchNorm running stats, and a trailing
// FNV-1a hash of everything before it. Writers emit fields in registration
// order, so saving the same model twice gives byte-identical files.
struct CheckpointParam {
  std::string name;
  std::vector<int64_t> shape;
  std::vector<float> values;
};

struct CheckpointStats {
  std::string name;
  bool initialized = false;
  std::vector<float> mean, var;
};

struct Checkpoint {
  ModelConfig config;
  uint64_t seed = 0;
  uint64_t step = 0;
  std::vector<CheckpointParam> params;
  std::vector<CheckpointStats> stats;
};

// JSON round-trip for configs; the dump is key-sorted and therefore stable.
std::string ConfigToJsonString(const ModelConfig &config);
ModelConfig ConfigFromJsonString(const std::string &text);

void SaveCheckpoint(GroundingModel<float> &model, uint64_t step,
                    const std::string &path);

// Parses and hash-verifies a checkpoint file without building a model.
Checkpoint ReadCheckpoint(const std::string &path);

// Rebuilds the model from the stored config/seed and overwrites its
// parameters and running stats with the stored state.
GroundingModel<float> ModelFromCheckpoint(const Checkpoint &ckpt);

// Convenience: read + rebuild. When `expect_kind` is non-empty the stored
// kind must match it. `step_out` receives the stored step counter.
GroundingModel<float> LoadCheckpoint(const std::string &path,
                                     const std::string &expect_kind = "",
                                     uint64_t *step_out = nullptr);

// FNV-1a over the raw file bytes; distillation archives record this to pin
// which model produced them.
uint64_t CheckpointFileHash(const std::string &path);

}  // namespace gdistill

#endif  // GDISTILL_CHECKPOINT_H_
