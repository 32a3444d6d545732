// src/checkpoint.cc

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

#include "gdistill/checkpoint.h"

#include <cstring>
#include <fstream>

#include "json.hpp"
#include "byte_io.h"

namespace gdistill {

namespace {

constexpr char kMagic[4] = {'G', 'D', 'C', 'K'};
constexpr uint16_t kVersion = 1;

using nlohmann::json;

json ConfigToJson(const ModelConfig &c) {
  json j;
  j["kind"] = ModelKindName(c.kind);
  j["resdavenet"] = {{"input_mels", c.resdavenet.input_mels},
                     {"stem_channels", c.resdavenet.stem_channels},
                     {"stack_channels", c.resdavenet.stack_channels},
                     {"kernel", c.resdavenet.kernel},
                     {"blocks_per_stack", c.resdavenet.blocks_per_stack},
                     {"stack_stride", c.resdavenet.stack_stride}};
  json layers = json::array();
  for (const auto &l : c.davenet.layers)
    layers.push_back({{"channels", l.channels},
                      {"kernel", l.kernel},
                      {"pool", l.pool}});
  j["davenet"] = {{"input_mels", c.davenet.input_mels}, {"layers", layers}};
  j["image"] = {{"conv_channels", c.image.conv_channels},
                {"kernel", c.image.kernel},
                {"embed_dim", c.image.embed_dim},
                {"image_size", c.image.image_size},
                {"presence_input", c.image.presence_input},
                {"presence_dim", c.image.presence_dim}};
  return j;
}

ModelConfig ConfigFromJson(const json &j) {
  ModelConfig c;
  try {
    c.kind = ModelKindFromName(j.at("kind").get<std::string>());
    const json &r = j.at("resdavenet");
    c.resdavenet.input_mels = r.at("input_mels").get<int>();
    c.resdavenet.stem_channels = r.at("stem_channels").get<int>();
    c.resdavenet.stack_channels = r.at("stack_channels").get<std::vector<int>>();
    c.resdavenet.kernel = r.at("kernel").get<int>();
    c.resdavenet.blocks_per_stack = r.at("blocks_per_stack").get<int>();
    c.resdavenet.stack_stride = r.at("stack_stride").get<int>();
    const json &d = j.at("davenet");
    c.davenet.input_mels = d.at("input_mels").get<int>();
    c.davenet.layers.clear();
    for (const auto &l : d.at("layers"))
      c.davenet.layers.push_back({l.at("channels").get<int>(),
                                  l.at("kernel").get<int>(),
                                  l.at("pool").get<int>()});
    const json &im = j.at("image");
    c.image.conv_channels = im.at("conv_channels").get<std::vector<int>>();
    c.image.kernel = im.at("kernel").get<int>();
    c.image.embed_dim = im.at("embed_dim").get<int>();
    c.image.image_size = im.at("image_size").get<int>();
    c.image.presence_input = im.at("presence_input").get<bool>();
    c.image.presence_dim = im.at("presence_dim").get<int>();
  } catch (const json::exception &e) {
    throw DataError(Cat("malformed model config JSON: ", e.what()));
  }
  return c;
}

}  // namespace

std::string ConfigToJsonString(const ModelConfig &config) {
  return ConfigToJson(config).dump();
}

ModelConfig ConfigFromJsonString(const std::string &text) {
  json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded())
    throw DataError("malformed model config JSON: parse error");
  return ConfigFromJson(j);
}

void SaveCheckpoint(GroundingModel<float> &model, uint64_t step,
                    const std::string &path) {
  std::string out;
  PutBytes(out, kMagic, sizeof(kMagic));
  PutPod<uint16_t>(out, kVersion);
  PutString(out, ModelKindName(model.Config().kind));
  PutString(out, ConfigToJsonString(model.Config()));
  PutPod<uint64_t>(out, model.Seed());
  PutPod<uint64_t>(out, step);

  const auto &params = model.Parameters();
  const auto &names = model.ParameterNames();
  PutPod<uint32_t>(out, static_cast<uint32_t>(params.size()));
  for (size_t i = 0; i < params.size(); ++i) {
    PutString(out, names[i]);
    PutPod<uint32_t>(out, static_cast<uint32_t>(params[i].Rank()));
    for (int64_t d : params[i].Shape())
      PutPod<uint32_t>(out, static_cast<uint32_t>(d));
    auto vals = params[i].Values();
    PutBytes(out, vals.data(), vals.size() * sizeof(float));
  }

  auto stats = model.MutableStats();
  PutPod<uint32_t>(out, static_cast<uint32_t>(stats.size()));
  for (auto &[name, slot] : stats) {
    PutString(out, name);
    PutPod<uint32_t>(out, slot->initialized ? 1u : 0u);
    PutPod<uint32_t>(out, static_cast<uint32_t>(slot->mean.size()));
    PutBytes(out, slot->mean.data(), slot->mean.size() * sizeof(float));
    PutBytes(out, slot->var.data(), slot->var.size() * sizeof(float));
  }

  PutPod<uint64_t>(out, Fnv1a64(out.data(), out.size()));
  WriteFileBytes(path, out);
}

Checkpoint ReadCheckpoint(const std::string &path) {
  const std::string data = ReadFileBytes(path);
  if (data.size() < sizeof(kMagic) + sizeof(uint32_t) + sizeof(uint64_t))
    throw DataError(Cat(path, ": too short to be a checkpoint (", data.size(),
                        " bytes)"));
  if (std::memcmp(data.data(), kMagic, sizeof(kMagic)) != 0)
    throw DataError(Cat(path, ": bad magic bytes, not a checkpoint file"));
  const uint64_t stored_hash = [&] {
    uint64_t h;
    std::memcpy(&h, data.data() + data.size() - sizeof(uint64_t),
                sizeof(uint64_t));
    return h;
  }();
  const uint64_t body_hash =
      Fnv1a64(data.data(), data.size() - sizeof(uint64_t));
  if (stored_hash != body_hash)
    throw DataError(Cat(path, ": integrity hash mismatch, file is corrupt"));

  ByteReader r(data, path);
  r.Take(sizeof(kMagic));
  const uint16_t version = r.Pod<uint16_t>();
  if (version != kVersion)
    throw DataError(Cat(path, ": unsupported checkpoint version ", version,
                        " (this build reads version ", kVersion, ")"));
  Checkpoint ckpt;
  const std::string kind_name = r.Str();
  ckpt.config = ConfigFromJsonString(r.Str());
  if (ModelKindName(ckpt.config.kind) != kind_name)
    throw DataError(Cat(path, ": kind field '", kind_name,
                        "' disagrees with stored config"));
  ckpt.seed = r.Pod<uint64_t>();
  ckpt.step = r.Pod<uint64_t>();

  const uint32_t n_params = r.Pod<uint32_t>();
  ckpt.params.resize(n_params);
  for (auto &p : ckpt.params) {
    p.name = r.Str();
    const uint32_t rank = r.Pod<uint32_t>();
    int64_t numel = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      p.shape.push_back(static_cast<int64_t>(r.Pod<uint32_t>()));
      if (p.shape.back() < 1 || p.shape.back() > (1 << 28) ||
          numel > (1ll << 32))
        throw DataError(Cat(path, ": implausible tensor shape near byte ",
                            r.pos()));
      numel *= p.shape.back();
    }
    p.values.resize(numel);
    std::memcpy(p.values.data(), r.Take(numel * sizeof(float)),
                numel * sizeof(float));
  }

  const uint32_t n_stats = r.Pod<uint32_t>();
  ckpt.stats.resize(n_stats);
  for (auto &s : ckpt.stats) {
    s.name = r.Str();
    s.initialized = r.Pod<uint32_t>() != 0;
    const uint32_t c = r.Pod<uint32_t>();
    s.mean.resize(c);
    std::memcpy(s.mean.data(), r.Take(c * sizeof(float)), c * sizeof(float));
    s.var.resize(c);
    std::memcpy(s.var.data(), r.Take(c * sizeof(float)), c * sizeof(float));
  }
  return ckpt;
}

GroundingModel<float> ModelFromCheckpoint(const Checkpoint &ckpt) {
  GroundingModel<float> model(ckpt.config, ckpt.seed);
  auto &params = model.Parameters();
  const auto &names = model.ParameterNames();
  if (params.size() != ckpt.params.size())
    throw DataError(Cat("checkpoint stores ", ckpt.params.size(),
                        " tensors but the config builds ", params.size()));
  for (size_t i = 0; i < params.size(); ++i) {
    const auto &stored = ckpt.params[i];
    if (stored.name != names[i])
      throw DataError(Cat("checkpoint tensor ", i, " is '", stored.name,
                          "', expected '", names[i], "'"));
    if (stored.shape != params[i].Shape())
      throw DataError(Cat("checkpoint tensor '", stored.name, "' has shape ",
                          ShapeStr(stored.shape), ", expected ",
                          ShapeStr(params[i].Shape())));
    auto vals = params[i].MutableValues();
    std::copy(stored.values.begin(), stored.values.end(), vals.begin());
  }
  auto slots = model.MutableStats();
  if (slots.size() != ckpt.stats.size())
    throw DataError(Cat("checkpoint stores ", ckpt.stats.size(),
                        " stat blocks but the config builds ", slots.size()));
  for (size_t i = 0; i < slots.size(); ++i) {
    const auto &stored = ckpt.stats[i];
    if (stored.name != slots[i].first)
      throw DataError(Cat("checkpoint stats ", i, " is '", stored.name,
                          "', expected '", slots[i].first, "'"));
    if (stored.mean.size() != slots[i].second->mean.size())
      throw DataError(Cat("checkpoint stats '", stored.name,
                          "' has ", stored.mean.size(), " channels, expected ",
                          slots[i].second->mean.size()));
    slots[i].second->mean = stored.mean;
    slots[i].second->var = stored.var;
    slots[i].second->initialized = stored.initialized;
  }
  return model;
}

GroundingModel<float> LoadCheckpoint(const std::string &path,
                                     const std::string &expect_kind,
                                     uint64_t *step_out) {
  Checkpoint ckpt = ReadCheckpoint(path);
  if (!expect_kind.empty() &&
      ModelKindName(ckpt.config.kind) != expect_kind)
    throw DataError(Cat(path, ": checkpoint kind '",
                        ModelKindName(ckpt.config.kind), "' does not match '",
                        expect_kind, "'"));
  if (step_out) *step_out = ckpt.step;
  return ModelFromCheckpoint(ckpt);
}

uint64_t CheckpointFileHash(const std::string &path) {
  const std::string data = ReadFileBytes(path);
  return Fnv1a64(data.data(), data.size());
}

}  // namespace gdistill
