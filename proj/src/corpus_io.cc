// src/corpus_io.cc

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

#include "gdistill/corpus_io.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gdistill/archive.h"

namespace gdistill {

namespace fs = std::filesystem;

ConfigFile CorpusConfigToFile(const CorpusConfig &config) {
  ConfigFile f;
  f.Set("corpus", "n_pairs", Cat(config.n_pairs));
  f.Set("corpus", "vocab_size", Cat(config.vocab_size));
  f.Set("corpus", "n_phones", Cat(config.n_phones));
  f.Set("corpus", "n_speakers", Cat(config.n_speakers));
  f.Set("corpus", "condition_mix",
        Cat(config.condition_mix[0], " ", config.condition_mix[1], " ",
            config.condition_mix[2], " ", config.condition_mix[3]));
  f.Set("corpus", "seed", Cat(config.seed));
  f.Set("corpus", "inventory_seed", Cat(config.inventory_seed));
  f.Set("corpus", "num_bins", Cat(config.num_bins));
  f.Set("corpus", "image_size", Cat(config.image_size));
  f.Set("corpus", "jitter", Cat(config.jitter));
  f.Set("corpus", "tilt_sigma", Cat(config.tilt_sigma));
  f.Set("corpus", "shift_severity", Cat(config.shift_severity));
  return f;
}

CorpusConfig CorpusConfigFromFile(const ConfigFile &file) {
  file.ExpectKeys("corpus",
                  {"n_pairs", "vocab_size", "n_phones", "n_speakers",
                   "condition_mix", "seed", "inventory_seed", "num_bins",
                   "image_size", "jitter", "tilt_sigma", "shift_severity"});
  CorpusConfig c;
  c.n_pairs = static_cast<int>(file.GetInt("corpus", "n_pairs", c.n_pairs));
  c.vocab_size =
      static_cast<int>(file.GetInt("corpus", "vocab_size", c.vocab_size));
  c.n_phones =
      static_cast<int>(file.GetInt("corpus", "n_phones", c.n_phones));
  c.n_speakers =
      static_cast<int>(file.GetInt("corpus", "n_speakers", c.n_speakers));
  if (file.Has("corpus", "condition_mix")) {
    std::istringstream in(file.Get("corpus", "condition_mix"));
    for (int i = 0; i < 4; ++i)
      if (!(in >> c.condition_mix[i]))
        throw ConfigError(
            "corpus.condition_mix needs four fractions (A B C D)");
    std::string extra;
    if (in >> extra)
      throw ConfigError(
          "corpus.condition_mix needs exactly four fractions (A B C D)");
  }
  c.seed = static_cast<uint64_t>(file.GetInt("corpus", "seed",
                                             static_cast<int64_t>(c.seed)));
  c.inventory_seed = static_cast<uint64_t>(
      file.GetInt("corpus", "inventory_seed",
                  static_cast<int64_t>(c.inventory_seed)));
  c.num_bins = static_cast<int>(file.GetInt("corpus", "num_bins", c.num_bins));
  c.image_size =
      static_cast<int>(file.GetInt("corpus", "image_size", c.image_size));
  c.jitter = file.GetDouble("corpus", "jitter", c.jitter);
  c.tilt_sigma = file.GetDouble("corpus", "tilt_sigma", c.tilt_sigma);
  c.shift_severity =
      file.GetDouble("corpus", "shift_severity", c.shift_severity);
  return c;
}

namespace {

FeatureArchive UtteranceArchive(const PairedExample &pair) {
  const FeatureMatrix &feats = pair.utterance.features;
  FeatureArchive a;
  a.header.layer_name = "fbank";
  a.header.channels = static_cast<uint32_t>(feats.num_bins);
  a.header.ratio = 1;
  ArchiveRecord rec;
  rec.id = pair.pair_id;
  rec.num_frames = static_cast<uint32_t>(feats.num_frames);
  rec.channels = static_cast<uint32_t>(feats.num_bins);
  rec.frames = feats.values;
  rec.has_labels = true;
  for (int32_t l : pair.utterance.phone_labels)
    rec.labels.push_back(static_cast<uint32_t>(l));
  rec.condition = pair.utterance.condition;
  a.records.push_back(std::move(rec));
  return a;
}

// Pixels go in verbatim: 3*H rows of W floats is the in-memory layout of
// ImageRecord::pixels. The labels array holds the object word ids in draw
// order, which is all that is needed to restore presence and object names.
FeatureArchive ImageArchive(const PairedExample &pair,
                            const SynthInventory &inv) {
  const ImageRecord &img = pair.image;
  FeatureArchive a;
  a.header.layer_name = "pixels";
  a.header.channels = static_cast<uint32_t>(img.width);
  a.header.ratio = 1;
  ArchiveRecord rec;
  rec.id = pair.pair_id;
  rec.num_frames = static_cast<uint32_t>(3 * img.height);
  rec.channels = static_cast<uint32_t>(img.width);
  rec.frames = img.pixels;
  rec.has_labels = true;
  for (const std::string &word : img.objects) {
    const int id = inv.lexicon.Find(word);
    if (id < 0)
      throw DataError(Cat("image object '", word, "' of ", pair.pair_id,
                          " is not in the lexicon"));
    rec.labels.push_back(static_cast<uint32_t>(id));
  }
  rec.condition = pair.utterance.condition;
  a.records.push_back(std::move(rec));
  return a;
}

// One manifest line: id, utterance file, image file, speaker, condition,
// then the caption as space-separated words.
struct ManifestLine {
  std::string pair_id;
  std::string utt_file;
  std::string img_file;
  int speaker_id = 0;
  char condition = 'A';
  std::vector<std::string> words;
};

ManifestLine ParseManifestLine(const std::string &line, const std::string &path,
                               int lineno) {
  std::vector<std::string> cols;
  size_t start = 0;
  for (int i = 0; i < 5; ++i) {
    const size_t tab = line.find('\t', start);
    if (tab == std::string::npos)
      throw DataError(Cat(path, ":", lineno,
                          ": manifest line has fewer than 6 columns"));
    cols.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  cols.push_back(line.substr(start));

  ManifestLine m;
  m.pair_id = cols[0];
  m.utt_file = cols[1];
  m.img_file = cols[2];
  try {
    m.speaker_id = std::stoi(cols[3]);
  } catch (const std::exception &) {
    throw DataError(Cat(path, ":", lineno, ": bad speaker id '", cols[3],
                        "'"));
  }
  if (cols[4].size() != 1 || cols[4][0] < 'A' || cols[4][0] > 'D')
    throw DataError(Cat(path, ":", lineno, ": bad condition tag '", cols[4],
                        "'"));
  m.condition = cols[4][0];
  std::istringstream words(cols[5]);
  std::string w;
  while (words >> w) m.words.push_back(w);
  if (m.words.empty())
    throw DataError(Cat(path, ":", lineno, ": empty caption"));
  return m;
}

}  // namespace

void WriteCorpus(const Corpus &corpus, const std::string &dir) {
  if (corpus.pairs.empty())
    throw DataError("refusing to write an empty corpus");
  fs::create_directories(fs::path(dir) / "utt");
  fs::create_directories(fs::path(dir) / "img");

  CorpusConfigToFile(corpus.config).Save((fs::path(dir) / "corpus.cfg").string());

  std::ofstream manifest(fs::path(dir) / "manifest.txt", std::ios::trunc);
  if (!manifest)
    throw DataError(Cat("cannot open '", dir, "/manifest.txt' for writing"));
  manifest << ManifestText(corpus);
  if (!manifest) throw DataError(Cat("short write to '", dir, "/manifest.txt'"));
  manifest.close();

  for (const PairedExample &pair : corpus.pairs) {
    WriteArchive(UtteranceArchive(pair),
                 (fs::path(dir) / "utt" / (pair.pair_id + ".gdfa")).string());
    WriteArchive(ImageArchive(pair, corpus.inventory),
                 (fs::path(dir) / "img" / (pair.pair_id + ".gdfa")).string());
  }
}

Corpus ReadCorpus(const std::string &dir) {
  const std::string cfg_path = (fs::path(dir) / "corpus.cfg").string();
  Corpus corpus;
  corpus.config = CorpusConfigFromFile(ConfigFile::Load(cfg_path));
  corpus.config.Validate();
  corpus.inventory = BuildInventory(corpus.config);
  const int vocab = static_cast<int>(corpus.inventory.lexicon.entries.size());

  const std::string manifest_path = (fs::path(dir) / "manifest.txt").string();
  std::ifstream manifest(manifest_path);
  if (!manifest)
    throw DataError(Cat("cannot open '", manifest_path, "'"));
  std::string line;
  int lineno = 0;
  while (std::getline(manifest, line)) {
    ++lineno;
    if (line.empty()) continue;
    const ManifestLine m = ParseManifestLine(line, manifest_path, lineno);
    if (m.speaker_id < 0 || m.speaker_id >= corpus.config.n_speakers)
      throw DataError(Cat(manifest_path, ":", lineno, ": speaker ",
                          m.speaker_id, " out of range for ",
                          corpus.config.n_speakers, " speakers"));

    PairedExample pair;
    pair.pair_id = m.pair_id;

    const FeatureArchive utt =
        ReadArchive((fs::path(dir) / m.utt_file).string());
    if (utt.records.size() != 1 || utt.records[0].id != m.pair_id)
      throw DataError(Cat(dir, "/", m.utt_file,
                          ": expected exactly one record for ", m.pair_id));
    const ArchiveRecord &urec = utt.records[0];
    if (urec.condition != m.condition)
      throw DataError(Cat(dir, "/", m.utt_file, ": condition '",
                          urec.condition, "' disagrees with manifest '",
                          m.condition, "'"));
    if (!urec.has_labels || urec.labels.size() != urec.num_frames)
      throw DataError(Cat(dir, "/", m.utt_file,
                          ": utterance record needs one label per frame"));
    pair.utterance.features.num_frames = urec.num_frames;
    pair.utterance.features.num_bins = urec.channels;
    pair.utterance.features.values = urec.frames;
    pair.utterance.features.kind = "synth";
    for (uint32_t l : urec.labels)
      pair.utterance.phone_labels.push_back(static_cast<int32_t>(l));
    pair.utterance.words = m.words;
    pair.utterance.speaker_id = m.speaker_id;
    pair.utterance.condition = m.condition;

    const FeatureArchive img =
        ReadArchive((fs::path(dir) / m.img_file).string());
    if (img.records.size() != 1 || img.records[0].id != m.pair_id)
      throw DataError(Cat(dir, "/", m.img_file,
                          ": expected exactly one record for ", m.pair_id));
    const ArchiveRecord &irec = img.records[0];
    const int size = corpus.config.image_size;
    if (irec.num_frames != static_cast<uint32_t>(3 * size) ||
        irec.channels != static_cast<uint32_t>(size))
      throw DataError(Cat(dir, "/", m.img_file, ": pixel block is ",
                          irec.num_frames, "x", irec.channels, ", expected ",
                          3 * size, "x", size));
    pair.image.height = pair.image.width = size;
    pair.image.pixels = irec.frames;
    pair.image.presence.assign(vocab, 0);
    for (uint32_t id : irec.labels) {
      if (id >= static_cast<uint32_t>(vocab))
        throw DataError(Cat(dir, "/", m.img_file, ": object id ", id,
                            " out of vocabulary"));
      pair.image.presence[id] = 1;
      pair.image.objects.push_back(
          corpus.inventory.lexicon.entries[id].word);
    }
    corpus.pairs.push_back(std::move(pair));
  }
  if (corpus.pairs.empty())
    throw DataError(Cat(manifest_path, ": no records"));
  return corpus;
}

}  // namespace gdistill
