// gdistill/corpus.h

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

#ifndef GDISTILL_CORPUS_H_
#define GDISTILL_CORPUS_H_

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "gdistill/fbank.h"
#include "gdistill/rng.h"

namespace gdistill {

// Procedural paired (utterance, image) corpus. Utterances are synthesized
// directly in the log-filterbank domain: each phone has a fixed spectral
// template, words are phone sequences, and speaker / channel / noise effects
// are additive vectors in that domain. This keeps every nuisance factor
// analyzable while exercising the exact same feature shapes as real audio.

inline constexpr int kNumMannerClasses = 5;
// Index by PhoneInfo::manner.
extern const char *const kMannerNames[kNumMannerClasses];

struct PhoneInfo {
  std::string name;
  std::vector<float> tmpl;  // F-dim spectral template, log domain
  int min_dur = 2;          // frames, inclusive
  int max_dur = 4;
  int manner = 0;
};

struct PhoneInventory {
  int num_bins = 40;
  std::vector<PhoneInfo> phones;
};

struct LexiconEntry {
  std::string word;
  std::vector<int> phones;  // indices into the inventory
  bool content = false;     // content words are drawable as image objects
};

struct Lexicon {
  std::vector<LexiconEntry> entries;
  std::unordered_map<std::string, int> index;

  int Find(const std::string &word) const {
    auto it = index.find(word);
    return it == index.end() ? -1 : it->second;
  }
  std::vector<int> ContentWordIds() const {
    std::vector<int> ids;
    for (size_t i = 0; i < entries.size(); ++i)
      if (entries[i].content) ids.push_back(static_cast<int>(i));
    return ids;
  }
};

// Everything shared across the records of one corpus. The phone inventory,
// lexicon, and channel vector derive from `inventory_seed` so a second corpus
// (e.g. the probe corpus) can share the language while drawing fresh speakers
// and fresh record noise from its own `seed`.
struct SynthInventory {
  PhoneInventory phones;
  Lexicon lexicon;
  std::vector<std::vector<float>> speaker_tilts;  // n_speakers x F
  std::vector<float> channel_color;               // F, unit RMS
};

struct CorpusConfig {
  int n_pairs = 2000;
  int vocab_size = 40;
  int n_phones = 20;
  int n_speakers = 16;
  // Fractions for conditions A, B, C, D; must sum to 1.
  std::array<double, 4> condition_mix = {0.4, 0.2, 0.2, 0.2};
  uint64_t seed = 0;
  uint64_t inventory_seed = 7;
  int num_bins = 40;
  int image_size = 32;
  double jitter = 0.1;          // per-frame Gaussian sigma on templates
  double tilt_sigma = 0.4;      // speaker tilt scale
  double shift_severity = 1.0;  // scales condition B noise and C coloration

  void Validate() const;
};

struct UtteranceRecord {
  FeatureMatrix features;  // T x F, kind "synth"
  std::vector<int32_t> phone_labels;  // length T
  std::vector<std::string> words;
  int speaker_id = 0;
  char condition = 'A';
};

struct ImageRecord {
  int height = 32;
  int width = 32;
  std::vector<float> pixels;          // 3 x H x W, values in [0,1]
  std::vector<uint8_t> presence;      // one flag per vocabulary word
  std::vector<std::string> objects;
};

struct PairedExample {
  UtteranceRecord utterance;
  ImageRecord image;
  std::string pair_id;
};

struct Corpus {
  CorpusConfig config;
  SynthInventory inventory;
  std::vector<PairedExample> pairs;
};

// Phones, lexicon, channel vector from config.inventory_seed; speaker tilts
// from config.seed. Phone templates are regenerated if any pair comes out
// closer than a minimum L2 distance.
SynthInventory BuildInventory(const CorpusConfig &config);

// Condition-A utterance: per phone, a random duration from its range and the
// template plus Gaussian jitter, then the speaker tilt added to every frame.
// Frame labels follow segment boundaries exactly. Unknown words are rejected.
UtteranceRecord RenderUtterance(const std::vector<std::string> &words,
                                int speaker_id, const SynthInventory &inv,
                                uint64_t seed, double jitter);

// Derives a B/C/D-condition record from a condition-A parent: B adds Gaussian
// noise, C adds the fixed channel coloration, D applies C then B on the same
// seed path. Severity scales both. Labels are copied unchanged. A non-A input
// is rejected (no double corruption).
UtteranceRecord ApplyDomainShift(const UtteranceRecord &u, char condition,
                                 const SynthInventory &inv, double severity,
                                 uint64_t seed);

// The two additive primitives behind ApplyDomainShift, exposed so tests can
// assert exact equality against hand-applied shifts.
void AddLogNoise(FeatureMatrix &m, double stddev, Rng &rng);
void AddChannelColor(FeatureMatrix &m, const std::vector<float> &color,
                     double scale);

// Renders 1..4 object glyphs at random non-overlapping positions. Each
// vocabulary word has a fixed shape/color glyph. Fails if an object cannot
// be placed after 100 attempts.
ImageRecord RenderImage(const std::vector<int> &object_word_ids,
                        const SynthInventory &inv, uint64_t seed,
                        int image_size = 32);

// Full corpus: deterministic in config.seed, records independent of each
// other (per-record derived seeds), so generation order does not matter.
Corpus GenerateCorpus(const CorpusConfig &config);

// Line-delimited manifest: pair-id, utterance file, image file, speaker,
// condition, caption words. File names follow the on-disk layout used by
// the corpus writer.
std::string ManifestText(const Corpus &corpus);

}  // namespace gdistill

#endif  // GDISTILL_CORPUS_H_
