// src/corpus.cc

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

#include "gdistill/corpus.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace gdistill {

const char *const kMannerNames[kNumMannerClasses] = {
    "vowel", "stop", "fricative", "nasal", "glide"};

namespace {

// Duration ranges (frames) per manner class, same order as kMannerNames.
// Vowels run long, stops are short bursts; ranges keep every phone >= 2
// frames so segment boundaries always carry a few labeled frames.
constexpr int kMinDur[kNumMannerClasses] = {6, 3, 4, 4, 4};
constexpr int kMaxDur[kNumMannerClasses] = {12, 6, 9, 8, 8};

void AddBump(std::vector<float> &v, double center, double width, double amp) {
  for (size_t b = 0; b < v.size(); ++b) {
    const double d = (static_cast<double>(b) - center) / width;
    v[b] += static_cast<float>(amp * std::exp(-0.5 * d * d));
  }
}

// Moving average over +-2 bins; keeps templates and tilts spectrally smooth.
std::vector<float> Smooth(const std::vector<float> &v) {
  const int64_t n = static_cast<int64_t>(v.size());
  std::vector<float> out(v.size());
  for (int64_t i = 0; i < n; ++i) {
    double acc = 0;
    int cnt = 0;
    for (int64_t j = std::max<int64_t>(0, i - 2);
         j <= std::min(n - 1, i + 2); ++j) {
      acc += v[j];
      ++cnt;
    }
    out[i] = static_cast<float>(acc / cnt);
  }
  return out;
}

std::vector<float> MakeTemplate(int manner, int num_bins, Rng &rng) {
  std::vector<float> t(num_bins, 0.0f);
  const double top = num_bins - 1;
  switch (manner) {
    case 0:  // vowel: two formant-like bumps, high energy
      t.assign(num_bins, -0.3f);
      AddBump(t, rng.Uniform(0.08, 0.3) * top, rng.Uniform(1.5, 3.5), 1.2);
      AddBump(t, rng.Uniform(0.4, 0.75) * top, rng.Uniform(2.0, 4.0), 1.0);
      break;
    case 1:  // stop: quiet with one small burst
      t.assign(num_bins, -0.8f);
      AddBump(t, rng.Uniform(0.1, 0.9) * top, rng.Uniform(1.5, 3.0), 0.4);
      break;
    case 2:  // fricative: energy ramping toward high bins
      for (int b = 0; b < num_bins; ++b)
        t[b] = static_cast<float>(-0.6 + 1.4 * b / top);
      AddBump(t, rng.Uniform(0.7, 0.97) * top, rng.Uniform(1.5, 3.0), 0.5);
      break;
    case 3:  // nasal: low-frequency bump, mid dip
      t.assign(num_bins, -0.2f);
      AddBump(t, rng.Uniform(0.02, 0.15) * top, rng.Uniform(1.5, 3.0), 0.9);
      AddBump(t, rng.Uniform(0.3, 0.6) * top, rng.Uniform(3.0, 5.0), -0.4);
      break;
    default:  // glide: single broad bump
      t.assign(num_bins, -0.3f);
      AddBump(t, rng.Uniform(0.15, 0.5) * top, rng.Uniform(2.5, 5.0), 0.8);
      break;
  }
  std::vector<float> noise(num_bins);
  for (auto &x : noise) x = static_cast<float>(rng.Normal() * 0.25);
  noise = Smooth(noise);
  for (int b = 0; b < num_bins; ++b) t[b] += noise[b];
  return t;
}

double TemplateDistance(const std::vector<float> &a,
                        const std::vector<float> &b) {
  double acc = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

PhoneInventory MakePhones(int n_phones, int num_bins, uint64_t inv_seed) {
  constexpr double kMinPairDist = 0.5;
  for (uint64_t attempt = 0; attempt < 50; ++attempt) {
    Rng rng(DeriveSeed(inv_seed, "phones", attempt));
    PhoneInventory inv;
    inv.num_bins = num_bins;
    inv.phones.resize(n_phones);
    for (int p = 0; p < n_phones; ++p) {
      auto &ph = inv.phones[p];
      ph.manner = p % kNumMannerClasses;
      ph.name = Cat("ph", p < 10 ? "0" : "", p);
      ph.tmpl = MakeTemplate(ph.manner, num_bins, rng);
      ph.min_dur = kMinDur[ph.manner];
      ph.max_dur = kMaxDur[ph.manner];
    }
    bool ok = true;
    for (int i = 0; i < n_phones && ok; ++i)
      for (int j = i + 1; j < n_phones && ok; ++j)
        if (TemplateDistance(inv.phones[i].tmpl, inv.phones[j].tmpl) <
            kMinPairDist)
          ok = false;
    if (ok) return inv;
  }
  throw NumericError(
      "MakePhones: could not draw pairwise-distinct templates in 50 tries");
}

Lexicon MakeLexicon(const PhoneInventory &phones, int vocab_size,
                    uint64_t inv_seed) {
  Rng rng(DeriveSeed(inv_seed, "lexicon"));
  Lexicon lex;
  const int n_content = std::max(1, vocab_size * 4 / 5);
  const int n_phones = static_cast<int>(phones.phones.size());
  std::vector<std::vector<int>> spellings;
  for (int w = 0; w < vocab_size; ++w) {
    LexiconEntry e;
    e.content = w < n_content;
    e.word = Cat(e.content ? "obj" : "fil", w < 10 ? "0" : "", w);
    for (int attempt = 0; attempt < 100; ++attempt) {
      const int len = 2 + static_cast<int>(rng.UniformInt(3));
      std::vector<int> sp(len);
      for (auto &p : sp) p = static_cast<int>(rng.UniformInt(n_phones));
      if (std::find(spellings.begin(), spellings.end(), sp) ==
          spellings.end()) {
        e.phones = sp;
        break;
      }
    }
    if (e.phones.empty())
      throw NumericError(Cat("MakeLexicon: no unique spelling for word ", w,
                             " with ", n_phones, " phones"));
    spellings.push_back(e.phones);
    lex.index[e.word] = static_cast<int>(lex.entries.size());
    lex.entries.push_back(std::move(e));
  }
  return lex;
}

std::vector<float> MakeSmoothVector(int num_bins, double sigma, Rng &rng) {
  std::vector<float> v(num_bins);
  for (auto &x : v) x = static_cast<float>(rng.Normal());
  v = Smooth(v);
  // Rescale to the requested RMS after smoothing.
  double rms = 0;
  for (float x : v) rms += x * x;
  rms = std::sqrt(rms / num_bins);
  const float scale = static_cast<float>(rms > 1e-9 ? sigma / rms : 0.0);
  for (auto &x : v) x *= scale;
  return v;
}

// HSV (h in [0,1)) to RGB, full saturation/value variants handled inline.
void HsvToRgb(double h, double s, double v, float rgb[3]) {
  const double i = std::floor(h * 6.0);
  const double f = h * 6.0 - i;
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - f * s);
  const double t = v * (1.0 - (1.0 - f) * s);
  double r, g, b;
  switch (static_cast<int>(i) % 6) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
  rgb[0] = static_cast<float>(r);
  rgb[1] = static_cast<float>(g);
  rgb[2] = static_cast<float>(b);
}

// Box size 7 keeps rejection sampling reliable: on a 32px canvas the three
// largest possible conflict regions cover at most 507 of 676 positions, so a
// fourth glyph always has at least a quarter of the grid free.
constexpr int kGlyphSize = 7;  // drawn extent == placement bounding box
constexpr int kGlyphBox = kGlyphSize;

// Draws word `word_id`'s glyph with its top-left box corner at (x0, y0).
void DrawGlyph(std::vector<float> &pixels, int image_size, int word_id,
               int x0, int y0) {
  float rgb[3];
  // Golden-ratio hue stepping keeps colors of nearby ids far apart.
  HsvToRgb(std::fmod(word_id * 0.61803398875, 1.0), 1.0,
           0.6 + 0.4 * ((word_id / 7) % 2), rgb);
  const int shape = word_id % 5;
  const double c = (kGlyphSize - 1) / 2.0;  // glyph-local center
  for (int gy = 0; gy < kGlyphSize; ++gy) {
    for (int gx = 0; gx < kGlyphSize; ++gx) {
      const double dx = gx - c, dy = gy - c;
      bool on = false;
      switch (shape) {
        case 0:  // square
          on = true;
          break;
        case 1:  // disc
          on = dx * dx + dy * dy <= c * c + 0.5;
          break;
        case 2:  // triangle pointing up
          on = std::abs(dx) <= (gy + 1) / 2.0;
          break;
        case 3:  // cross
          on = std::abs(dx) <= 1.0 || std::abs(dy) <= 1.0;
          break;
        default:  // ring
          on = dx * dx + dy * dy <= c * c + 0.5 &&
               dx * dx + dy * dy >= (c - 1.5) * (c - 1.5);
          break;
      }
      if (!on) continue;
      const int px = x0 + gx, py = y0 + gy;
      for (int ch = 0; ch < 3; ++ch)
        pixels[(ch * image_size + py) * image_size + px] = rgb[ch];
    }
  }
}

}  // namespace

void CorpusConfig::Validate() const {
  if (vocab_size < 4)
    throw ConfigError(Cat("corpus config: vocab_size must be >= 4, got ",
                          vocab_size));
  if (n_phones < 6)
    throw ConfigError(Cat("corpus config: n_phones must be >= 6, got ",
                          n_phones));
  if (n_pairs < 1)
    throw ConfigError(Cat("corpus config: n_pairs must be >= 1, got ",
                          n_pairs));
  if (n_speakers < 1)
    throw ConfigError(Cat("corpus config: n_speakers must be >= 1, got ",
                          n_speakers));
  if (num_bins < 8)
    throw ConfigError(Cat("corpus config: num_bins must be >= 8, got ",
                          num_bins));
  if (image_size < kGlyphBox)
    throw ConfigError(Cat("corpus config: image_size must be >= ", kGlyphBox,
                          ", got ", image_size));
  double mix_sum = 0;
  for (double m : condition_mix) {
    if (m < 0)
      throw ConfigError("corpus config: condition_mix entries must be >= 0");
    mix_sum += m;
  }
  if (std::abs(mix_sum - 1.0) > 1e-9)
    throw ConfigError(Cat("corpus config: condition_mix must sum to 1, got ",
                          mix_sum));
  if (jitter < 0 || tilt_sigma < 0 || shift_severity < 0)
    throw ConfigError("corpus config: noise scales must be >= 0");
}

SynthInventory BuildInventory(const CorpusConfig &config) {
  config.Validate();
  SynthInventory inv;
  inv.phones = MakePhones(config.n_phones, config.num_bins,
                          config.inventory_seed);
  inv.lexicon = MakeLexicon(inv.phones, config.vocab_size,
                            config.inventory_seed);
  {
    Rng rng(DeriveSeed(config.inventory_seed, "channel"));
    inv.channel_color = MakeSmoothVector(config.num_bins, 1.0, rng);
  }
  inv.speaker_tilts.resize(config.n_speakers);
  for (int s = 0; s < config.n_speakers; ++s) {
    Rng rng(DeriveSeed(config.seed, "speaker-tilt", static_cast<uint64_t>(s)));
    inv.speaker_tilts[s] =
        MakeSmoothVector(config.num_bins, config.tilt_sigma, rng);
  }
  return inv;
}

UtteranceRecord RenderUtterance(const std::vector<std::string> &words,
                                int speaker_id, const SynthInventory &inv,
                                uint64_t seed, double jitter) {
  if (words.empty()) throw DataError("RenderUtterance: empty word sequence");
  if (speaker_id < 0 ||
      speaker_id >= static_cast<int>(inv.speaker_tilts.size()))
    throw DataError(Cat("RenderUtterance: speaker ", speaker_id,
                        " out of range (", inv.speaker_tilts.size(),
                        " speakers)"));
  std::vector<int> phone_seq;
  for (const auto &w : words) {
    const int id = inv.lexicon.Find(w);
    if (id < 0) throw DataError(Cat("RenderUtterance: unknown word '", w, "'"));
    const auto &sp = inv.lexicon.entries[id].phones;
    phone_seq.insert(phone_seq.end(), sp.begin(), sp.end());
  }

  const int f = inv.phones.num_bins;
  const auto &tilt = inv.speaker_tilts[speaker_id];
  Rng rng(seed);
  UtteranceRecord rec;
  rec.words = words;
  rec.speaker_id = speaker_id;
  rec.condition = 'A';
  std::vector<float> frames;
  for (int pid : phone_seq) {
    const auto &ph = inv.phones.phones[pid];
    const int dur =
        ph.min_dur +
        static_cast<int>(rng.UniformInt(ph.max_dur - ph.min_dur + 1));
    for (int t = 0; t < dur; ++t) {
      for (int b = 0; b < f; ++b) {
        float v = ph.tmpl[b] + tilt[b];
        if (jitter > 0) v += static_cast<float>(rng.Normal() * jitter);
        frames.push_back(v);
      }
      rec.phone_labels.push_back(pid);
    }
  }
  rec.features.num_frames = static_cast<int64_t>(rec.phone_labels.size());
  rec.features.num_bins = f;
  rec.features.values = std::move(frames);
  rec.features.kind = "synth";
  rec.features.Validate();
  return rec;
}

void AddLogNoise(FeatureMatrix &m, double stddev, Rng &rng) {
  for (auto &v : m.values) v += static_cast<float>(rng.Normal() * stddev);
}

void AddChannelColor(FeatureMatrix &m, const std::vector<float> &color,
                     double scale) {
  if (static_cast<int64_t>(color.size()) != m.num_bins)
    throw ShapeError(Cat("AddChannelColor: color has ", color.size(),
                         " bins, features have ", m.num_bins));
  for (int64_t t = 0; t < m.num_frames; ++t)
    for (int64_t b = 0; b < m.num_bins; ++b)
      m.At(t, b) += static_cast<float>(scale * color[b]);
}

UtteranceRecord ApplyDomainShift(const UtteranceRecord &u, char condition,
                                 const SynthInventory &inv, double severity,
                                 uint64_t seed) {
  if (u.condition != 'A')
    throw DataError(Cat("ApplyDomainShift: input must be condition A, got ",
                        u.condition, " (no double corruption)"));
  if (condition != 'B' && condition != 'C' && condition != 'D')
    throw ConfigError(Cat("ApplyDomainShift: bad target condition '",
                          condition, "'"));
  UtteranceRecord out = u;
  out.condition = condition;
  Rng rng(seed);
  // D is defined as C then B on the same seed path.
  if (condition == 'C' || condition == 'D')
    AddChannelColor(out.features, inv.channel_color, severity);
  if (condition == 'B' || condition == 'D')
    AddLogNoise(out.features, severity, rng);
  return out;
}

ImageRecord RenderImage(const std::vector<int> &object_word_ids,
                        const SynthInventory &inv, uint64_t seed,
                        int image_size) {
  if (object_word_ids.empty() || object_word_ids.size() > 4)
    throw DataError(Cat("RenderImage: need 1..4 objects, got ",
                        object_word_ids.size()));
  if (image_size < kGlyphBox)
    throw ConfigError(Cat("RenderImage: canvas ", image_size,
                          " smaller than one glyph box ", kGlyphBox));
  const int vocab = static_cast<int>(inv.lexicon.entries.size());
  ImageRecord img;
  img.height = img.width = image_size;
  img.pixels.assign(3 * static_cast<size_t>(image_size) * image_size, 0.0f);
  img.presence.assign(vocab, 0);

  Rng rng(seed);
  std::vector<std::pair<int, int>> placed;  // top-left corners of boxes
  for (int id : object_word_ids) {
    if (id < 0 || id >= vocab)
      throw DataError(Cat("RenderImage: object id ", id, " out of vocabulary"));
    if (!inv.lexicon.entries[id].content)
      throw DataError(Cat("RenderImage: word '", inv.lexicon.entries[id].word,
                          "' is not drawable"));
    bool ok = false;
    for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
      const int x0 = static_cast<int>(rng.UniformInt(image_size - kGlyphBox + 1));
      const int y0 = static_cast<int>(rng.UniformInt(image_size - kGlyphBox + 1));
      bool clash = false;
      for (auto [px, py] : placed)
        if (std::abs(px - x0) < kGlyphBox && std::abs(py - y0) < kGlyphBox) {
          clash = true;
          break;
        }
      if (clash) continue;
      DrawGlyph(img.pixels, image_size, id, x0, y0);
      placed.emplace_back(x0, y0);
      ok = true;
    }
    if (!ok)
      throw DataError(Cat("RenderImage: could not place object '",
                          inv.lexicon.entries[id].word,
                          "' without overlap after 100 attempts"));
    img.presence[id] = 1;
    img.objects.push_back(inv.lexicon.entries[id].word);
  }
  return img;
}

Corpus GenerateCorpus(const CorpusConfig &config) {
  config.Validate();
  Corpus corpus;
  corpus.config = config;
  corpus.inventory = BuildInventory(config);
  const auto &inv = corpus.inventory;

  const auto content_ids = inv.lexicon.ContentWordIds();
  std::vector<int> filler_ids;
  for (size_t i = 0; i < inv.lexicon.entries.size(); ++i)
    if (!inv.lexicon.entries[i].content) filler_ids.push_back(static_cast<int>(i));

  // Cumulative condition thresholds.
  std::array<double, 4> cum{};
  double acc = 0;
  for (int i = 0; i < 4; ++i) {
    acc += config.condition_mix[i];
    cum[i] = acc;
  }

  corpus.pairs.resize(config.n_pairs);
  for (int i = 0; i < config.n_pairs; ++i) {
    const uint64_t idx = static_cast<uint64_t>(i);
    Rng rng(DeriveSeed(config.seed, "pair", idx));

    const int n_obj =
        1 + static_cast<int>(rng.UniformInt(
                std::min<int64_t>(4, static_cast<int64_t>(content_ids.size()))));
    std::vector<int> objects;
    while (static_cast<int>(objects.size()) < n_obj) {
      const int cand = content_ids[rng.UniformInt(
          static_cast<int64_t>(content_ids.size()))];
      if (std::find(objects.begin(), objects.end(), cand) == objects.end())
        objects.push_back(cand);
    }
    std::vector<int> caption_ids = objects;
    if (!filler_ids.empty()) {
      const int n_fill = static_cast<int>(rng.UniformInt(4));  // 0..3
      for (int k = 0; k < n_fill; ++k)
        caption_ids.push_back(
            filler_ids[rng.UniformInt(static_cast<int64_t>(filler_ids.size()))]);
    }
    // Fisher-Yates shuffle for caption order.
    for (size_t k = caption_ids.size(); k > 1; --k) {
      const size_t j = static_cast<size_t>(rng.UniformInt(static_cast<int64_t>(k)));
      std::swap(caption_ids[k - 1], caption_ids[j]);
    }
    std::vector<std::string> caption;
    for (int id : caption_ids) caption.push_back(inv.lexicon.entries[id].word);

    const int speaker = static_cast<int>(rng.UniformInt(config.n_speakers));
    const double roll = rng.Uniform();
    char condition = 'D';
    for (int c = 0; c < 4; ++c)
      if (roll < cum[c]) {
        condition = static_cast<char>('A' + c);
        break;
      }

    auto &pair = corpus.pairs[i];
    pair.utterance = RenderUtterance(caption, speaker, inv,
                                     DeriveSeed(config.seed, "utt", idx),
                                     config.jitter);
    if (condition != 'A')
      pair.utterance =
          ApplyDomainShift(pair.utterance, condition, inv,
                           config.shift_severity,
                           DeriveSeed(config.seed, "shift", idx));
    pair.image = RenderImage(objects, inv, DeriveSeed(config.seed, "img", idx),
                             config.image_size);
    std::ostringstream id;
    id << "pair-" << std::setw(6) << std::setfill('0') << i;
    pair.pair_id = id.str();
  }
  return corpus;
}

std::string ManifestText(const Corpus &corpus) {
  std::ostringstream os;
  for (const auto &p : corpus.pairs) {
    os << p.pair_id << "\tutt/" << p.pair_id << ".gdfa\timg/" << p.pair_id
       << ".gdfa\t" << p.utterance.speaker_id << "\t" << p.utterance.condition
       << "\t";
    for (size_t i = 0; i < p.utterance.words.size(); ++i) {
      if (i) os << ' ';
      os << p.utterance.words[i];
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace gdistill
