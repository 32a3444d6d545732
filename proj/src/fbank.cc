// src/fbank.cc

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

#include "gdistill/fbank.h"

#include <algorithm>
#include <complex>

namespace gdistill {

namespace {

// In-place iterative radix-2 Cooley-Tukey. n must be a power of two.
void Fft(std::vector<std::complex<double>> &a) {
  const size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * M_PI / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        auto u = a[i + k];
        auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

size_t NextPow2(size_t n) {
  size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Triangular filters equally spaced on the Mel scale from 0 Hz to Nyquist.
// Returns per-filter (weight over FFT bins 0..n_fft/2) as a dense matrix.
std::vector<double> MelFilterbank(int n_mels, size_t n_fft, double sample_rate,
                                  size_t n_spectrum) {
  const double mel_lo = MelFromHz(0.0);
  const double mel_hi = MelFromHz(sample_rate / 2.0);
  std::vector<double> mel_points(static_cast<size_t>(n_mels) + 2);
  for (int i = 0; i < n_mels + 2; ++i)
    mel_points[i] = mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1);

  std::vector<double> weights(static_cast<size_t>(n_mels) * n_spectrum, 0.0);
  for (int m = 0; m < n_mels; ++m) {
    const double left = mel_points[m];
    const double center = mel_points[m + 1];
    const double right = mel_points[m + 2];
    for (size_t k = 0; k < n_spectrum; ++k) {
      const double mel_k =
          MelFromHz(static_cast<double>(k) * sample_rate / n_fft);
      double w = 0.0;
      if (mel_k > left && mel_k < right) {
        w = mel_k <= center ? (mel_k - left) / (center - left)
                            : (right - mel_k) / (right - center);
      }
      weights[m * n_spectrum + k] = w;
    }
  }
  return weights;
}

}  // namespace

std::vector<double> MelCenterFrequenciesHz(int n_mels, double sample_rate) {
  if (n_mels < 1) throw ConfigError("MelCenterFrequenciesHz: n_mels must be >= 1");
  const double mel_hi = MelFromHz(sample_rate / 2.0);
  std::vector<double> centers(static_cast<size_t>(n_mels));
  for (int m = 0; m < n_mels; ++m)
    centers[m] = HzFromMel(mel_hi * (m + 1) / (n_mels + 1));
  return centers;
}

FeatureMatrix ComputeFbank(const Waveform &w, const FbankOptions &opts) {
  if (w.sample_rate <= 0)
    throw DataError(Cat("ComputeFbank: bad sample rate ", w.sample_rate));
  if (opts.n_mels < 1)
    throw ConfigError(Cat("ComputeFbank: n_mels must be >= 1, got ", opts.n_mels));
  const size_t window =
      static_cast<size_t>(w.sample_rate * opts.window_ms / 1000.0f + 0.5f);
  const size_t shift =
      static_cast<size_t>(w.sample_rate * opts.shift_ms / 1000.0f + 0.5f);
  if (window < 2 || shift < 1)
    throw ConfigError(Cat("ComputeFbank: degenerate framing: window=", window,
                          " shift=", shift));
  const size_t n = w.samples.size();
  if (n < window)
    throw DataError(Cat("ComputeFbank: waveform of ", n,
                        " samples is shorter than one ", window,
                        "-sample window"));
  for (float s : w.samples)
    if (!std::isfinite(s))
      throw DataError("ComputeFbank: waveform contains non-finite samples");

  const int64_t t_out = static_cast<int64_t>((n - window) / shift) + 1;
  const size_t n_fft = NextPow2(window);
  const size_t n_spectrum = n_fft / 2 + 1;
  const auto mel_weights =
      MelFilterbank(opts.n_mels, n_fft, w.sample_rate, n_spectrum);

  std::vector<double> hamming(window);
  for (size_t i = 0; i < window; ++i)
    hamming[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / (window - 1));

  FeatureMatrix out;
  out.num_frames = t_out;
  out.num_bins = opts.n_mels;
  out.values.resize(static_cast<size_t>(t_out) * opts.n_mels);
  out.shift_ms = opts.shift_ms;
  out.window_ms = opts.window_ms;
  out.kind = "fbank";

  std::vector<std::complex<double>> spec(n_fft);
  std::vector<double> mag(n_spectrum);
  for (int64_t t = 0; t < t_out; ++t) {
    const float *frame = w.samples.data() + t * shift;
    // Pre-emphasis within the frame; the first sample is differenced against
    // itself, the usual edge convention.
    for (size_t i = 0; i < n_fft; ++i) spec[i] = 0.0;
    for (size_t i = 0; i < window; ++i) {
      const double prev = i == 0 ? frame[0] : frame[i - 1];
      spec[i] = (frame[i] - opts.preemphasis * prev) * hamming[i];
    }
    Fft(spec);
    for (size_t k = 0; k < n_spectrum; ++k) mag[k] = std::abs(spec[k]);

    for (int m = 0; m < opts.n_mels; ++m) {
      const double *wrow = mel_weights.data() + m * n_spectrum;
      double acc = 0.0;
      for (size_t k = 0; k < n_spectrum; ++k) acc += wrow[k] * mag[k];
      out.values[t * opts.n_mels + m] =
          static_cast<float>(std::log(std::max(acc, opts.log_floor)));
    }
  }

  if (opts.mean_var_norm) {
    for (int m = 0; m < opts.n_mels; ++m) {
      double sum = 0, sumsq = 0;
      for (int64_t t = 0; t < t_out; ++t) {
        const double v = out.At(t, m);
        sum += v;
        sumsq += v * v;
      }
      const double mean = sum / t_out;
      const double var = std::max(sumsq / t_out - mean * mean, 1e-12);
      const double inv_std = 1.0 / std::sqrt(var);
      for (int64_t t = 0; t < t_out; ++t)
        out.At(t, m) = static_cast<float>((out.At(t, m) - mean) * inv_std);
    }
  }
  return out;
}

}  // namespace gdistill
