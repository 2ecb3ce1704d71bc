// Copyright 2026 The pbdrnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <vector>

#include "pbdr/dsp/stft.hpp"
#include "pbdr/dsp/wave.hpp"

namespace pbdr::dsp {

struct MfccConfig {
  double window_ms = 40.0;
  double hop_ms = 10.0;
  int n_mels = 40;
  int n_coeffs = 13;
  double mel_fmin = 0.0;
  double mel_fmax = 8000.0;
  bool center_pad = true;

  int window_samples(int sample_rate) const;
  int hop_samples(int sample_rate) const;
  int fft_size(int sample_rate) const;  // next power of two >= window
  void validate(int sample_rate) const;
};

struct MfccFrames {
  int frames = 0;
  int coeffs = 0;
  std::vector<double> values;  // frames x coeffs
  int frame_hop = 0;

  double& at(int t, int c) {
    return values[static_cast<std::size_t>(t) * coeffs + c];
  }
  double at(int t, int c) const {
    return values[static_cast<std::size_t>(t) * coeffs + c];
  }
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular filters evaluated at FFT bin centers; rows are filters,
// columns are the nfft/2+1 bins. Triangle weights are computed on the Hz
// axis between mel-spaced corner frequencies.
std::vector<double> mel_filterbank(int n_mels, int nfft, int sample_rate,
                                   double fmin, double fmax);

// Orthonormal DCT-II matrix slice: n_coeffs x n_mels.
std::vector<double> dct2_matrix(int n_coeffs, int n_mels);

// Frame -> window -> power spectrum -> mel -> log (floored at 1e-10) ->
// DCT-II, keeping the first n_coeffs coefficients.
MfccFrames mfcc(const Waveform& w, const MfccConfig& cfg);

// Log-mel energies (frames x n_mels) from the same front end; used by the
// toy-corpus separability check.
std::vector<double> log_mel(const Waveform& w, const MfccConfig& cfg,
                            int* frames_out);

}  // namespace pbdr::dsp
