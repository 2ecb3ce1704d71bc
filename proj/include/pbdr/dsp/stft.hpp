// Copyright 2026 The pbdrnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <vector>

#include "pbdr/dsp/wave.hpp"
#include "pbdr/util/error.hpp"

namespace pbdr::dsp {

enum class WindowType { kHamming };

struct StftConfig {
  double window_ms = 20.0;
  double hop_ms = 10.0;
  int fft_size = 512;
  WindowType window_type = WindowType::kHamming;
  bool center_pad = true;

  int window_samples(int sample_rate) const;
  int hop_samples(int sample_rate) const;
  int bins() const { return fft_size / 2 + 1; }
  void validate(int sample_rate) const;
};

struct ComplexSpectrogram {
  int frames = 0;
  int bins = 0;
  std::vector<std::complex<double>> values;  // frames x bins, row-major
  int frame_hop = 0;                         // samples
  int sample_rate = 0;
  int n_samples = -1;  // source length when known; keeps istft(stft(w)) exact
  StftConfig config;

  std::complex<double>& at(int t, int f) {
    return values[static_cast<std::size_t>(t) * bins + f];
  }
  std::complex<double> at(int t, int f) const {
    return values[static_cast<std::size_t>(t) * bins + f];
  }
};

// Periodic Hamming window (0.54 - 0.46 cos(2 pi n / N)).
std::vector<double> make_window(WindowType type, int length);

// Analysis framing shared by the STFT, the MFCC front end, and the
// differentiable graph ops, so frame counts and padding agree everywhere.
// src[t*win + i] is the signal index feeding frame t position i; with
// center padding, indices are reflected at the edges.
struct FramePlan {
  int n_samples = 0;
  int frames = 0;
  int win = 0;
  int hop = 0;
  int nfft = 0;
  bool center = false;
  std::vector<double> window;
  std::vector<int> src;
};

FramePlan make_frame_plan(int n_samples, int win, int hop, int nfft,
                          bool center, WindowType wtype);

// Synthesis plan: squared-window overlap-add normalizer (floored at 1e-10)
// over the padded extent, plus the slice back to the original length.
struct OlaPlan {
  int n_samples = 0;
  int frames = 0;
  int win = 0;
  int hop = 0;
  int nfft = 0;
  int pad = 0;  // win/2 when centered, 0 otherwise
  std::vector<double> window;
  std::vector<double> norm;  // length n_samples + 2*pad
};

OlaPlan make_ola_plan(int n_samples, int frames, int win, int hop, int nfft,
                      bool center, WindowType wtype);

ComplexSpectrogram stft(const Waveform& w, const StftConfig& cfg);

// Least-squares overlap-add inverse. n_samples < 0 infers (frames-1)*hop,
// which is exact whenever the original length was a hop multiple; callers
// that know the true length should pass it.
Waveform istft(const ComplexSpectrogram& x, const StftConfig& cfg,
               int n_samples = -1);

// stft(istft(x)): projects onto the set of consistent spectrograms.
ComplexSpectrogram consistency_project(const ComplexSpectrogram& x);

}  // namespace pbdr::dsp
