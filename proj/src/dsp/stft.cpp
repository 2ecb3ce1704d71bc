// Copyright 2026 The pbdrnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "pbdr/dsp/stft.hpp"

#include <cmath>

#include "pbdr/dsp/fft.hpp"

namespace pbdr::dsp {

namespace {

int ms_to_samples(double ms, int sample_rate) {
  return static_cast<int>(std::lround(ms * sample_rate / 1000.0));
}

// Reflect an out-of-range index back into [0, n) without repeating the
// edge sample.
int reflect_index(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

}  // namespace

int StftConfig::window_samples(int sample_rate) const {
  return ms_to_samples(window_ms, sample_rate);
}

int StftConfig::hop_samples(int sample_rate) const {
  return ms_to_samples(hop_ms, sample_rate);
}

void StftConfig::validate(int sample_rate) const {
  if (sample_rate <= 0) throw InvalidInput("stft: sample rate must be positive");
  int win = window_samples(sample_rate);
  int hop = hop_samples(sample_rate);
  if (win <= 0 || hop <= 0)
    throw InvalidInput("stft: window and hop must be positive");
  if (hop > win) throw InvalidInput("stft: hop longer than window");
  if (fft_size < win)
    throw InvalidInput("stft: fft_size " + std::to_string(fft_size) +
                       " smaller than window " + std::to_string(win));
  if ((fft_size & (fft_size - 1)) != 0)
    throw InvalidInput("stft: fft_size must be a power of two");
}

std::vector<double> make_window(WindowType type, int length) {
  std::vector<double> w(static_cast<std::size_t>(length));
  const double two_pi = 6.283185307179586476925286766559;
  switch (type) {
    case WindowType::kHamming:
      for (int i = 0; i < length; ++i)
        w[static_cast<std::size_t>(i)] = 0.54 - 0.46 * std::cos(two_pi * i / length);
      break;
  }
  return w;
}

FramePlan make_frame_plan(int n_samples, int win, int hop, int nfft,
                          bool center, WindowType wtype) {
  if (n_samples <= 0) throw InvalidInput("frame plan: empty waveform");
  FramePlan plan;
  plan.n_samples = n_samples;
  plan.win = win;
  plan.hop = hop;
  plan.nfft = nfft;
  plan.center = center;
  plan.window = make_window(wtype, win);
  int pad = center ? win / 2 : 0;
  if (center) {
    if (pad > n_samples - 1)
      throw InvalidInput("frame plan: waveform shorter than half a window");
    plan.frames = n_samples / hop + 1;
  } else {
    if (n_samples < win)
      throw InvalidInput("frame plan: waveform shorter than a window");
    plan.frames = (n_samples - win) / hop + 1;
  }
  plan.src.resize(static_cast<std::size_t>(plan.frames) * win);
  for (int t = 0; t < plan.frames; ++t) {
    for (int i = 0; i < win; ++i) {
      int idx = t * hop + i - pad;
      plan.src[static_cast<std::size_t>(t) * win + i] =
          reflect_index(idx, n_samples);
    }
  }
  return plan;
}

OlaPlan make_ola_plan(int n_samples, int frames, int win, int hop, int nfft,
                      bool center, WindowType wtype) {
  OlaPlan plan;
  plan.n_samples = n_samples;
  plan.frames = frames;
  plan.win = win;
  plan.hop = hop;
  plan.nfft = nfft;
  plan.pad = center ? win / 2 : 0;
  plan.window = make_window(wtype, win);
  plan.norm.assign(static_cast<std::size_t>(n_samples + 2 * plan.pad), 0.0);
  for (int t = 0; t < frames; ++t) {
    for (int i = 0; i < win; ++i) {
      std::size_t p = static_cast<std::size_t>(t) * hop + i;
      if (p < plan.norm.size())
        plan.norm[p] += plan.window[static_cast<std::size_t>(i)] *
                        plan.window[static_cast<std::size_t>(i)];
    }
  }
  for (double& v : plan.norm)
    if (v < 1e-10) v = 1e-10;
  return plan;
}

ComplexSpectrogram stft(const Waveform& w, const StftConfig& cfg) {
  cfg.validate(w.sample_rate);
  if (w.samples.empty()) throw InvalidInput("stft: empty waveform");
  int win = cfg.window_samples(w.sample_rate);
  int hop = cfg.hop_samples(w.sample_rate);
  FramePlan plan = make_frame_plan(w.size(), win, hop, cfg.fft_size,
                                   cfg.center_pad, cfg.window_type);
  Fft<double> fft(cfg.fft_size);
  ComplexSpectrogram out;
  out.frames = plan.frames;
  out.bins = cfg.bins();
  out.frame_hop = hop;
  out.sample_rate = w.sample_rate;
  out.n_samples = w.size();
  out.config = cfg;
  out.values.resize(static_cast<std::size_t>(out.frames) * out.bins);

  std::vector<double> frame(static_cast<std::size_t>(win));
  for (int t = 0; t < plan.frames; ++t) {
    for (int i = 0; i < win; ++i)
      frame[static_cast<std::size_t>(i)] =
          plan.window[static_cast<std::size_t>(i)] *
          w.samples[static_cast<std::size_t>(
              plan.src[static_cast<std::size_t>(t) * win + i])];
    fft.rfft(frame.data(), win, &out.values[static_cast<std::size_t>(t) * out.bins]);
  }
  return out;
}

Waveform istft(const ComplexSpectrogram& x, const StftConfig& cfg,
               int n_samples) {
  if (x.frames <= 0 || x.bins != cfg.bins())
    throw InvalidInput("istft: spectrogram shape inconsistent with config (" +
                       std::to_string(x.bins) + " bins, expected " +
                       std::to_string(cfg.bins()) + ")");
  int sr = x.sample_rate > 0 ? x.sample_rate : 16000;
  cfg.validate(sr);
  int win = cfg.window_samples(sr);
  int hop = cfg.hop_samples(sr);
  if (n_samples < 0) n_samples = x.n_samples;
  if (n_samples < 0)
    n_samples = cfg.center_pad ? (x.frames - 1) * hop
                               : (x.frames - 1) * hop + win;
  OlaPlan plan = make_ola_plan(n_samples, x.frames, win, hop, cfg.fft_size,
                               cfg.center_pad, cfg.window_type);
  Fft<double> fft(cfg.fft_size);
  std::vector<double> acc(plan.norm.size(), 0.0);
  std::vector<double> time(static_cast<std::size_t>(cfg.fft_size));
  for (int t = 0; t < x.frames; ++t) {
    fft.irfft(&x.values[static_cast<std::size_t>(t) * x.bins], time.data());
    for (int i = 0; i < win; ++i) {
      std::size_t p = static_cast<std::size_t>(t) * hop + i;
      if (p < acc.size())
        acc[p] += plan.window[static_cast<std::size_t>(i)] *
                  time[static_cast<std::size_t>(i)];
    }
  }
  Waveform out;
  out.sample_rate = sr;
  out.samples.resize(static_cast<std::size_t>(n_samples));
  for (int i = 0; i < n_samples; ++i) {
    std::size_t p = static_cast<std::size_t>(i + plan.pad);
    out.samples[static_cast<std::size_t>(i)] = acc[p] / plan.norm[p];
  }
  return out;
}

ComplexSpectrogram consistency_project(const ComplexSpectrogram& x) {
  Waveform w = istft(x, x.config);
  return stft(w, x.config);
}

}  // namespace pbdr::dsp
