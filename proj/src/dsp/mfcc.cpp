// Copyright 2026 The pbdrnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "pbdr/dsp/mfcc.hpp"

#include <cmath>

#include "pbdr/dsp/fft.hpp"

namespace pbdr::dsp {

namespace {
constexpr double kLogFloor = 1e-10;
constexpr double kPi = 3.14159265358979323846;
}  // namespace

int MfccConfig::window_samples(int sample_rate) const {
  return static_cast<int>(std::lround(window_ms * sample_rate / 1000.0));
}

int MfccConfig::hop_samples(int sample_rate) const {
  return static_cast<int>(std::lround(hop_ms * sample_rate / 1000.0));
}

int MfccConfig::fft_size(int sample_rate) const {
  int win = window_samples(sample_rate);
  int n = 1;
  while (n < win) n <<= 1;
  return n;
}

void MfccConfig::validate(int sample_rate) const {
  if (sample_rate <= 0) throw InvalidInput("mfcc: sample rate must be positive");
  int win = window_samples(sample_rate);
  int hop = hop_samples(sample_rate);
  if (win <= 0 || hop <= 0) throw InvalidInput("mfcc: window and hop must be positive");
  if (hop > win) throw InvalidInput("mfcc: hop longer than window");
  if (n_coeffs > n_mels)
    throw InvalidInput("mfcc: n_coeffs exceeds n_mels");
  if (n_mels <= 0 || n_coeffs <= 0)
    throw InvalidInput("mfcc: filter and coefficient counts must be positive");
  double fmax = mel_fmax > 0 ? mel_fmax : sample_rate / 2.0;
  if (mel_fmin < 0 || fmax <= mel_fmin)
    throw InvalidInput("mfcc: bad mel frequency range");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

std::vector<double> mel_filterbank(int n_mels, int nfft, int sample_rate,
                                   double fmin, double fmax) {
  if (fmax <= 0) fmax = sample_rate / 2.0;
  int bins = nfft / 2 + 1;
  std::vector<double> corners(static_cast<std::size_t>(n_mels) + 2);
  double mel_lo = hz_to_mel(fmin);
  double mel_hi = hz_to_mel(fmax);
  for (int m = 0; m < n_mels + 2; ++m)
    corners[static_cast<std::size_t>(m)] =
        mel_to_hz(mel_lo + (mel_hi - mel_lo) * m / (n_mels + 1));

  std::vector<double> fb(static_cast<std::size_t>(n_mels) * bins, 0.0);
  for (int m = 0; m < n_mels; ++m) {
    double lo = corners[static_cast<std::size_t>(m)];
    double mid = corners[static_cast<std::size_t>(m) + 1];
    double hi = corners[static_cast<std::size_t>(m) + 2];
    for (int k = 0; k < bins; ++k) {
      double f = static_cast<double>(k) * sample_rate / nfft;
      double w = 0.0;
      if (f > lo && f < mid)
        w = (f - lo) / (mid - lo);
      else if (f >= mid && f < hi)
        w = (hi - f) / (hi - mid);
      fb[static_cast<std::size_t>(m) * bins + k] = w;
    }
  }
  return fb;
}

std::vector<double> dct2_matrix(int n_coeffs, int n_mels) {
  std::vector<double> d(static_cast<std::size_t>(n_coeffs) * n_mels);
  for (int j = 0; j < n_coeffs; ++j) {
    double scale = std::sqrt((j == 0 ? 1.0 : 2.0) / n_mels);
    for (int m = 0; m < n_mels; ++m)
      d[static_cast<std::size_t>(j) * n_mels + m] =
          scale * std::cos(kPi * j * (m + 0.5) / n_mels);
  }
  return d;
}

namespace {

// Shared front end: power spectrum frames through the mel filterbank, log
// floored. Returns frames x n_mels.
std::vector<double> log_mel_frames(const Waveform& w, const MfccConfig& cfg,
                                   int* frames_out, int* hop_out) {
  cfg.validate(w.sample_rate);
  if (w.samples.empty()) throw InvalidInput("mfcc: empty waveform");
  int win = cfg.window_samples(w.sample_rate);
  int hop = cfg.hop_samples(w.sample_rate);
  int nfft = cfg.fft_size(w.sample_rate);
  FramePlan plan = make_frame_plan(w.size(), win, hop, nfft, cfg.center_pad,
                                   WindowType::kHamming);
  int bins = nfft / 2 + 1;
  std::vector<double> fb = mel_filterbank(cfg.n_mels, nfft, w.sample_rate,
                                          cfg.mel_fmin, cfg.mel_fmax);
  Fft<double> fft(nfft);
  std::vector<double> frame(static_cast<std::size_t>(win));
  std::vector<std::complex<double>> spec(static_cast<std::size_t>(bins));
  std::vector<double> out(static_cast<std::size_t>(plan.frames) * cfg.n_mels);
  for (int t = 0; t < plan.frames; ++t) {
    for (int i = 0; i < win; ++i)
      frame[static_cast<std::size_t>(i)] =
          plan.window[static_cast<std::size_t>(i)] *
          w.samples[static_cast<std::size_t>(
              plan.src[static_cast<std::size_t>(t) * win + i])];
    fft.rfft(frame.data(), win, spec.data());
    for (int m = 0; m < cfg.n_mels; ++m) {
      double acc = 0.0;
      const double* fbrow = &fb[static_cast<std::size_t>(m) * bins];
      for (int k = 0; k < bins; ++k) acc += fbrow[k] * std::norm(spec[static_cast<std::size_t>(k)]);
      out[static_cast<std::size_t>(t) * cfg.n_mels + m] =
          std::log(acc < kLogFloor ? kLogFloor : acc);
    }
  }
  *frames_out = plan.frames;
  if (hop_out) *hop_out = hop;
  return out;
}

}  // namespace

MfccFrames mfcc(const Waveform& w, const MfccConfig& cfg) {
  int frames = 0;
  int hop = 0;
  std::vector<double> lm = log_mel_frames(w, cfg, &frames, &hop);
  std::vector<double> dct = dct2_matrix(cfg.n_coeffs, cfg.n_mels);
  MfccFrames out;
  out.frames = frames;
  out.coeffs = cfg.n_coeffs;
  out.frame_hop = hop;
  out.values.assign(static_cast<std::size_t>(frames) * cfg.n_coeffs, 0.0);
  for (int t = 0; t < frames; ++t) {
    const double* lmrow = &lm[static_cast<std::size_t>(t) * cfg.n_mels];
    for (int j = 0; j < cfg.n_coeffs; ++j) {
      const double* drow = &dct[static_cast<std::size_t>(j) * cfg.n_mels];
      double acc = 0.0;
      for (int m = 0; m < cfg.n_mels; ++m) acc += drow[m] * lmrow[m];
      out.values[static_cast<std::size_t>(t) * cfg.n_coeffs + j] = acc;
    }
  }
  return out;
}

std::vector<double> log_mel(const Waveform& w, const MfccConfig& cfg,
                            int* frames_out) {
  int frames = 0;
  std::vector<double> lm = log_mel_frames(w, cfg, &frames, nullptr);
  if (frames_out) *frames_out = frames;
  return lm;
}

}  // namespace pbdr::dsp
