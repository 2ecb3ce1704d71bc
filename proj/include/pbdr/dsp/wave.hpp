// Copyright 2026 The pbdrnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pbdr::dsp {

struct Waveform {
  std::vector<double> samples;  // nominal range [-1, 1]
  int sample_rate = 16000;

  int size() const { return static_cast<int>(samples.size()); }
  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate
                           : 0.0;
  }
};

// Mean square of the samples.
double power(const Waveform& w);

// Mono 16-bit PCM little-endian WAV. Samples are normalized to [-1, 1) by
// dividing by 32768 on read; writing rounds and clamps.
Waveform read_wav(const std::string& path);
void write_wav(const std::string& path, const Waveform& w);

// clean + alpha*noise with alpha chosen so the clean-to-noise power ratio
// is snr_db. Noise shorter than clean is tiled; longer noise is cropped at
// a seeded random offset.
Waveform mix_at_snr(const Waveform& clean, const Waveform& noise,
                    double snr_db, std::uint64_t crop_seed = 0);

}  // namespace pbdr::dsp
