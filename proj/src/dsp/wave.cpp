// Copyright 2026 The pbdrnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "pbdr/dsp/wave.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "pbdr/util/error.hpp"
#include "pbdr/util/rng.hpp"

namespace pbdr::dsp {

double power(const Waveform& w) {
  if (w.samples.empty()) return 0.0;
  double acc = 0.0;
  for (double s : w.samples) acc += s * s;
  return acc / static_cast<double>(w.samples.size());
}

namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& s, std::uint32_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
  s.push_back(static_cast<char>((v >> 16) & 0xff));
  s.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

Waveform read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("read_wav: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  const unsigned char* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 44 || std::memcmp(p, "RIFF", 4) != 0 ||
      std::memcmp(p + 8, "WAVE", 4) != 0)
    throw InvalidInput("read_wav: not a RIFF/WAVE file: " + path);

  std::size_t pos = 12;
  int sample_rate = 0;
  int channels = 0;
  int bits = 0;
  bool got_fmt = false;
  Waveform w;
  while (pos + 8 <= bytes.size()) {
    std::uint32_t chunk_size = read_u32(p + pos + 4);
    bool is_fmt = std::memcmp(p + pos, "fmt ", 4) == 0;
    bool is_data = std::memcmp(p + pos, "data", 4) == 0;
    std::size_t body = pos + 8;
    if (is_fmt) {
      if (body + 16 > bytes.size())
        throw InvalidInput("read_wav: truncated fmt chunk: " + path);
      std::uint16_t format = read_u16(p + body);
      channels = read_u16(p + body + 2);
      sample_rate = static_cast<int>(read_u32(p + body + 4));
      bits = read_u16(p + body + 14);
      if (format != 1)
        throw InvalidInput("read_wav: only PCM supported: " + path);
      got_fmt = true;
    } else if (is_data) {
      if (!got_fmt) throw InvalidInput("read_wav: data before fmt: " + path);
      if (channels != 1)
        throw InvalidInput("read_wav: expected mono, got " +
                           std::to_string(channels) + " channels: " + path);
      if (bits != 16)
        throw InvalidInput("read_wav: expected 16-bit samples, got " +
                           std::to_string(bits) + ": " + path);
      std::size_t n = chunk_size / 2;
      if (body + chunk_size > bytes.size())
        throw InvalidInput("read_wav: truncated data chunk: " + path);
      w.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        std::int16_t v = static_cast<std::int16_t>(read_u16(p + body + 2 * i));
        w.samples[i] = static_cast<double>(v) / 32768.0;
      }
      w.sample_rate = sample_rate;
      return w;
    }
    pos = body + chunk_size + (chunk_size & 1);
  }
  throw InvalidInput("read_wav: no data chunk: " + path);
}

void write_wav(const std::string& path, const Waveform& w) {
  if (w.sample_rate <= 0) throw InvalidInput("write_wav: bad sample rate");
  std::string out;
  std::uint32_t data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  out.reserve(44 + data_bytes);
  out.append("RIFF");
  put_u32(out, 36 + data_bytes);
  out.append("WAVE");
  out.append("fmt ");
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate * 2));  // byte rate
  put_u16(out, 2);   // block align
  put_u16(out, 16);  // bits
  out.append("data");
  put_u32(out, data_bytes);
  for (double s : w.samples) {
    double scaled = std::nearbyint(s * 32768.0);
    if (scaled > 32767.0) scaled = 32767.0;
    if (scaled < -32768.0) scaled = -32768.0;
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InvalidInput("write_wav: cannot open " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw InvalidInput("write_wav: write failed: " + path);
}

Waveform mix_at_snr(const Waveform& clean, const Waveform& noise,
                    double snr_db, std::uint64_t crop_seed) {
  if (clean.samples.empty() || noise.samples.empty())
    throw InvalidInput("mix_at_snr: empty input");
  if (clean.sample_rate != noise.sample_rate)
    throw InvalidInput("mix_at_snr: sample rate mismatch");

  const std::size_t n = clean.samples.size();
  std::vector<double> fitted(n);
  if (noise.samples.size() >= n) {
    std::size_t max_off = noise.samples.size() - n;
    std::size_t off = 0;
    if (max_off > 0) off = Rng(crop_seed).uniform_int(max_off + 1);
    for (std::size_t i = 0; i < n; ++i) fitted[i] = noise.samples[off + i];
  } else {
    for (std::size_t i = 0; i < n; ++i)
      fitted[i] = noise.samples[i % noise.samples.size()];
  }

  double p_clean = power(clean);
  double p_noise = 0.0;
  for (double v : fitted) p_noise += v * v;
  p_noise /= static_cast<double>(n);
  if (p_clean <= 0.0) throw InvalidInput("mix_at_snr: silent clean signal");
  if (p_noise <= 0.0) throw InvalidInput("mix_at_snr: silent noise signal");

  double alpha = std::sqrt(p_clean / (p_noise * std::pow(10.0, snr_db / 10.0)));
  Waveform out;
  out.sample_rate = clean.sample_rate;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    out.samples[i] = clean.samples[i] + alpha * fitted[i];
  return out;
}

}  // namespace pbdr::dsp
