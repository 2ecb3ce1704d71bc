// Copyright 2026 The pbdrnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "pbdr/util/error.hpp"

namespace pbdr::dsp {

// Iterative radix-2 FFT. Sizes are powers of two; twiddles are instance
// state so concurrent transforms never share mutable data.
template <typename S>
class Fft {
 public:
  explicit Fft(int n) : n_(n) {
    if (n < 1 || (n & (n - 1)) != 0)
      throw InvalidInput("fft: size must be a power of two, got " +
                         std::to_string(n));
    rev_.resize(static_cast<std::size_t>(n));
    int log2n = 0;
    while ((1 << log2n) < n) ++log2n;
    for (int i = 0; i < n; ++i) {
      int r = 0;
      for (int b = 0; b < log2n; ++b) r |= ((i >> b) & 1) << (log2n - 1 - b);
      rev_[static_cast<std::size_t>(i)] = r;
    }
    tw_.resize(static_cast<std::size_t>(n / 2));
    const double two_pi = 6.283185307179586476925286766559;
    for (int k = 0; k < n / 2; ++k) {
      double ang = -two_pi * k / n;
      tw_[static_cast<std::size_t>(k)] =
          std::complex<S>(static_cast<S>(std::cos(ang)),
                          static_cast<S>(std::sin(ang)));
    }
  }

  int size() const { return n_; }

  // In-place DFT, X_k = sum_n x_n e^{-2pi i k n / N}. No scaling.
  void forward(std::complex<S>* x) const {
    permute(x);
    for (int len = 2; len <= n_; len <<= 1) {
      int half = len >> 1;
      int step = n_ / len;
      for (int base = 0; base < n_; base += len) {
        for (int j = 0; j < half; ++j) {
          std::complex<S> w = tw_[static_cast<std::size_t>(j * step)];
          std::complex<S> u = x[base + j];
          std::complex<S> v = x[base + j + half] * w;
          x[base + j] = u + v;
          x[base + j + half] = u - v;
        }
      }
    }
  }

  // In-place inverse with 1/N scaling.
  void inverse(std::complex<S>* x) const {
    for (int i = 0; i < n_; ++i) x[i] = std::conj(x[i]);
    forward(x);
    S inv_n = S(1) / static_cast<S>(n_);
    for (int i = 0; i < n_; ++i) x[i] = std::conj(x[i]) * inv_n;
  }

  // One-sided transform of a real frame (length <= n, zero-padded).
  // Writes n/2 + 1 bins.
  void rfft(const S* in, int in_len, std::complex<S>* out) const {
    std::vector<std::complex<S>> buf(static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i)
      buf[static_cast<std::size_t>(i)] =
          std::complex<S>(i < in_len ? in[i] : S(0), S(0));
    forward(buf.data());
    for (int k = 0; k <= n_ / 2; ++k) out[k] = buf[static_cast<std::size_t>(k)];
  }

  // Inverse of rfft: Hermitian completion of n/2 + 1 bins, real output of
  // length n. Imaginary parts of the DC and Nyquist bins do not contribute.
  void irfft(const std::complex<S>* in, S* out) const {
    std::vector<std::complex<S>> buf(static_cast<std::size_t>(n_));
    for (int k = 0; k <= n_ / 2; ++k) buf[static_cast<std::size_t>(k)] = in[k];
    for (int k = n_ / 2 + 1; k < n_; ++k)
      buf[static_cast<std::size_t>(k)] = std::conj(in[n_ - k]);
    inverse(buf.data());
    for (int i = 0; i < n_; ++i) out[i] = buf[static_cast<std::size_t>(i)].real();
  }

 private:
  void permute(std::complex<S>* x) const {
    for (int i = 0; i < n_; ++i) {
      int r = rev_[static_cast<std::size_t>(i)];
      if (i < r) std::swap(x[i], x[r]);
    }
  }

  int n_;
  std::vector<int> rev_;
  std::vector<std::complex<S>> tw_;
};

}  // namespace pbdr::dsp
