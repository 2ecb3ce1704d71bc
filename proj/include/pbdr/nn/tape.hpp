// Copyright 2026 The pbdrnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pbdr/dsp/stft.hpp"
#include "pbdr/nn/tensor.hpp"

namespace pbdr::nn {

using Var = int;
inline constexpr Var kNoVar = -1;

// Reverse-mode tape. Ops execute eagerly and record a closure that routes
// gradients to their parents; backward() walks the tape in reverse, which
// is a topological order by construction. A tape is single-threaded;
// distinct tapes are independent.
template <typename S>
class Tape {
 public:
  // Leaves. Constants never receive gradients and cost no grad memory.
  Var input(Tensor<S> v, std::string name = "");
  Var constant(Tensor<S> v, std::string name = "");

  const Tensor<S>& val(Var v) const { return node(v).value; }
  const Tensor<S>& grad(Var v) const;
  int size() const { return static_cast<int>(nodes_.size()); }

  // Elementwise.
  Var add(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var x, S c) { return affine(x, c, S(0)); }
  Var affine(Var x, S a, S b);      // a*x + b
  Var cmul(Var x, Tensor<S> c);     // x * const, elementwise
  Var sigmoid(Var x);
  Var tanh(Var x);
  Var relu(Var x);
  Var log_floor(Var x, S floor_val);
  Var sum(Var x);  // -> scalar

  // Layers.
  Var dense(Var x, Var w, Var b = kNoVar);  // x (T,A) or (A); w (A,B); b (B)
  Var cmatmul(Var x, Tensor<S> m);          // x (T,A) @ const (A,B)
  Var col_affine(Var x, Tensor<S> s, Tensor<S> b);  // x[...,j]*s[j] + b[j]
  Var conv1d(Var x, Var w, Var b = kNoVar);  // x (T,Ci); w (k,Ci,Co)
  Var conv2d(Var x, Var w, Var b = kNoVar);  // x (T,F,Ci); w (kt,kf,Ci,Co)
  // Frequency-upsampling transposed conv: (T,F,Ci) -> (T,2F-1,Co).
  Var conv2d_transpose_f2(Var x, Var w, Var b = kNoVar);
  Var maxpool_freq2(Var x);     // (T,F,C) -> (T,ceil(F/2),C)
  Var maxpool_time2_s1(Var x);  // (T,C) -> (T,C), width 2 stride 1
  Var softmax_rows(Var x);      // (T,L) row softmax

  // Shape plumbing.
  Var concat_last(const std::vector<Var>& xs);
  Var slice_last(Var x, int c0, int c1);
  Var channel(Var x, int c);             // (T,F,C) -> (T,F)
  Var broadcast_channels(Var x, int c);  // (T,F) -> (T,F,C)
  Var tile_freq(Var x, int f);           // (T,C) -> (T,F,C)
  Var row(Var x, int t);                 // (T,D) -> (D)
  Var stack_rows(const std::vector<Var>& rows);
  Var unit2(Var x, S eps = S(1e-8));  // (..,2): normalize pairs to unit norm

  // Losses.
  Var l1_to_const(Var x, Tensor<S> target);  // sum |x - target| -> scalar
  // -sum_t log(max(p[t, labels[t]], floor)) -> scalar
  Var nll_rows(Var probs, std::vector<int> labels, S floor_val = S(1e-12));

  // DSP bridges (linear maps; plans come from pbdr::dsp so framing matches
  // the reference STFT exactly).
  Var frame_window(Var x, const dsp::FramePlan& plan);  // (N) -> (T,win)
  Var rdft(Var x, int nfft);                            // (T,win) -> (T,F,2)
  Var spec_to_wave(Var x, const dsp::OlaPlan& plan);    // (T,F,2) -> (N)
  Var wave_to_spec(Var x, const dsp::FramePlan& plan) {
    return rdft(frame_window(x, plan), plan.nfft);
  }

  // Seeds d(loss)/d(loss) = 1 and accumulates into every reachable input.
  void backward(Var loss_var);

 private:
  struct Node {
    Tensor<S> value;
    Tensor<S> grad;
    bool requires_grad = false;
    std::string name;
    std::function<void(Tape&)> back;
  };

  Node& node(Var v) { return nodes_[static_cast<std::size_t>(check(v))]; }
  const Node& node(Var v) const {
    return nodes_[static_cast<std::size_t>(check(v))];
  }
  int check(Var v) const;
  Var emit(Tensor<S> value, bool requires_grad, std::string name,
           std::function<void(Tape&)> back);
  bool needs(Var v) const { return v != kNoVar && node(v).requires_grad; }
  S* gptr(Var v) { return node(v).grad.data.data(); }

  std::vector<Node> nodes_;
  bool ran_backward_ = false;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace pbdr::nn
