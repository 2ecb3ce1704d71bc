// Copyright 2026 The pbdrnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "pbdr/nn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "pbdr/dsp/fft.hpp"

namespace pbdr::nn {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidInput(msg);
}

}  // namespace

template <typename S>
int Tape<S>::check(Var v) const {
  if (v < 0 || v >= static_cast<int>(nodes_.size()))
    throw InvalidInput("tape: variable id " + std::to_string(v) +
                       " out of range");
  return v;
}

template <typename S>
const Tensor<S>& Tape<S>::grad(Var v) const {
  if (!ran_backward_) throw StateError("tape: grad() before backward()");
  const Node& n = node(v);
  if (!n.requires_grad)
    throw InvalidInput("tape: node '" + n.name + "' has no gradient");
  return n.grad;
}

template <typename S>
Var Tape<S>::emit(Tensor<S> value, bool requires_grad, std::string name,
                  std::function<void(Tape&)> back) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.name = std::move(name);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

template <typename S>
Var Tape<S>::input(Tensor<S> v, std::string name) {
  return emit(std::move(v), true, std::move(name), nullptr);
}

template <typename S>
Var Tape<S>::constant(Tensor<S> v, std::string name) {
  return emit(std::move(v), false, std::move(name), nullptr);
}

template <typename S>
void Tape<S>::backward(Var loss_var) {
  if (nodes_.empty())
    throw StateError("tape: backward before any forward computation");
  check(loss_var);
  if (node(loss_var).value.numel() != 1)
    throw InvalidInput("tape: backward target '" + node(loss_var).name +
                       "' is not scalar");
  for (Node& n : nodes_) {
    if (n.requires_grad) {
      n.grad.shape = n.value.shape;
      n.grad.data.assign(n.value.data.size(), S(0));
    }
  }
  ran_backward_ = true;
  if (!node(loss_var).requires_grad) return;  // loss of constants only
  node(loss_var).grad.data[0] = S(1);
  for (int i = loss_var; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.requires_grad && n.back) n.back(*this);
  }
}

// ---------------------------------------------------------------------------
// elementwise

template <typename S>
Var Tape<S>::add(Var a, Var b) {
  const Tensor<S>& av = val(a);
  const Tensor<S>& bv = val(b);
  require(av.same_shape(bv), "add: shape mismatch " + shape_str(av.shape) +
                                 " vs " + shape_str(bv.shape));
  Tensor<S> out = av;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += bv.data[i];
  bool rg = needs(a) || needs(b);
  Var y = emit(std::move(out), rg, "add", nullptr);
  if (rg) {
    node(y).back = [y, a, b](Tape& tp) {
      const S* g = tp.node(y).grad.data.data();
      std::size_t n = tp.node(y).grad.data.size();
      if (tp.needs(a)) {
        S* ga = tp.gptr(a);
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
      }
      if (tp.needs(b)) {
        S* gb = tp.gptr(b);
        for (std::size_t i = 0; i < n; ++i) gb[i] += g[i];
      }
    };
  }
  return y;
}

template <typename S>
Var Tape<S>::mul(Var a, Var b) {
  const Tensor<S>& av = val(a);
  const Tensor<S>& bv = val(b);
  require(av.same_shape(bv), "mul: shape mismatch " + shape_str(av.shape) +
                                 " vs " + shape_str(bv.shape));
  Tensor<S> out = av;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= bv.data[i];
  bool rg = needs(a) || needs(b);
  Var y = emit(std::move(out), rg, "mul", nullptr);
  if (rg) {
    node(y).back = [y, a, b](Tape& tp) {
      const S* g = tp.node(y).grad.data.data();
      const S* avd = tp.val(a).data.data();
      const S* bvd = tp.val(b).data.data();
      std::size_t n = tp.node(y).grad.data.size();
      if (tp.needs(a)) {
        S* ga = tp.gptr(a);
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * bvd[i];
      }
      if (tp.needs(b)) {
        S* gb = tp.gptr(b);
        for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * avd[i];
      }
    };
  }
  return y;
}

template <typename S>
Var Tape<S>::affine(Var x, S a, S b) {
  Tensor<S> out = val(x);
  for (S& v : out.data) v = a * v + b;
  bool rg = needs(x);
  Var y = emit(std::move(out), rg, "affine", nullptr);
  if (rg) {
    node(y).back = [y, x, a](Tape& tp) {
      const S* g = tp.node(y).grad.data.data();
      S* gx = tp.gptr(x);
      std::size_t n = tp.node(y).grad.data.size();
      for (std::size_t i = 0; i < n; ++i) gx[i] += a * g[i];
    };
  }
  return y;
}

template <typename S>
Var Tape<S>::cmul(Var x, Tensor<S> c) {
  const Tensor<S>& xv = val(x);
  require(xv.same_shape(c), "cmul: shape mismatch");
  Tensor<S> out = xv;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= c.data[i];
  bool rg = needs(x);
  Var y = emit(std::move(out), rg, "cmul", nullptr);
  if (rg) {
    node(y).back = [y, x, c = std::move(c)](Tape& tp) {
      const S* g = tp.node(y).grad.data.data();
      S* gx = tp.gptr(x);
      for (std::size_t i = 0; i < c.data.size(); ++i) gx[i] += g[i] * c.data[i];
    };
  }
  return y;
}

template <typename S>
Var Tape<S>::sigmoid(Var x) {
  Tensor<S> out = val(x);
  for (S& v : out.data) v = S(1) / (S(1) + std::exp(-v));
  bool rg = needs(x);
  Var y = emit(std::move(out), rg, "sigmoid", nullptr);
  if (rg) {
    node(y).back = [y, x](Tape& tp) {
      const S* g = tp.node(y).grad.data.data();
      const S* o = tp.val(y).data.data();
      S* gx = tp.gptr(x);
      std::size_t n = tp.node(y).grad.data.size();
      for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * o[i] * (S(1) - o[i]);
    };
  }
  return y;
}

template <typename S>
Var Tape<S>::tanh(Var x) {
  Tensor<S> out = val(x);
  for (S& v : out.data) v = std::tanh(v);
  bool rg = needs(x);
  Var y = emit(std::move(out), rg, "tanh", nullptr);
  if (rg) {
    node(y).back = [y, x](Tape& tp) {
      const S* g = tp.node(y).grad.data.data();
      const S* o = tp.val(y).data.data();
      S* gx = tp.gptr(x);
      std::size_t n = tp.node(y).grad.data.size();
      for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * (S(1) - o[i] * o[i]);
    };
  }
  return y;
}

template <typename S>
Var Tape<S>::relu(Var x) {
  Tensor<S> out = val(x);
  for (S& v : out.data) v = v > S(0) ? v : S(0);
  bool rg = needs(x);
  Var y = emit(std::move(out), rg, "relu", nullptr);
  if (rg) {
    node(y).back = [y, x](Tape& tp) {
      const S* g = tp.node(y).grad.data.data();
      const S* xv = tp.val(x).data.data();
      S* gx = tp.gptr(x);
      std::size_t n = tp.node(y).grad.data.size();
      for (std::size_t i = 0; i < n; ++i)
        if (xv[i] > S(0)) gx[i] += g[i];
    };
  }
  return y;
}

template <typename S>
Var Tape<S>::log_floor(Var x, S floor_val) {
  Tensor<S> out = val(x);
  for (S& v : out.data) v = std::log(v < floor_val ? floor_val : v);
  bool rg = needs(x);
  Var y = emit(std::move(out), rg, "log_floor", nullptr);
  if (rg) {
    node(y).back = [y, x, floor_val](Tape& tp) {
      const S* g = tp.node(y).grad.data.data();
      const S* xv = tp.val(x).data.data();
      S* gx = tp.gptr(x);
      std::size_t n = tp.node(y).grad.data.size();
      for (std::size_t i = 0; i < n; ++i)
        if (xv[i] > floor_val) gx[i] += g[i] / xv[i];
    };
  }
  return y;
}

template <typename S>
Var Tape<S>::sum(Var x) {
  S acc = S(0);
  for (S v : val(x).data) acc += v;
  Tensor<S> out({1});
  out.data[0] = acc;
  bool rg = needs(x);
  Var y = emit(std::move(out), rg, "sum", nullptr);
  if (rg) {
    node(y).back = [y, x](Tape& tp) {
      S g = tp.node(y).grad.data[0];
      S* gx = tp.gptr(x);
      std::size_t n = tp.val(x).data.size();
      for (std::size_t i = 0; i < n; ++i) gx[i] += g;
    };
  }
  return y;
}

// ---------------------------------------------------------------------------
// layers

template <typename S>
Var Tape<S>::dense(Var x, Var w, Var b) {
  const Tensor<S>& xv = val(x);
  const Tensor<S>& wv = val(w);
  require(wv.rank() == 2, "dense: weight must be rank 2");
  require(xv.rank() == 1 || xv.rank() == 2, "dense: input must be rank 1 or 2");
  int rows = xv.rank() == 2 ? xv.dim(0) : 1;
  int in = xv.rank() == 2 ? xv.dim(1) : xv.dim(0);
  int out_dim = wv.dim(1);
  require(wv.dim(0) == in, "dense: input width " + std::to_string(in) +
                               " vs weight rows " + std::to_string(wv.dim(0)));
  if (b != kNoVar)
    require(val(b).rank() == 1 && val(b).dim(0) == out_dim,
            "dense: bias shape mismatch");

  Tensor<S> out(xv.rank() == 2 ? std::vector<int>{rows, out_dim}
                               : std::vector<int>{out_dim});
  const S* xd = xv.data.data();
  const S* wd = wv.data.data();
  S* od = out.data.data();
  for (int t = 0; t < rows; ++t) {
    S* orow = od + static_cast<std::size_t>(t) * out_dim;
    if (b != kNoVar) {
      const S* bd = val(b).data.data();
      for (int j = 0; j < out_dim; ++j) orow[j] = bd[j];
    }
    const S* xrow = xd + static_cast<std::size_t>(t) * in;
    for (int a = 0; a < in; ++a) {
      S xs = xrow[a];
      const S* wrow = wd + static_cast<std::size_t>(a) * out_dim;
      for (int j = 0; j < out_dim; ++j) orow[j] += xs * wrow[j];
    }
  }
  bool rg = needs(x) || needs(w) || (b != kNoVar && needs(b));
  Var y = emit(std::move(out), rg, "dense", nullptr);
  if (rg) {
    node(y).back = [y, x, w, b, rows, in, out_dim](Tape& tp) {
      const S* g = tp.node(y).grad.data.data();
      const S* xd = tp.val(x).data.data();
      const S* wd = tp.val(w).data.data();
      S* gx = tp.needs(x) ? tp.gptr(x) : nullptr;
      S* gw = tp.needs(w) ? tp.gptr(w) : nullptr;
      S* gb = (b != kNoVar && tp.needs(b)) ? tp.gptr(b) : nullptr;
      for (int t = 0; t < rows; ++t) {
        const S* grow = g + static_cast<std::size_t>(t) * out_dim;
        const S* xrow = xd + static_cast<std::size_t>(t) * in;
        if (gb)
          for (int j = 0; j < out_dim; ++j) gb[j] += grow[j];
        for (int a = 0; a < in; ++a) {
          const S* wrow = wd + static_cast<std::size_t>(a) * out_dim;
          if (gx) {
            S acc = S(0);
            for (int j = 0; j < out_dim; ++j) acc += grow[j] * wrow[j];
            gx[static_cast<std::size_t>(t) * in + a] += acc;
          }
          if (gw) {
            S xs = xrow[a];
            S* gwrow = gw + static_cast<std::size_t>(a) * out_dim;
            for (int j = 0; j < out_dim; ++j) gwrow[j] += xs * grow[j];
          }
        }
      }
    };
  }
  return y;
}

template <typename S>
Var Tape<S>::cmatmul(Var x, Tensor<S> m) {
  const Tensor<S>& xv = val(x);
  require(xv.rank() == 2 && m.rank() == 2 && xv.dim(1) == m.dim(0),
          "cmatmul: shape mismatch");
  int rows = xv.dim(0), in = xv.dim(1), out_dim = m.dim(1);
  Tensor<S> out({rows, out_dim});
  for (int t = 0; t < rows; ++t) {
    const S* xrow = &xv.data[static_cast<std::size_t>(t) * in];
    S* orow = &out.data[static_cast<std::size_t>(t) * out_dim];
    for (int a = 0; a < in; ++a) {
      S xs = xrow[a];
      const S* mrow = &m.data[static_cast<std::size_t>(a) * out_dim];
      for (int j = 0; j < out_dim; ++j) orow[j] += xs * mrow[j];
    }
  }
  bool rg = needs(x);
  Var y = emit(std::move(out), rg, "cmatmul", nullptr);
  if (rg) {
    node(y).back = [y, x, m = std::move(m), rows, in, out_dim](Tape& tp) {
      const S* g = tp.node(y).grad.data.data();
      S* gx = tp.gptr(x);
      for (int t = 0; t < rows; ++t) {
        const S* grow = g + static_cast<std::size_t>(t) * out_dim;
        for (int a = 0; a < in; ++a) {
          const S* mrow = &m.data[static_cast<std::size_t>(a) * out_dim];
          S acc = S(0);
          for (int j = 0; j < out_dim; ++j) acc += grow[j] * mrow[j];
          gx[static_cast<std::size_t>(t) * in + a] += acc;
        }
      }
    };
  }
  return y;
}

template <typename S>
Var Tape<S>::col_affine(Var x, Tensor<S> s, Tensor<S> b) {
  const Tensor<S>& xv = val(x);
  require(xv.rank() >= 1, "col_affine: rank");
  int cols = xv.dim(xv.rank() - 1);
  require(s.numel() == cols && b.numel() == cols,
          "col_affine: scale/bias width mismatch");
  Tensor<S> out = xv;
  std::size_t n = out.data.size();
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i % static_cast<std::size_t>(cols);
    out.data[i] = out.data[i] * s.data[j] + b.data[j];
  }
  bool rg = needs(x);
  Var y = emit(std::move(out), rg, "col_affine", nullptr);
  if (rg) {
    node(y).back = [y, x, s = std::move(s), cols](Tape& tp) {
      const S* g = tp.node(y).grad.data.data();
      S* gx = tp.gptr(x);
      std::size_t n = tp.node(y).grad.data.size();
      for (std::size_t i = 0; i < n; ++i)
        gx[i] += g[i] * s.data[i % static_cast<std::size_t>(cols)];
    };
  }
  return y;
}

template <typename S>
Var Tape<S>::conv1d(Var x, Var w, Var b) {
  const Tensor<S>& xv = val(x);
  const Tensor<S>& wv = val(w);
  require(xv.rank() == 2, "conv1d: input must be (T,Cin)");
  require(wv.rank() == 3, "conv1d: weight must be (k,Cin,Cout)");
  int t_len = xv.dim(0), ci = xv.dim(1);
  int k = wv.dim(0), co = wv.dim(2);
  require(wv.dim(1) == ci, "conv1d: channel mismatch");
  require(k % 2 == 1, "conv1d: kernel width must be odd");
  int pt = (k - 1) / 2;
  if (b != kNoVar)
    require(val(b).numel() == co, "conv1d: bias shape mismatch");

  Tensor<S> out({t_len, co});
  const S* xd = xv.data.data();
  const S* wd = wv.data.data();
  for (int t = 0; t < t_len; ++t) {
    S* orow = &out.data[static_cast<std::size_t>(t) * co];
    if (b != kNoVar) {
      const S* bd = val(b).data.data();
      for (int j = 0; j < co; ++j) orow[j] = bd[j];
    }
    for (int dt = 0; dt < k; ++dt) {
      int ti = t + dt - pt;
      if (ti < 0 || ti >= t_len) continue;
      const S* xrow = xd + static_cast<std::size_t>(ti) * ci;
      const S* wplane = wd + static_cast<std::size_t>(dt) * ci * co;
      for (int c = 0; c < ci; ++c) {
        S xs = xrow[c];
        const S* wrow = wplane + static_cast<std::size_t>(c) * co;
        for (int j = 0; j < co; ++j) orow[j] += xs * wrow[j];
      }
    }
  }
  bool rg = needs(x) || needs(w) || (b != kNoVar && needs(b));
  Var y = emit(std::move(out), rg, "conv1d", nullptr);
  if (rg) {
    node(y).back = [y, x, w, b, t_len, ci, k, co, pt](Tape& tp) {
      const S* g = tp.node(y).grad.data.data();
      const S* xd = tp.val(x).data.data();
      const S* wd = tp.val(w).data.data();
      S* gx = tp.needs(x) ? tp.gptr(x) : nullptr;
      S* gw = tp.needs(w) ? tp.gptr(w) : nullptr;
      S* gb = (b != kNoVar && tp.needs(b)) ? tp.gptr(b) : nullptr;
      for (int t = 0; t < t_len; ++t) {
        const S* grow = g + static_cast<std::size_t>(t) * co;
        if (gb)
          for (int j = 0; j < co; ++j) gb[j] += grow[j];
        for (int dt = 0; dt < k; ++dt) {
          int ti = t + dt - pt;
          if (ti < 0 || ti >= t_len) continue;
          const S* xrow = xd + static_cast<std::size_t>(ti) * ci;
          const S* wplane = wd + static_cast<std::size_t>(dt) * ci * co;
          S* gwplane = gw ? gw + static_cast<std::size_t>(dt) * ci * co : nullptr;
          for (int c = 0; c < ci; ++c) {
            const S* wrow = wplane + static_cast<std::size_t>(c) * co;
            if (gx) {
              S acc = S(0);
              for (int j = 0; j < co; ++j) acc += grow[j] * wrow[j];
              gx[static_cast<std::size_t>(ti) * ci + c] += acc;
            }
            if (gwplane) {
              S xs = xrow[c];
              S* gwrow = gwplane + static_cast<std::size_t>(c) * co;
              for (int j = 0; j < co; ++j) gwrow[j] += xs * grow[j];
            }
          }
        }
      }
    };
  }
  return y;
}

template <typename S>
Var Tape<S>::conv2d(Var x, Var w, Var b) {
  const Tensor<S>& xv = val(x);
  const Tensor<S>& wv = val(w);
  require(xv.rank() == 3, "conv2d: input must be (T,F,Cin)");
  require(wv.rank() == 4, "conv2d: weight must be (kt,kf,Cin,Cout)");
  int t_len = xv.dim(0), f_len = xv.dim(1), ci = xv.dim(2);
  int kt = wv.dim(0), kf = wv.dim(1), co = wv.dim(3);
  require(wv.dim(2) == ci, "conv2d: channel mismatch (input " +
                               std::to_string(ci) + ", weight " +
                               std::to_string(wv.dim(2)) + ")");
  require(kt % 2 == 1 && kf % 2 == 1, "conv2d: kernel sizes must be odd");
  int pt = (kt - 1) / 2, pf = (kf - 1) / 2;
  if (b != kNoVar)
    require(val(b).numel() == co, "conv2d: bias shape mismatch");

  Tensor<S> out({t_len, f_len, co});
  const S* xd = xv.data.data();
  const S* wd = wv.data.data();
  const S* bd = b != kNoVar ? val(b).data.data() : nullptr;
  for (int t = 0; t < t_len; ++t) {
    for (int f = 0; f < f_len; ++f) {
      S* orow = &out.data[(static_cast<std::size_t>(t) * f_len + f) * co];
      if (bd)
        for (int j = 0; j < co; ++j) orow[j] = bd[j];
      for (int dt = 0; dt < kt; ++dt) {
        int ti = t + dt - pt;
        if (ti < 0 || ti >= t_len) continue;
        for (int df = 0; df < kf; ++df) {
          int fi = f + df - pf;
          if (fi < 0 || fi >= f_len) continue;
          const S* xrow = xd + (static_cast<std::size_t>(ti) * f_len + fi) * ci;
          const S* wplane =
              wd + (static_cast<std::size_t>(dt) * kf + df) * ci * co;
          for (int c = 0; c < ci; ++c) {
            S xs = xrow[c];
            const S* wrow = wplane + static_cast<std::size_t>(c) * co;
            for (int j = 0; j < co; ++j) orow[j] += xs * wrow[j];
          }
        }
      }
    }
  }
  bool rg = needs(x) || needs(w) || (b != kNoVar && needs(b));
  Var y = emit(std::move(out), rg, "conv2d", nullptr);
  if (rg) {
    node(y).back = [y, x, w, b, t_len, f_len, ci, kt, kf, co, pt, pf](Tape& tp) {
      const S* g = tp.node(y).grad.data.data();
      const S* xd = tp.val(x).data.data();
      const S* wd = tp.val(w).data.data();
      S* gx = tp.needs(x) ? tp.gptr(x) : nullptr;
      S* gw = tp.needs(w) ? tp.gptr(w) : nullptr;
      S* gb = (b != kNoVar && tp.needs(b)) ? tp.gptr(b) : nullptr;
      for (int t = 0; t < t_len; ++t) {
        for (int f = 0; f < f_len; ++f) {
          const S* grow = g + (static_cast<std::size_t>(t) * f_len + f) * co;
          if (gb)
            for (int j = 0; j < co; ++j) gb[j] += grow[j];
          for (int dt = 0; dt < kt; ++dt) {
            int ti = t + dt - pt;
            if (ti < 0 || ti >= t_len) continue;
            for (int df = 0; df < kf; ++df) {
              int fi = f + df - pf;
              if (fi < 0 || fi >= f_len) continue;
              const S* xrow =
                  xd + (static_cast<std::size_t>(ti) * f_len + fi) * ci;
              S* gxrow =
                  gx ? gx + (static_cast<std::size_t>(ti) * f_len + fi) * ci
                     : nullptr;
              const S* wplane =
                  wd + (static_cast<std::size_t>(dt) * kf + df) * ci * co;
              S* gwplane =
                  gw ? gw + (static_cast<std::size_t>(dt) * kf + df) * ci * co
                     : nullptr;
              for (int c = 0; c < ci; ++c) {
                const S* wrow = wplane + static_cast<std::size_t>(c) * co;
                if (gxrow) {
                  S acc = S(0);
                  for (int j = 0; j < co; ++j) acc += grow[j] * wrow[j];
                  gxrow[c] += acc;
                }
                if (gwplane) {
                  S xs = xrow[c];
                  S* gwrow = gwplane + static_cast<std::size_t>(c) * co;
                  for (int j = 0; j < co; ++j) gwrow[j] += xs * grow[j];
                }
              }
            }
          }
        }
      }
    };
  }
  return y;
}

template <typename S>
Var Tape<S>::conv2d_transpose_f2(Var x, Var w, Var b) {
  const Tensor<S>& xv = val(x);
  const Tensor<S>& wv = val(w);
  require(xv.rank() == 3, "conv2d_transpose_f2: input must be (T,F,Cin)");
  require(wv.rank() == 4, "conv2d_transpose_f2: weight must be (kt,kf,Cin,Cout)");
  int t_len = xv.dim(0), f_len = xv.dim(1), ci = xv.dim(2);
  int kt = wv.dim(0), kf = wv.dim(1), co = wv.dim(3);
  require(wv.dim(2) == ci, "conv2d_transpose_f2: channel mismatch");
  require(kt % 2 == 1 && kf % 2 == 1,
          "conv2d_transpose_f2: kernel sizes must be odd");
  require(f_len >= 2, "conv2d_transpose_f2: needs at least 2 frequency bins");
  int pt = (kt - 1) / 2, pf = (kf - 1) / 2;
  int fo_len = 2 * f_len - 1;

  Tensor<S> out({t_len, fo_len, co});
  if (b != kNoVar) {
    require(val(b).numel() == co, "conv2d_transpose_f2: bias shape mismatch");
    const S* bd = val(b).data.data();
    for (std::size_t i = 0; i < out.data.size(); ++i)
      out.data[i] = bd[i % static_cast<std::size_t>(co)];
  }
  const S* xd = xv.data.data();
  const S* wd = wv.data.data();
  for (int t = 0; t < t_len; ++t) {
    for (int f = 0; f < f_len; ++f) {
      const S* xrow = xd + (static_cast<std::size_t>(t) * f_len + f) * ci;
      for (int dt = 0; dt < kt; ++dt) {
        int to = t + dt - pt;
        if (to < 0 || to >= t_len) continue;
        for (int df = 0; df < kf; ++df) {
          int fo = 2 * f + df - pf;
          if (fo < 0 || fo >= fo_len) continue;
          S* orow = &out.data[(static_cast<std::size_t>(to) * fo_len + fo) * co];
          const S* wplane =
              wd + (static_cast<std::size_t>(dt) * kf + df) * ci * co;
          for (int c = 0; c < ci; ++c) {
            S xs = xrow[c];
            const S* wrow = wplane + static_cast<std::size_t>(c) * co;
            for (int j = 0; j < co; ++j) orow[j] += xs * wrow[j];
          }
        }
      }
    }
  }
  bool rg = needs(x) || needs(w) || (b != kNoVar && needs(b));
  Var y = emit(std::move(out), rg, "conv2d_transpose_f2", nullptr);
  if (rg) {
    node(y).back = [y, x, w, b, t_len, f_len, ci, kt, kf, co, pt, pf,
                    fo_len](Tape& tp) {
      const S* g = tp.node(y).grad.data.data();
      const S* xd = tp.val(x).data.data();
      const S* wd = tp.val(w).data.data();
      S* gx = tp.needs(x) ? tp.gptr(x) : nullptr;
      S* gw = tp.needs(w) ? tp.gptr(w) : nullptr;
      S* gb = (b != kNoVar && tp.needs(b)) ? tp.gptr(b) : nullptr;
      if (gb) {
        std::size_t n = tp.node(y).grad.data.size();
        for (std::size_t i = 0; i < n; ++i)
          gb[i % static_cast<std::size_t>(co)] += g[i];
      }
      for (int t = 0; t < t_len; ++t) {
        for (int f = 0; f < f_len; ++f) {
          const S* xrow = xd + (static_cast<std::size_t>(t) * f_len + f) * ci;
          S* gxrow =
              gx ? gx + (static_cast<std::size_t>(t) * f_len + f) * ci : nullptr;
          for (int dt = 0; dt < kt; ++dt) {
            int to = t + dt - pt;
            if (to < 0 || to >= t_len) continue;
            for (int df = 0; df < kf; ++df) {
              int fo = 2 * f + df - pf;
              if (fo < 0 || fo >= fo_len) continue;
              const S* grow =
                  g + (static_cast<std::size_t>(to) * fo_len + fo) * co;
              const S* wplane =
                  wd + (static_cast<std::size_t>(dt) * kf + df) * ci * co;
              S* gwplane =
                  gw ? gw + (static_cast<std::size_t>(dt) * kf + df) * ci * co
                     : nullptr;
              for (int c = 0; c < ci; ++c) {
                const S* wrow = wplane + static_cast<std::size_t>(c) * co;
                if (gxrow) {
                  S acc = S(0);
                  for (int j = 0; j < co; ++j) acc += grow[j] * wrow[j];
                  gxrow[c] += acc;
                }
                if (gwplane) {
                  S xs = xrow[c];
                  S* gwrow = gwplane + static_cast<std::size_t>(c) * co;
                  for (int j = 0; j < co; ++j) gwrow[j] += xs * grow[j];
                }
              }
            }
          }
        }
      }
    };
  }
  return y;
}

template <typename S>
Var Tape<S>::maxpool_freq2(Var x) {
  const Tensor<S>& xv = val(x);
  require(xv.rank() == 3, "maxpool_freq2: input must be (T,F,C)");
  int t_len = xv.dim(0), f_len = xv.dim(1), ch = xv.dim(2);
  int fo = (f_len + 1) / 2;  // ceil mode
  Tensor<S> out({t_len, fo, ch});
  std::vector<int> arg(out.data.size());
  for (int t = 0; t < t_len; ++t) {
    for (int g = 0; g < fo; ++g) {
      int f0 = 2 * g;
      int f1 = std::min(f0 + 1, f_len - 1);
      for (int c = 0; c < ch; ++c) {
        std::size_t i0 = (static_cast<std::size_t>(t) * f_len + f0) * ch + c;
        std::size_t i1 = (static_cast<std::size_t>(t) * f_len + f1) * ch + c;
        std::size_t oi = (static_cast<std::size_t>(t) * fo + g) * ch + c;
        // ties keep the lower-frequency element
        if (f1 != f0 && xv.data[i1] > xv.data[i0]) {
          out.data[oi] = xv.data[i1];
          arg[oi] = static_cast<int>(i1);
        } else {
          out.data[oi] = xv.data[i0];
          arg[oi] = static_cast<int>(i0);
        }
      }
    }
  }
  bool rg = needs(x);
  Var y = emit(std::move(out), rg, "maxpool_freq2", nullptr);
  if (rg) {
    node(y).back = [y, x, arg = std::move(arg)](Tape& tp) {
      const S* g = tp.node(y).grad.data.data();
      S* gx = tp.gptr(x);
      for (std::size_t i = 0; i < arg.size(); ++i)
        gx[static_cast<std::size_t>(arg[i])] += g[i];
    };
  }
  return y;
}

template <typename S>
Var Tape<S>::maxpool_time2_s1(Var x) {
  const Tensor<S>& xv = val(x);
  require(xv.rank() == 2, "maxpool_time2_s1: input must be (T,C)");
  int t_len = xv.dim(0), ch = xv.dim(1);
  Tensor<S> out({t_len, ch});
  std::vector<int> arg(out.data.size());
  for (int t = 0; t < t_len; ++t) {
    int t1 = std::min(t + 1, t_len - 1);
    for (int c = 0; c < ch; ++c) {
      std::size_t i0 = static_cast<std::size_t>(t) * ch + c;
      std::size_t i1 = static_cast<std::size_t>(t1) * ch + c;
      if (t1 != t && xv.data[i1] > xv.data[i0]) {
        out.data[i0] = xv.data[i1];
        arg[i0] = static_cast<int>(i1);
      } else {
        out.data[i0] = xv.data[i0];
        arg[i0] = static_cast<int>(i0);
      }
    }
  }
  bool rg = needs(x);
  Var y = emit(std::move(out), rg, "maxpool_time2_s1", nullptr);
  if (rg) {
    node(y).back = [y, x, arg = std::move(arg)](Tape& tp) {
      const S* g = tp.node(y).grad.data.data();
      S* gx = tp.gptr(x);
      for (std::size_t i = 0; i < arg.size(); ++i)
        gx[static_cast<std::size_t>(arg[i])] += g[i];
    };
  }
  return y;
}

template <typename S>
Var Tape<S>::softmax_rows(Var x) {
  const Tensor<S>& xv = val(x);
  require(xv.rank() == 2, "softmax_rows: input must be (T,L)");
  int rows = xv.dim(0), cols = xv.dim(1);
  Tensor<S> out({rows, cols});
  for (int t = 0; t < rows; ++t) {
    const S* xrow = &xv.data[static_cast<std::size_t>(t) * cols];
    S* orow = &out.data[static_cast<std::size_t>(t) * cols];
    S mx = xrow[0];
    for (int j = 1; j < cols; ++j) mx = std::max(mx, xrow[j]);
    S denom = S(0);
    for (int j = 0; j < cols; ++j) {
      orow[j] = std::exp(xrow[j] - mx);
      denom += orow[j];
    }
    for (int j = 0; j < cols; ++j) orow[j] /= denom;
  }
  bool rg = needs(x);
  Var y = emit(std::move(out), rg, "softmax_rows", nullptr);
  if (rg) {
    node(y).back = [y, x, rows, cols](Tape& tp) {
      const S* g = tp.node(y).grad.data.data();
      const S* o = tp.val(y).data.data();
      S* gx = tp.gptr(x);
      for (int t = 0; t < rows; ++t) {
        const S* grow = g + static_cast<std::size_t>(t) * cols;
        const S* orow = o + static_cast<std::size_t>(t) * cols;
        S dot = S(0);
        for (int j = 0; j < cols; ++j) dot += grow[j] * orow[j];
        S* gxrow = gx + static_cast<std::size_t>(t) * cols;
        for (int j = 0; j < cols; ++j)
          gxrow[j] += (grow[j] - dot) * orow[j];
      }
    };
  }
  return y;
}

// ---------------------------------------------------------------------------
// shape plumbing

template <typename S>
Var Tape<S>::concat_last(const std::vector<Var>& xs) {
  require(!xs.empty(), "concat_last: no inputs");
  const Tensor<S>& first = val(xs[0]);
  int rank = first.rank();
  require(rank >= 1, "concat_last: rank");
  std::vector<int> lead(first.shape.begin(), first.shape.end() - 1);
  int total = 0;
  bool rg = false;
  for (Var v : xs) {
    const Tensor<S>& tv = val(v);
    require(tv.rank() == rank, "concat_last: rank mismatch");
    require(std::equal(lead.begin(), lead.end(), tv.shape.begin()),
            "concat_last: leading shape mismatch");
    total += tv.dim(rank - 1);
    rg = rg || needs(v);
  }
  std::vector<int> oshape = lead;
  oshape.push_back(total);
  Tensor<S> out(oshape);
  std::int64_t lead_n = 1;
  for (int d : lead) lead_n *= d;
  int off = 0;
  for (Var v : xs) {
    const Tensor<S>& tv = val(v);
    int width = tv.dim(rank - 1);
    for (std::int64_t r = 0; r < lead_n; ++r)
      for (int j = 0; j < width; ++j)
        out.data[static_cast<std::size_t>(r * total + off + j)] =
            tv.data[static_cast<std::size_t>(r * width + j)];
    off += width;
  }
  Var y = emit(std::move(out), rg, "concat_last", nullptr);
  if (rg) {
    node(y).back = [y, xs, lead_n, total](Tape& tp) {
      const S* g = tp.node(y).grad.data.data();
      int off = 0;
      for (Var v : xs) {
        const Tensor<S>& tv = tp.val(v);
        int width = tv.dim(tv.rank() - 1);
        if (tp.needs(v)) {
          S* gv = tp.gptr(v);
          for (std::int64_t r = 0; r < lead_n; ++r)
            for (int j = 0; j < width; ++j)
              gv[static_cast<std::size_t>(r * width + j)] +=
                  g[static_cast<std::size_t>(r * total + off + j)];
        }
        off += width;
      }
    };
  }
  return y;
}

template <typename S>
Var Tape<S>::slice_last(Var x, int c0, int c1) {
  const Tensor<S>& xv = val(x);
  int rank = xv.rank();
  require(rank >= 1, "slice_last: rank");
  int width = xv.dim(rank - 1);
  require(0 <= c0 && c0 < c1 && c1 <= width, "slice_last: bad range");
  std::vector<int> oshape = xv.shape;
  oshape[static_cast<std::size_t>(rank - 1)] = c1 - c0;
  std::int64_t lead_n = xv.numel() / width;
  Tensor<S> out(oshape);
  int w_out = c1 - c0;
  for (std::int64_t r = 0; r < lead_n; ++r)
    for (int j = 0; j < w_out; ++j)
      out.data[static_cast<std::size_t>(r * w_out + j)] =
          xv.data[static_cast<std::size_t>(r * width + c0 + j)];
  bool rg = needs(x);
  Var y = emit(std::move(out), rg, "slice_last", nullptr);
  if (rg) {
    node(y).back = [y, x, c0, width, w_out, lead_n](Tape& tp) {
      const S* g = tp.node(y).grad.data.data();
      S* gx = tp.gptr(x);
      for (std::int64_t r = 0; r < lead_n; ++r)
        for (int j = 0; j < w_out; ++j)
          gx[static_cast<std::size_t>(r * width + c0 + j)] +=
              g[static_cast<std::size_t>(r * w_out + j)];
    };
  }
  return y;
}

template <typename S>
Var Tape<S>::channel(Var x, int c) {
  const Tensor<S>& xv = val(x);
  require(xv.rank() == 3, "channel: input must be (T,F,C)");
  require(0 <= c && c < xv.dim(2), "channel: index out of range");
  int t_len = xv.dim(0), f_len = xv.dim(1), ch = xv.dim(2);
  Tensor<S> out({t_len, f_len});
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(t_len) * f_len; ++i)
    out.data[static_cast<std::size_t>(i)] =
        xv.data[static_cast<std::size_t>(i * ch + c)];
  bool rg = needs(x);
  Var y = emit(std::move(out), rg, "channel", nullptr);
  if (rg) {
    node(y).back = [y, x, c, t_len, f_len, ch](Tape& tp) {
      const S* g = tp.node(y).grad.data.data();
      S* gx = tp.gptr(x);
      for (std::int64_t i = 0; i < static_cast<std::int64_t>(t_len) * f_len; ++i)
        gx[static_cast<std::size_t>(i * ch + c)] +=
            g[static_cast<std::size_t>(i)];
    };
  }
  return y;
}

template <typename S>
Var Tape<S>::broadcast_channels(Var x, int c) {
  const Tensor<S>& xv = val(x);
  require(xv.rank() == 2, "broadcast_channels: input must be (T,F)");
  require(c >= 1, "broadcast_channels: channel count must be positive");
  int t_len = xv.dim(0), f_len = xv.dim(1);
  Tensor<S> out({t_len, f_len, c});
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(t_len) * f_len; ++i)
    for (int j = 0; j < c; ++j)
      out.data[static_cast<std::size_t>(i * c + j)] =
          xv.data[static_cast<std::size_t>(i)];
  bool rg = needs(x);
  Var y = emit(std::move(out), rg, "broadcast_channels", nullptr);
  if (rg) {
    node(y).back = [y, x, c, t_len, f_len](Tape& tp) {
      const S* g = tp.node(y).grad.data.data();
      S* gx = tp.gptr(x);
      for (std::int64_t i = 0; i < static_cast<std::int64_t>(t_len) * f_len; ++i) {
        S acc = S(0);
        for (int j = 0; j < c; ++j)
          acc += g[static_cast<std::size_t>(i * c + j)];
        gx[static_cast<std::size_t>(i)] += acc;
      }
    };
  }
  return y;
}

template <typename S>
Var Tape<S>::tile_freq(Var x, int f) {
  const Tensor<S>& xv = val(x);
  require(xv.rank() == 2, "tile_freq: input must be (T,C)");
  require(f >= 1, "tile_freq: frequency count must be positive");
  int t_len = xv.dim(0), ch = xv.dim(1);
  Tensor<S> out({t_len, f, ch});
  for (int t = 0; t < t_len; ++t)
    for (int fi = 0; fi < f; ++fi)
      for (int c = 0; c < ch; ++c)
        out.at(t, fi, c) = xv.at(t, c);
  bool rg = needs(x);
  Var y = emit(std::move(out), rg, "tile_freq", nullptr);
  if (rg) {
    node(y).back = [y, x, f, t_len, ch](Tape& tp) {
      const S* g = tp.node(y).grad.data.data();
      S* gx = tp.gptr(x);
      for (int t = 0; t < t_len; ++t)
        for (int fi = 0; fi < f; ++fi)
          for (int c = 0; c < ch; ++c)
            gx[static_cast<std::size_t>(t) * ch + c] +=
                g[(static_cast<std::size_t>(t) * f + fi) * ch + c];
    };
  }
  return y;
}

template <typename S>
Var Tape<S>::row(Var x, int t) {
  const Tensor<S>& xv = val(x);
  require(xv.rank() == 2, "row: input must be (T,D)");
  require(0 <= t && t < xv.dim(0), "row: index out of range");
  int d = xv.dim(1);
  Tensor<S> out({d});
  for (int j = 0; j < d; ++j) out.data[static_cast<std::size_t>(j)] = xv.at(t, j);
  bool rg = needs(x);
  Var y = emit(std::move(out), rg, "row", nullptr);
  if (rg) {
    node(y).back = [y, x, t, d](Tape& tp) {
      const S* g = tp.node(y).grad.data.data();
      S* gx = tp.gptr(x);
      for (int j = 0; j < d; ++j)
        gx[static_cast<std::size_t>(t) * d + j] += g[j];
    };
  }
  return y;
}

template <typename S>
Var Tape<S>::stack_rows(const std::vector<Var>& rows) {
  require(!rows.empty(), "stack_rows: no inputs");
  int d = val(rows[0]).dim(0);
  bool rg = false;
  for (Var v : rows) {
    require(val(v).rank() == 1 && val(v).dim(0) == d,
            "stack_rows: rows must be rank-1 of equal length");
    rg = rg || needs(v);
  }
  int t_len = static_cast<int>(rows.size());
  Tensor<S> out({t_len, d});
  for (int t = 0; t < t_len; ++t)
    for (int j = 0; j < d; ++j)
      out.at(t, j) = val(rows[static_cast<std::size_t>(t)]).at(j);
  Var y = emit(std::move(out), rg, "stack_rows", nullptr);
  if (rg) {
    node(y).back = [y, rows, d](Tape& tp) {
      const S* g = tp.node(y).grad.data.data();
      for (std::size_t t = 0; t < rows.size(); ++t) {
        if (!tp.needs(rows[t])) continue;
        S* gv = tp.gptr(rows[t]);
        for (int j = 0; j < d; ++j) gv[j] += g[t * static_cast<std::size_t>(d) + j];
      }
    };
  }
  return y;
}

template <typename S>
Var Tape<S>::unit2(Var x, S eps) {
  const Tensor<S>& xv = val(x);
  require(xv.rank() >= 1 && xv.dim(xv.rank() - 1) == 2,
          "unit2: last dimension must be 2");
  Tensor<S> out = xv;
  std::size_t pairs = out.data.size() / 2;
  for (std::size_t i = 0; i < pairs; ++i) {
    S a = out.data[2 * i], b = out.data[2 * i + 1];
    S r = std::sqrt(a * a + b * b);
    S re = r > eps ? r : eps;
    out.data[2 * i] = a / re;
    out.data[2 * i + 1] = b / re;
  }
  bool rg = needs(x);
  Var y = emit(std::move(out), rg, "unit2", nullptr);
  if (rg) {
    node(y).back = [y, x, eps, pairs](Tape& tp) {
      const S* g = tp.node(y).grad.data.data();
      const S* xd = tp.val(x).data.data();
      S* gx = tp.gptr(x);
      for (std::size_t i = 0; i < pairs; ++i) {
        S a = xd[2 * i], b = xd[2 * i + 1];
        S ga = g[2 * i], gb = g[2 * i + 1];
        S r = std::sqrt(a * a + b * b);
        if (r > eps) {
          S r3 = r * r * r;
          gx[2 * i] += (ga * b * b - gb * a * b) / r3;
          gx[2 * i + 1] += (gb * a * a - ga * a * b) / r3;
        } else {
          gx[2 * i] += ga / eps;
          gx[2 * i + 1] += gb / eps;
        }
      }
    };
  }
  return y;
}

// ---------------------------------------------------------------------------
// losses

template <typename S>
Var Tape<S>::l1_to_const(Var x, Tensor<S> target) {
  const Tensor<S>& xv = val(x);
  require(xv.same_shape(target), "l1_to_const: shape mismatch " +
                                     shape_str(xv.shape) + " vs " +
                                     shape_str(target.shape));
  S acc = S(0);
  for (std::size_t i = 0; i < xv.data.size(); ++i)
    acc += std::abs(xv.data[i] - target.data[i]);
  Tensor<S> out({1});
  out.data[0] = acc;
  bool rg = needs(x);
  Var y = emit(std::move(out), rg, "l1_to_const", nullptr);
  if (rg) {
    node(y).back = [y, x, target = std::move(target)](Tape& tp) {
      S g = tp.node(y).grad.data[0];
      const S* xd = tp.val(x).data.data();
      S* gx = tp.gptr(x);
      for (std::size_t i = 0; i < target.data.size(); ++i) {
        S d = xd[i] - target.data[i];
        if (d > S(0))
          gx[i] += g;
        else if (d < S(0))
          gx[i] -= g;
        // subgradient 0 at exact zeros
      }
    };
  }
  return y;
}

template <typename S>
Var Tape<S>::nll_rows(Var probs, std::vector<int> labels, S floor_val) {
  const Tensor<S>& pv = val(probs);
  require(pv.rank() == 2, "nll_rows: probs must be (T,L)");
  int t_len = pv.dim(0), classes = pv.dim(1);
  require(static_cast<int>(labels.size()) == t_len,
          "nll_rows: label count " + std::to_string(labels.size()) +
              " vs frames " + std::to_string(t_len));
  for (int lbl : labels)
    require(0 <= lbl && lbl < classes,
            "nll_rows: label " + std::to_string(lbl) + " out of range [0," +
                std::to_string(classes) + ")");
  S acc = S(0);
  for (int t = 0; t < t_len; ++t) {
    S p = pv.at(t, labels[static_cast<std::size_t>(t)]);
    acc -= std::log(p < floor_val ? floor_val : p);
  }
  Tensor<S> out({1});
  out.data[0] = acc;
  bool rg = needs(probs);
  Var y = emit(std::move(out), rg, "nll_rows", nullptr);
  if (rg) {
    node(y).back = [y, probs, labels = std::move(labels), floor_val,
                    classes](Tape& tp) {
      S g = tp.node(y).grad.data[0];
      const S* pd = tp.val(probs).data.data();
      S* gp = tp.gptr(probs);
      for (std::size_t t = 0; t < labels.size(); ++t) {
        std::size_t idx = t * static_cast<std::size_t>(classes) +
                          static_cast<std::size_t>(labels[t]);
        if (pd[idx] > floor_val) gp[idx] -= g / pd[idx];
      }
    };
  }
  return y;
}

// ---------------------------------------------------------------------------
// dsp bridges

template <typename S>
Var Tape<S>::frame_window(Var x, const dsp::FramePlan& plan) {
  const Tensor<S>& xv = val(x);
  require(xv.rank() == 1, "frame_window: input must be rank-1");
  require(xv.dim(0) == plan.n_samples,
          "frame_window: signal length " + std::to_string(xv.dim(0)) +
              " vs plan " + std::to_string(plan.n_samples));
  Tensor<S> out({plan.frames, plan.win});
  const S* xd = xv.data.data();
  for (int t = 0; t < plan.frames; ++t)
    for (int i = 0; i < plan.win; ++i) {
      std::size_t k = static_cast<std::size_t>(t) * plan.win + i;
      out.data[k] = static_cast<S>(plan.window[static_cast<std::size_t>(i)]) *
                    xd[static_cast<std::size_t>(plan.src[k])];
    }
  bool rg = needs(x);
  Var y = emit(std::move(out), rg, "frame_window", nullptr);
  if (rg) {
    // plans outlive tapes (owned by the caller); capture cheap copies
    std::vector<int> src = plan.src;
    std::vector<double> win = plan.window;
    int frames = plan.frames, w = plan.win;
    node(y).back = [y, x, src = std::move(src), win = std::move(win), frames,
                    w](Tape& tp) {
      const S* g = tp.node(y).grad.data.data();
      S* gx = tp.gptr(x);
      for (int t = 0; t < frames; ++t)
        for (int i = 0; i < w; ++i) {
          std::size_t k = static_cast<std::size_t>(t) * w + i;
          gx[static_cast<std::size_t>(src[k])] +=
              static_cast<S>(win[static_cast<std::size_t>(i)]) * g[k];
        }
    };
  }
  return y;
}

template <typename S>
Var Tape<S>::rdft(Var x, int nfft) {
  const Tensor<S>& xv = val(x);
  require(xv.rank() == 2, "rdft: input must be (T,win)");
  int t_len = xv.dim(0), win = xv.dim(1);
  require(win <= nfft, "rdft: window exceeds fft size");
  int bins = nfft / 2 + 1;
  dsp::Fft<S> fft(nfft);
  Tensor<S> out({t_len, bins, 2});
  std::vector<std::complex<S>> spec(static_cast<std::size_t>(bins));
  for (int t = 0; t < t_len; ++t) {
    fft.rfft(&xv.data[static_cast<std::size_t>(t) * win], win, spec.data());
    for (int k = 0; k < bins; ++k) {
      out.at(t, k, 0) = spec[static_cast<std::size_t>(k)].real();
      out.at(t, k, 1) = spec[static_cast<std::size_t>(k)].imag();
    }
  }
  bool rg = needs(x);
  Var y = emit(std::move(out), rg, "rdft", nullptr);
  if (rg) {
    node(y).back = [y, x, nfft, t_len, win, bins](Tape& tp) {
      dsp::Fft<S> fft(nfft);
      const Tensor<S>& g = tp.node(y).grad;
      S* gx = tp.gptr(x);
      std::vector<std::complex<S>> buf(static_cast<std::size_t>(nfft));
      for (int t = 0; t < t_len; ++t) {
        std::fill(buf.begin(), buf.end(), std::complex<S>(0, 0));
        for (int k = 0; k < bins; ++k)
          buf[static_cast<std::size_t>(k)] =
              std::complex<S>(g.at(t, k, 0), g.at(t, k, 1));
        fft.inverse(buf.data());
        // adjoint: dx_n = Re(sum_k z_k e^{+i 2pi k n / N}) = N * Re(ifft(z))
        for (int i = 0; i < win; ++i)
          gx[static_cast<std::size_t>(t) * win + i] +=
              static_cast<S>(nfft) * buf[static_cast<std::size_t>(i)].real();
      }
    };
  }
  return y;
}

template <typename S>
Var Tape<S>::spec_to_wave(Var x, const dsp::OlaPlan& plan) {
  const Tensor<S>& xv = val(x);
  int bins = plan.nfft / 2 + 1;
  require(xv.rank() == 3 && xv.dim(2) == 2, "spec_to_wave: input must be (T,F,2)");
  require(xv.dim(0) == plan.frames && xv.dim(1) == bins,
          "spec_to_wave: spectrogram " + shape_str(xv.shape) +
              " inconsistent with plan (" + std::to_string(plan.frames) + "," +
              std::to_string(bins) + ",2)");
  dsp::Fft<S> fft(plan.nfft);
  std::vector<S> acc(plan.norm.size(), S(0));
  std::vector<std::complex<S>> spec(static_cast<std::size_t>(bins));
  std::vector<S> time(static_cast<std::size_t>(plan.nfft));
  for (int t = 0; t < plan.frames; ++t) {
    for (int k = 0; k < bins; ++k)
      spec[static_cast<std::size_t>(k)] =
          std::complex<S>(xv.at(t, k, 0), xv.at(t, k, 1));
    fft.irfft(spec.data(), time.data());
    for (int i = 0; i < plan.win; ++i) {
      std::size_t p = static_cast<std::size_t>(t) * plan.hop + i;
      if (p < acc.size())
        acc[p] += static_cast<S>(plan.window[static_cast<std::size_t>(i)]) *
                  time[static_cast<std::size_t>(i)];
    }
  }
  Tensor<S> out({plan.n_samples});
  for (int i = 0; i < plan.n_samples; ++i) {
    std::size_t p = static_cast<std::size_t>(i + plan.pad);
    out.data[static_cast<std::size_t>(i)] =
        acc[p] / static_cast<S>(plan.norm[p]);
  }
  bool rg = needs(x);
  Var y = emit(std::move(out), rg, "spec_to_wave", nullptr);
  if (rg) {
    std::vector<double> win_copy = plan.window;
    std::vector<double> norm_copy = plan.norm;
    int frames = plan.frames, w = plan.win, hop = plan.hop, pad = plan.pad;
    int n = plan.n_samples, nfft = plan.nfft;
    node(y).back = [y, x, win_copy = std::move(win_copy),
                    norm_copy = std::move(norm_copy), frames, w, hop, pad, n,
                    nfft, bins](Tape& tp) {
      dsp::Fft<S> fft(nfft);
      const S* g = tp.node(y).grad.data.data();
      S* gx = tp.gptr(x);
      std::vector<S> gp(norm_copy.size(), S(0));
      for (int i = 0; i < n; ++i) {
        std::size_t p = static_cast<std::size_t>(i + pad);
        gp[p] = g[static_cast<std::size_t>(i)] / static_cast<S>(norm_copy[p]);
      }
      std::vector<S> v(static_cast<std::size_t>(nfft), S(0));
      std::vector<std::complex<S>> rf(static_cast<std::size_t>(bins));
      for (int t = 0; t < frames; ++t) {
        std::fill(v.begin(), v.end(), S(0));
        for (int i = 0; i < w; ++i) {
          std::size_t p = static_cast<std::size_t>(t) * hop + i;
          if (p < gp.size())
            v[static_cast<std::size_t>(i)] =
                static_cast<S>(win_copy[static_cast<std::size_t>(i)]) * gp[p];
        }
        fft.rfft(v.data(), nfft, rf.data());
        // adjoint of the Hermitian-completed inverse transform: interior
        // bins count twice, DC and Nyquist once, all scaled by 1/N
        for (int k = 0; k < bins; ++k) {
          S c = (k == 0 || k == bins - 1) ? S(1) / static_cast<S>(nfft)
                                          : S(2) / static_cast<S>(nfft);
          gx[(static_cast<std::size_t>(t) * bins + k) * 2 + 0] +=
              c * rf[static_cast<std::size_t>(k)].real();
          gx[(static_cast<std::size_t>(t) * bins + k) * 2 + 1] +=
              c * rf[static_cast<std::size_t>(k)].imag();
        }
      }
    };
  }
  return y;
}

template class Tape<float>;
template class Tape<double>;

}  // namespace pbdr::nn
