// Copyright 2026 The pbdrnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "pbdr/util/error.hpp"

namespace pbdr::nn {

// Dense row-major tensor. Rank is small (<= 3 in practice); shape is kept
// as a plain vector so ops can be written against whatever rank they need.
template <typename S>
struct Tensor {
  std::vector<int> shape;
  std::vector<S> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> shp) : shape(std::move(shp)) {
    data.assign(static_cast<std::size_t>(numel_of(shape)), S(0));
  }
  Tensor(std::vector<int> shp, std::vector<S> values)
      : shape(std::move(shp)), data(std::move(values)) {
    if (static_cast<std::int64_t>(data.size()) != numel_of(shape))
      throw InvalidInput("tensor: value count does not match shape");
  }

  static std::int64_t numel_of(const std::vector<int>& shp) {
    std::int64_t n = 1;
    for (int d : shp) {
      if (d < 0) throw InvalidInput("tensor: negative dimension");
      n *= d;
    }
    return n;
  }

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

  S& at(int i) { return data[static_cast<std::size_t>(i)]; }
  S at(int i) const { return data[static_cast<std::size_t>(i)]; }
  S& at(int i, int j) { return data[static_cast<std::size_t>(i) * shape[1] + j]; }
  S at(int i, int j) const { return data[static_cast<std::size_t>(i) * shape[1] + j]; }
  S& at(int i, int j, int k) {
    return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
  }
  S at(int i, int j, int k) const {
    return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (S v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  template <typename T>
  Tensor<T> cast() const {
    Tensor<T> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
      out.data[i] = static_cast<T>(data[i]);
    return out;
  }
};

inline std::string shape_str(const std::vector<int>& s) {
  std::string r = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) r += ",";
    r += std::to_string(s[i]);
  }
  return r + ")";
}

}  // namespace pbdr::nn
