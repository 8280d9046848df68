// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace dynavsr::ad {

struct Shape {
  std::vector<int> d;

  Shape() = default;
  Shape(std::initializer_list<int> dims) : d(dims) {}
  explicit Shape(std::vector<int> dims) : d(std::move(dims)) {}

  int rank() const { return static_cast<int>(d.size()); }
  int operator[](int i) const { return d[i]; }

  long numel() const {
    long n = 1;
    for (int x : d) n *= x;
    return n;
  }

  bool operator==(const Shape& o) const { return d == o.d; }
  bool operator!=(const Shape& o) const { return !(*this == o); }

  std::string str() const {
    std::string s = "(";
    for (size_t i = 0; i < d.size(); ++i) s += (i ? "," : "") + std::to_string(d[i]);
    return s + ")";
  }
};

// Dense value with row-major logical layout: the last dimension is
// contiguous. Rank 4 tensors are ordered (channel, time, height, width).
template <typename S>
struct Tensor {
  Shape shape;
  Eigen::Array<S, Eigen::Dynamic, 1> data;

  Tensor() = default;
  explicit Tensor(Shape sh) : shape(std::move(sh)) { data.setZero(shape.numel()); }

  static Tensor zeros(Shape sh) { return Tensor(std::move(sh)); }

  static Tensor full(Shape sh, S v) {
    Tensor t(std::move(sh));
    t.data.setConstant(v);
    return t;
  }

  static Tensor scalar(S v) { return full(Shape{1}, v); }

  long numel() const { return data.size(); }
  S* ptr() { return data.data(); }
  const S* ptr() const { return data.data(); }

  S scalar_value() const {
    if (numel() != 1) throw std::logic_error("scalar_value on tensor of shape " + shape.str());
    return data[0];
  }
};

inline long index4(const Shape& s, int c, int t, int i, int j) {
  return ((static_cast<long>(c) * s[1] + t) * s[2] + i) * s[3] + j;
}

}  // namespace dynavsr::ad
