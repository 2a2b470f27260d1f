// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trajattn/errors.hpp"

namespace trajattn {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {
    if (rows == 0 || cols == 0) {
      throw ShapeError("matrix dimensions must be positive");
    }
  }

  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (rows == 0 || cols == 0) {
      throw ShapeError("matrix dimensions must be positive");
    }
    if (values_.size() != rows * cols) {
      throw ShapeError("matrix value count does not match rows*cols");
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

  void fill(double v) { std::fill(values_.begin(), values_.end(), v); }

  bool same_shape(const Matrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

struct Parameter {
  Matrix value;
  Matrix grad;
};

// Named trainable arrays with paired gradient buffers. Iteration is in
// lexicographic name order, which fixes the serialization and update order.
class ParameterStore {
 public:
  using Map = std::map<std::string, Parameter, std::less<>>;

  Parameter& add(const std::string& name, std::size_t rows, std::size_t cols) {
    if (entries_.contains(name)) {
      throw ArgumentError("duplicate parameter name: " + name);
    }
    auto [it, _] = entries_.emplace(name, Parameter{Matrix(rows, cols), Matrix(rows, cols)});
    return it->second;
  }

  Parameter& at(std::string_view name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ArgumentError("unknown parameter: " + std::string(name));
    return it->second;
  }

  const Parameter& at(std::string_view name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ArgumentError("unknown parameter: " + std::string(name));
    return it->second;
  }

  bool contains(std::string_view name) const { return entries_.find(name) != entries_.end(); }

  void zero_grad() {
    for (auto& [_, p] : entries_) p.grad.fill(0.0);
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [_, p] : entries_) n += p.value.size();
    return n;
  }

  double grad_norm() const {
    double sq = 0.0;
    for (const auto& [_, p] : entries_) {
      for (double g : p.grad.values()) sq += g * g;
    }
    return std::sqrt(sq);
  }

  std::size_t size() const noexcept { return entries_.size(); }
  Map::iterator begin() { return entries_.begin(); }
  Map::iterator end() { return entries_.end(); }
  Map::const_iterator begin() const { return entries_.begin(); }
  Map::const_iterator end() const { return entries_.end(); }

  // Compares values only.
  bool same_values(const ParameterStore& other) const {
    if (entries_.size() != other.entries_.size()) return false;
    auto a = entries_.begin();
    auto b = other.entries_.begin();
    for (; a != entries_.end(); ++a, ++b) {
      if (a->first != b->first || !(a->second.value == b->second.value)) return false;
    }
    return true;
  }

 private:
  Map entries_;
};

struct LstmState {
  Vector hidden;
  Vector cell;

  static LstmState zeros(std::size_t n) { return {Vector(n, 0.0), Vector(n, 0.0)}; }
};

namespace kernels {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// out = W x (+ out when accumulate)
inline void matvec(const Matrix& w, std::span<const double> x, std::span<double> out) {
  const std::size_t cols = w.cols();
  const double* wp = w.values().data();
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double* row = wp + r * cols;
    // Four partial sums shorten the dependency chain.
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) {
      s0 += row[c] * x[c];
      s1 += row[c + 1] * x[c + 1];
      s2 += row[c + 2] * x[c + 2];
      s3 += row[c + 3] * x[c + 3];
    }
    for (; c < cols; ++c) s0 += row[c] * x[c];
    out[r] = (s0 + s1) + (s2 + s3);
  }
}

// gx += W^T gy
inline void matvec_transposed_acc(const Matrix& w, std::span<const double> gy, std::span<double> gx) {
  const std::size_t cols = w.cols();
  const double* wp = w.values().data();
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double g = gy[r];
    if (g == 0.0) continue;
    const double* row = wp + r * cols;
    for (std::size_t c = 0; c < cols; ++c) gx[c] += row[c] * g;
  }
}

// G += gy x^T
inline void outer_acc(std::span<const double> gy, std::span<const double> x, Matrix& g) {
  const std::size_t cols = g.cols();
  double* gp = g.values().data();
  for (std::size_t r = 0; r < g.rows(); ++r) {
    const double gr = gy[r];
    if (gr == 0.0) continue;
    double* row = gp + r * cols;
    for (std::size_t c = 0; c < cols; ++c) row[c] += gr * x[c];
  }
}

inline void check_affine_shapes(const Matrix& w, std::size_t bias_len, std::size_t x_len) {
  if (w.cols() != x_len) {
    throw ShapeError("affine: weight has " + std::to_string(w.cols()) + " columns but input has " +
                     std::to_string(x_len) + " entries");
  }
  if (bias_len != w.rows()) {
    throw ShapeError("affine: bias length " + std::to_string(bias_len) + " != weight rows " +
                     std::to_string(w.rows()));
  }
}

// W x + b, with b stored as a rows x 1 matrix.
inline Vector affine(const Matrix& w, const Matrix& b, std::span<const double> x) {
  check_affine_shapes(w, b.size(), x.size());
  Vector out(w.rows());
  matvec(w, x, out);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.values()[i];
  return out;
}

inline Vector softmax(std::span<const double> e) {
  if (e.empty()) throw ArgumentError("softmax of an empty vector");
  const double mx = *std::max_element(e.begin(), e.end());
  Vector out(e.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    out[i] = std::exp(e[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

// Gate rows of the concatenated LSTM weight are laid out as
// [input; forget; candidate; output], each hidden_size rows, and the weight
// acts on [x; h_prev].
struct LstmCache {
  Vector input;  // [x; h_prev]
  Vector i, f, g, o, tanh_c;
};

inline LstmState lstm_forward(const Matrix& w, const Matrix& b, std::span<const double> x,
                              const LstmState& prev, LstmCache* cache = nullptr) {
  const std::size_t n = prev.hidden.size();
  if (prev.cell.size() != n) throw ShapeError("lstm: hidden and cell lengths differ");
  if (w.rows() != 4 * n) throw ShapeError("lstm: weight rows must be 4 * hidden_size");
  Vector input(x.size() + n);
  std::copy(x.begin(), x.end(), input.begin());
  std::copy(prev.hidden.begin(), prev.hidden.end(), input.begin() + static_cast<std::ptrdiff_t>(x.size()));
  Vector z = affine(w, b, input);

  LstmState next{Vector(n), Vector(n)};
  LstmCache local;
  LstmCache& c = cache ? *cache : local;
  c.i.resize(n);
  c.f.resize(n);
  c.g.resize(n);
  c.o.resize(n);
  c.tanh_c.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    c.i[k] = sigmoid(z[k]);
    c.f[k] = sigmoid(z[n + k]);
    c.g[k] = std::tanh(z[2 * n + k]);
    c.o[k] = sigmoid(z[3 * n + k]);
    next.cell[k] = c.f[k] * prev.cell[k] + c.i[k] * c.g[k];
    c.tanh_c[k] = std::tanh(next.cell[k]);
    next.hidden[k] = c.o[k] * c.tanh_c[k];
  }
  c.input = std::move(input);
  return next;
}

}  // namespace kernels

// y = W x + b. Params are the weight and a rows x 1 bias.
inline Vector affine(const Parameter& weight, const Parameter& bias, std::span<const double> x) {
  return kernels::affine(weight.value, bias.value, x);
}

inline Vector softmax(std::span<const double> e) { return kernels::softmax(e); }

inline LstmState lstm_step(const Parameter& weight, const Parameter& bias, std::span<const double> x,
                           const LstmState& prev) {
  return kernels::lstm_forward(weight.value, bias.value, x, prev);
}

}  // namespace trajattn
