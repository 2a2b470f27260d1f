// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "trajattn/errors.hpp"
#include "trajattn/numerics/linalg.hpp"

namespace trajattn {

// Handle to a value recorded on a Tape.
struct Var {
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  std::size_t id = npos;
  bool valid() const noexcept { return id != npos; }
};

// A parameter as seen by the tape: its value and, when gradients are wanted,
// the buffer that backward() accumulates into.
struct ParamRef {
  const Matrix* value = nullptr;
  Matrix* grad = nullptr;

  static ParamRef of(Parameter& p) { return {&p.value, &p.grad}; }
  static ParamRef of(const Parameter& p) { return {&p.value, nullptr}; }
};

// Records a fixed-shape forward computation so it can be replayed in reverse.
// A tape built with recording disabled only evaluates values; that is the
// inference path and it never touches parameter gradients.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  explicit Tape(bool recording = true) : recording_(recording) {}

  bool recording() const noexcept { return recording_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  Var constant(Vector v) { return push(std::move(v), nullptr); }

  const Vector& value(Var v) const {
    check(v);
    return nodes_[v.id].value;
  }

  // Valid after backward().
  const Vector& grad(Var v) const {
    check(v);
    return nodes_[v.id].grad;
  }

  Var push(Vector value, BackwardFn fn) {
    nodes_.push_back(Node{std::move(value), {}});
    const std::size_t id = nodes_.size() - 1;
    if (recording_ && fn) ops_.emplace_back(id, std::move(fn));
    return Var{id};
  }

  Vector& grad_mut(std::size_t id) { return nodes_[id].grad; }
  const Vector& value_at(std::size_t id) const { return nodes_[id].value; }

  void clear() {
    nodes_.clear();
    ops_.clear();
  }

  friend void backward(Tape& tape, Var loss, double seed);

 private:
  struct Node {
    Vector value;
    Vector grad;
  };

  void check(Var v) const {
    if (!v.valid() || v.id >= nodes_.size()) throw StateError("variable does not belong to this tape");
  }

  bool recording_;
  std::vector<Node> nodes_;
  std::vector<std::pair<std::size_t, BackwardFn>> ops_;
};

// Reverse accumulation from a scalar node. Node gradients are reset on every
// call; parameter gradients accumulate, so zero them first unless summing
// over several tapes is intended.
inline void backward(Tape& tape, Var loss, double seed = 1.0) {
  if (!tape.recording_) throw StateError("backward on a tape that was not recording");
  if (tape.nodes_.empty()) throw StateError("backward called before any forward computation");
  tape.check(loss);
  if (tape.nodes_[loss.id].value.size() != 1) throw ShapeError("backward needs a scalar loss node");
  for (auto& n : tape.nodes_) n.grad.assign(n.value.size(), 0.0);
  tape.nodes_[loss.id].grad[0] = seed;
  for (auto it = tape.ops_.rbegin(); it != tape.ops_.rend(); ++it) {
    if (it->first > loss.id) continue;
    it->second(tape, it->first);
  }
}

namespace ops {

namespace detail {
inline void require_grad(const Tape& tape, const ParamRef& p) {
  if (tape.recording() && p.grad == nullptr) {
    throw StateError("recording tape needs writable parameter gradients");
  }
}
}  // namespace detail

// W x + b
inline Var affine(Tape& tape, ParamRef w, ParamRef b, Var x) {
  detail::require_grad(tape, w);
  detail::require_grad(tape, b);
  Vector y = kernels::affine(*w.value, *b.value, tape.value(x));
  return tape.push(std::move(y), [w, b, x](Tape& t, std::size_t self) {
    const Vector& gy = t.grad_mut(self);
    kernels::outer_acc(gy, t.value_at(x.id), *w.grad);
    auto bg = b.grad->values();
    for (std::size_t i = 0; i < gy.size(); ++i) bg[i] += gy[i];
    kernels::matvec_transposed_acc(*w.value, gy, t.grad_mut(x.id));
  });
}

// W x without bias.
inline Var linear(Tape& tape, ParamRef w, Var x) {
  detail::require_grad(tape, w);
  const Vector& xv = tape.value(x);
  if (w.value->cols() != xv.size()) throw ShapeError("linear: weight columns do not match input length");
  Vector y(w.value->rows());
  kernels::matvec(*w.value, xv, y);
  return tape.push(std::move(y), [w, x](Tape& t, std::size_t self) {
    const Vector& gy = t.grad_mut(self);
    kernels::outer_acc(gy, t.value_at(x.id), *w.grad);
    kernels::matvec_transposed_acc(*w.value, gy, t.grad_mut(x.id));
  });
}

inline Var tanh(Tape& tape, Var x) {
  Vector y = tape.value(x);
  for (double& v : y) v = std::tanh(v);
  return tape.push(std::move(y), [x](Tape& t, std::size_t self) {
    const Vector& gy = t.grad_mut(self);
    const Vector& yv = t.value_at(self);
    Vector& gx = t.grad_mut(x.id);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * (1.0 - yv[i] * yv[i]);
  });
}

inline Var add(Tape& tape, Var a, Var b) {
  const Vector& av = tape.value(a);
  const Vector& bv = tape.value(b);
  if (av.size() != bv.size()) throw ShapeError("add: length mismatch");
  Vector y(av.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] + bv[i];
  return tape.push(std::move(y), [a, b](Tape& t, std::size_t self) {
    const Vector& gy = t.grad_mut(self);
    for (std::size_t i = 0; i < gy.size(); ++i) {
      t.grad_mut(a.id)[i] += gy[i];
      t.grad_mut(b.id)[i] += gy[i];
    }
  });
}

inline Var sub(Tape& tape, Var a, Var b) {
  const Vector& av = tape.value(a);
  const Vector& bv = tape.value(b);
  if (av.size() != bv.size()) throw ShapeError("sub: length mismatch");
  Vector y(av.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] - bv[i];
  return tape.push(std::move(y), [a, b](Tape& t, std::size_t self) {
    const Vector& gy = t.grad_mut(self);
    for (std::size_t i = 0; i < gy.size(); ++i) {
      t.grad_mut(a.id)[i] += gy[i];
      t.grad_mut(b.id)[i] -= gy[i];
    }
  });
}

// s * x + offset, with constant s and offset.
inline Var scale(Tape& tape, Var x, double s, double offset = 0.0) {
  Vector y = tape.value(x);
  for (double& v : y) v = s * v + offset;
  return tape.push(std::move(y), [x, s](Tape& t, std::size_t self) {
    const Vector& gy = t.grad_mut(self);
    Vector& gx = t.grad_mut(x.id);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += s * gy[i];
  });
}

inline Var concat(Tape& tape, std::span<const Var> parts) {
  Vector y;
  for (Var p : parts) {
    const Vector& v = tape.value(p);
    y.insert(y.end(), v.begin(), v.end());
  }
  std::vector<Var> ids(parts.begin(), parts.end());
  return tape.push(std::move(y), [ids = std::move(ids)](Tape& t, std::size_t self) {
    const Vector& gy = t.grad_mut(self);
    std::size_t off = 0;
    for (Var p : ids) {
      Vector& gp = t.grad_mut(p.id);
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += gy[off + i];
      off += gp.size();
    }
  });
}

inline Var concat(Tape& tape, Var a, Var b) {
  const Var parts[] = {a, b};
  return concat(tape, parts);
}

inline Var softmax(Tape& tape, Var e) {
  Vector y = kernels::softmax(tape.value(e));
  return tape.push(std::move(y), [e](Tape& t, std::size_t self) {
    const Vector& gy = t.grad_mut(self);
    const Vector& yv = t.value_at(self);
    const double inner = kernels::dot(gy, yv);
    Vector& ge = t.grad_mut(e.id);
    for (std::size_t i = 0; i < gy.size(); ++i) ge[i] += yv[i] * (gy[i] - inner);
  });
}

struct LstmVars {
  Var hidden;
  Var cell;
};

// One LSTM cell step; see kernels::lstm_forward for the gate layout.
inline LstmVars lstm_step(Tape& tape, ParamRef w, ParamRef b, Var x, LstmVars prev) {
  detail::require_grad(tape, w);
  detail::require_grad(tape, b);
  const Vector& xv = tape.value(x);
  LstmState prev_state{tape.value(prev.hidden), tape.value(prev.cell)};
  if (w.value->cols() != xv.size() + prev_state.hidden.size()) {
    throw ShapeError("lstm_step: weight columns must equal input + hidden size");
  }
  auto cache = std::make_shared<kernels::LstmCache>();
  LstmState next = kernels::lstm_forward(*w.value, *b.value, xv, prev_state, tape.recording() ? cache.get() : nullptr);

  // The cell node carries the backward for the whole step; the hidden node
  // routes its gradient into the cell node's backward through the cache.
  const std::size_t n = next.hidden.size();
  Var cell = tape.push(std::move(next.cell), nullptr);
  Var hidden = tape.push(std::move(next.hidden), nullptr);
  if (!tape.recording()) return {hidden, cell};

  // Registered after both outputs exist so that in reverse order it runs
  // once, after every consumer of hidden and cell has propagated.
  Var marker = tape.push(Vector{}, [w, b, x, prev, cell, hidden, cache, n](Tape& t, std::size_t) {
    const auto& c = *cache;
    const Vector& gh = t.grad_mut(hidden.id);
    const Vector& gc_in = t.grad_mut(cell.id);
    const Vector& c_prev = t.value_at(prev.cell.id);
    Vector gz(4 * n);
    Vector& gc_prev = t.grad_mut(prev.cell.id);
    for (std::size_t k = 0; k < n; ++k) {
      const double go = gh[k] * c.tanh_c[k];
      const double gc = gc_in[k] + gh[k] * c.o[k] * (1.0 - c.tanh_c[k] * c.tanh_c[k]);
      const double gi = gc * c.g[k];
      const double gf = gc * c_prev[k];
      const double gg = gc * c.i[k];
      gc_prev[k] += gc * c.f[k];
      gz[k] = gi * c.i[k] * (1.0 - c.i[k]);
      gz[n + k] = gf * c.f[k] * (1.0 - c.f[k]);
      gz[2 * n + k] = gg * (1.0 - c.g[k] * c.g[k]);
      gz[3 * n + k] = go * c.o[k] * (1.0 - c.o[k]);
    }
    kernels::outer_acc(gz, c.input, *w.grad);
    auto bg = b.grad->values();
    for (std::size_t i = 0; i < gz.size(); ++i) bg[i] += gz[i];
    Vector ginput(c.input.size(), 0.0);
    kernels::matvec_transposed_acc(*w.value, gz, ginput);
    Vector& gx = t.grad_mut(x.id);
    Vector& gh_prev = t.grad_mut(prev.hidden.id);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += ginput[i];
    for (std::size_t k = 0; k < n; ++k) gh_prev[k] += ginput[gx.size() + k];
  });
  (void)marker;
  return {hidden, cell};
}

// Additive alignment scores e_j = v . tanh(query + key_j).
inline Var additive_scores(Tape& tape, Var query, std::span<const Var> keys, ParamRef v) {
  detail::require_grad(tape, v);
  if (keys.empty()) throw ArgumentError("additive_scores: no keys");
  const Vector& q = tape.value(query);
  if (v.value->size() != q.size()) throw ShapeError("additive_scores: scorer vector length mismatch");
  const std::size_t a = q.size();
  Vector e(keys.size());
  auto act = std::make_shared<std::vector<Vector>>(keys.size(), Vector(a));
  const auto vv = v.value->values();
  for (std::size_t j = 0; j < keys.size(); ++j) {
    const Vector& k = tape.value(keys[j]);
    if (k.size() != a) throw ShapeError("additive_scores: key length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a; ++i) {
      const double u = std::tanh(q[i] + k[i]);
      (*act)[j][i] = u;
      s += vv[i] * u;
    }
    e[j] = s;
  }
  std::vector<Var> key_ids(keys.begin(), keys.end());
  return tape.push(std::move(e), [query, key_ids = std::move(key_ids), v, act, a](Tape& t, std::size_t self) {
    const Vector& ge = t.grad_mut(self);
    const auto vv = v.value->values();
    auto vg = v.grad->values();
    Vector& gq = t.grad_mut(query.id);
    for (std::size_t j = 0; j < key_ids.size(); ++j) {
      const double g = ge[j];
      if (g == 0.0) continue;
      Vector& gk = t.grad_mut(key_ids[j].id);
      const Vector& u = (*act)[j];
      for (std::size_t i = 0; i < a; ++i) {
        vg[i] += g * u[i];
        const double du = g * vv[i] * (1.0 - u[i] * u[i]);
        gq[i] += du;
        gk[i] += du;
      }
    }
  });
}

// sum_j weights[j] * values[j], differentiable in both.
inline Var weighted_sum(Tape& tape, Var weights, std::span<const Var> values) {
  const Vector& w = tape.value(weights);
  if (w.size() != values.size()) throw ShapeError("weighted_sum: weight count mismatch");
  if (values.empty()) throw ArgumentError("weighted_sum: no values");
  const std::size_t d = tape.value(values[0]).size();
  Vector y(d, 0.0);
  for (std::size_t j = 0; j < values.size(); ++j) {
    const Vector& h = tape.value(values[j]);
    if (h.size() != d) throw ShapeError("weighted_sum: value length mismatch");
    for (std::size_t i = 0; i < d; ++i) y[i] += w[j] * h[i];
  }
  std::vector<Var> ids(values.begin(), values.end());
  return tape.push(std::move(y), [weights, ids = std::move(ids)](Tape& t, std::size_t self) {
    const Vector& gy = t.grad_mut(self);
    const Vector& w = t.value_at(weights.id);
    Vector& gw = t.grad_mut(weights.id);
    for (std::size_t j = 0; j < ids.size(); ++j) {
      const Vector& h = t.value_at(ids[j].id);
      gw[j] += kernels::dot(gy, h);
      Vector& gh = t.grad_mut(ids[j].id);
      for (std::size_t i = 0; i < gy.size(); ++i) gh[i] += w[j] * gy[i];
    }
  });
}

// sum_j c_j * values[j] with constant coefficients. Zero coefficients are
// skipped, so an empty or all-zero set yields the exact zero vector.
inline Var constant_weighted_sum(Tape& tape, std::span<const double> coeffs, std::span<const Var> values,
                                 std::size_t dim) {
  if (coeffs.size() != values.size()) throw ShapeError("constant_weighted_sum: coefficient count mismatch");
  Vector y(dim, 0.0);
  std::vector<std::pair<Var, double>> used;
  for (std::size_t j = 0; j < values.size(); ++j) {
    if (coeffs[j] == 0.0) continue;
    const Vector& h = tape.value(values[j]);
    if (h.size() != dim) throw ShapeError("constant_weighted_sum: value length mismatch");
    for (std::size_t i = 0; i < dim; ++i) y[i] += coeffs[j] * h[i];
    used.emplace_back(values[j], coeffs[j]);
  }
  return tape.push(std::move(y), [used = std::move(used)](Tape& t, std::size_t self) {
    const Vector& gy = t.grad_mut(self);
    for (const auto& [v, c] : used) {
      Vector& gh = t.grad_mut(v.id);
      for (std::size_t i = 0; i < gy.size(); ++i) gh[i] += c * gy[i];
    }
  });
}

struct SequenceEncoderRefs {
  ParamRef embed_w, embed_b, lstm_w, lstm_b;
};

// Encodes every sequence with a shared tanh embedding and LSTM (zero initial
// state) and returns sum_n sum_t coeffs[n][t] * h_(n,t) as one node. The
// sequences are processed as a batch, with the batch index innermost.
inline Var weighted_encoding(Tape& tape, const SequenceEncoderRefs& p, std::span<const std::vector<Vector>> sequences,
                             std::span<const std::vector<double>> coeffs, std::size_t hidden) {
  detail::require_grad(tape, p.embed_w);
  detail::require_grad(tape, p.embed_b);
  detail::require_grad(tape, p.lstm_w);
  detail::require_grad(tape, p.lstm_b);
  if (sequences.size() != coeffs.size()) throw ShapeError("weighted_encoding: coefficient count mismatch");
  const std::size_t n_seq = sequences.size();
  if (n_seq == 0) return tape.push(Vector(hidden, 0.0), nullptr);
  const Matrix& we = *p.embed_w.value;
  const Matrix& w = *p.lstm_w.value;
  const std::size_t steps = sequences[0].size(), nf = we.cols(), ne = we.rows(), nh = hidden, nk = ne + nh;
  if (w.rows() != 4 * nh || w.cols() != nk) throw ShapeError("weighted_encoding: LSTM weight shape mismatch");
  if (p.embed_b.value->size() != ne || p.lstm_b.value->size() != 4 * nh) {
    throw ShapeError("weighted_encoding: bias length mismatch");
  }
  if (steps == 0) throw ArgumentError("weighted_encoding: empty sequence");
  for (std::size_t n = 0; n < n_seq; ++n) {
    if (sequences[n].size() != steps || coeffs[n].size() != steps) {
      throw ShapeError("weighted_encoding: sequences must share one length");
    }
    for (const auto& f : sequences[n]) {
      if (f.size() != nf) throw ShapeError("weighted_encoding: feature length mismatch");
    }
  }

  // Per-step buffers, laid out [step][row][sequence].
  struct Cache {
    std::size_t n_seq, steps, nf, ne, nh, nk;
    std::vector<double> feat, input, gates, cell, tanh_c, coef;
    double* at(std::vector<double>& v, std::size_t width, std::size_t t) { return v.data() + t * width * n_seq; }
  };
  auto cache = std::make_shared<Cache>();
  Cache& c = *cache;
  c.n_seq = n_seq;
  c.steps = steps;
  c.nf = nf;
  c.ne = ne;
  c.nh = nh;
  c.nk = nk;
  c.feat.assign(steps * nf * n_seq, 0.0);
  c.input.assign(steps * nk * n_seq, 0.0);
  c.gates.assign(steps * 4 * nh * n_seq, 0.0);
  c.cell.assign((steps + 1) * nh * n_seq, 0.0);
  c.tanh_c.assign(steps * nh * n_seq, 0.0);
  c.coef.assign(steps * n_seq, 0.0);
  for (std::size_t n = 0; n < n_seq; ++n) {
    for (std::size_t t = 0; t < steps; ++t) {
      c.coef[t * n_seq + n] = coeffs[n][t];
      for (std::size_t f = 0; f < nf; ++f) c.feat[(t * nf + f) * n_seq + n] = sequences[n][t][f];
    }
  }

  const double* wev = we.values().data();
  const double* bev = p.embed_b.value->values().data();
  const double* wv = w.values().data();
  const double* bv = p.lstm_b.value->values().data();
  Vector ctx(nh, 0.0);
  std::vector<double> h_prev(nh * n_seq, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    const double* feat = c.at(c.feat, nf, t);
    double* in = c.at(c.input, nk, t);
    for (std::size_t e = 0; e < ne; ++e) {
      double* row = in + e * n_seq;
      for (std::size_t n = 0; n < n_seq; ++n) row[n] = bev[e];
      for (std::size_t f = 0; f < nf; ++f) {
        const double a = wev[e * nf + f];
        const double* x = feat + f * n_seq;
        for (std::size_t n = 0; n < n_seq; ++n) row[n] += a * x[n];
      }
      for (std::size_t n = 0; n < n_seq; ++n) row[n] = std::tanh(row[n]);
    }
    std::copy(h_prev.begin(), h_prev.end(), in + ne * n_seq);
    double* z = c.at(c.gates, 4 * nh, t);
    for (std::size_t r = 0; r < 4 * nh; ++r) {
      double* zr = z + r * n_seq;
      for (std::size_t n = 0; n < n_seq; ++n) zr[n] = bv[r];
      for (std::size_t k = 0; k < nk; ++k) {
        const double a = wv[r * nk + k];
        const double* x = in + k * n_seq;
        for (std::size_t n = 0; n < n_seq; ++n) zr[n] += a * x[n];
      }
    }
    const double* c_prev = c.at(c.cell, nh, t);
    double* c_next = c.at(c.cell, nh, t + 1);
    double* tc = c.at(c.tanh_c, nh, t);
    const double* coef = c.coef.data() + t * n_seq;
    for (std::size_t k = 0; k < nh; ++k) {
      double* gi = z + k * n_seq;
      double* gf = z + (nh + k) * n_seq;
      double* gg = z + (2 * nh + k) * n_seq;
      double* go = z + (3 * nh + k) * n_seq;
      double acc = 0.0;
      for (std::size_t n = 0; n < n_seq; ++n) {
        gi[n] = kernels::sigmoid(gi[n]);
        gf[n] = kernels::sigmoid(gf[n]);
        gg[n] = std::tanh(gg[n]);
        go[n] = kernels::sigmoid(go[n]);
        const std::size_t i = k * n_seq + n;
        c_next[i] = gf[n] * c_prev[i] + gi[n] * gg[n];
        tc[i] = std::tanh(c_next[i]);
        h_prev[i] = go[n] * tc[i];
        acc += coef[n] * h_prev[i];
      }
      ctx[k] += acc;
    }
  }

  return tape.push(std::move(ctx), [p, cache](Tape& t, std::size_t self) {
    Cache& c = *cache;
    const std::size_t ns = c.n_seq, nh = c.nh, ne = c.ne, nk = c.nk, nf = c.nf;
    const Vector& gctx = t.grad_mut(self);
    const double* wv = p.lstm_w.value->values().data();
    double* gw = p.lstm_w.grad->values().data();
    double* gb = p.lstm_b.grad->values().data();
    double* gwe = p.embed_w.grad->values().data();
    double* gbe = p.embed_b.grad->values().data();
    std::vector<double> gh_next(nh * ns, 0.0), gc_next(nh * ns, 0.0), gz(4 * nh * ns), gin(nk * ns);
    for (std::size_t step = c.steps; step-- > 0;) {
      const double* z = c.at(c.gates, 4 * nh, step);
      const double* c_prev = c.at(c.cell, nh, step);
      const double* tc = c.at(c.tanh_c, nh, step);
      const double* in = c.at(c.input, nk, step);
      const double* coef = c.coef.data() + step * ns;
      for (std::size_t k = 0; k < nh; ++k) {
        const double* i = z + k * ns;
        const double* f = z + (nh + k) * ns;
        const double* g = z + (2 * nh + k) * ns;
        const double* o = z + (3 * nh + k) * ns;
        for (std::size_t n = 0; n < ns; ++n) {
          const std::size_t idx = k * ns + n;
          const double gh = coef[n] * gctx[k] + gh_next[idx];
          const double gc = gc_next[idx] + gh * o[n] * (1.0 - tc[idx] * tc[idx]);
          gz[idx] = gc * g[n] * i[n] * (1.0 - i[n]);
          gz[(nh + k) * ns + n] = gc * c_prev[idx] * f[n] * (1.0 - f[n]);
          gz[(2 * nh + k) * ns + n] = gc * i[n] * (1.0 - g[n] * g[n]);
          gz[(3 * nh + k) * ns + n] = gh * tc[idx] * o[n] * (1.0 - o[n]);
          gc_next[idx] = gc * f[n];
        }
      }
      std::fill(gin.begin(), gin.end(), 0.0);
      for (std::size_t r = 0; r < 4 * nh; ++r) {
        const double* gzr = gz.data() + r * ns;
        double sb = 0.0;
        for (std::size_t n = 0; n < ns; ++n) sb += gzr[n];
        gb[r] += sb;
        for (std::size_t k = 0; k < nk; ++k) {
          const double* x = in + k * ns;
          double s = 0.0;
          for (std::size_t n = 0; n < ns; ++n) s += gzr[n] * x[n];
          gw[r * nk + k] += s;
          const double a = wv[r * nk + k];
          double* gx = gin.data() + k * ns;
          for (std::size_t n = 0; n < ns; ++n) gx[n] += a * gzr[n];
        }
      }
      std::copy(gin.begin() + static_cast<std::ptrdiff_t>(ne * ns), gin.end(), gh_next.begin());
      const double* feat = c.at(c.feat, nf, step);
      for (std::size_t e = 0; e < ne; ++e) {
        const double* emb = in + e * ns;
        double* ge = gin.data() + e * ns;
        double sb = 0.0;
        for (std::size_t n = 0; n < ns; ++n) {
          ge[n] *= 1.0 - emb[n] * emb[n];
          sb += ge[n];
        }
        gbe[e] += sb;
        for (std::size_t f = 0; f < nf; ++f) {
          const double* x = feat + f * ns;
          double s = 0.0;
          for (std::size_t n = 0; n < ns; ++n) s += ge[n] * x[n];
          gwe[e * nf + f] += s;
        }
      }
    }
  });
}

// (1/T) sum_t ||pred_t - target_t||^2 as a 1-vector.
inline Var mean_squared_error(Tape& tape, std::span<const Var> predicted, std::span<const Vector> target) {
  if (predicted.size() != target.size()) throw ArgumentError("mean_squared_error: length mismatch");
  if (predicted.empty()) throw ArgumentError("mean_squared_error: empty sequence");
  double s = 0.0;
  for (std::size_t t = 0; t < predicted.size(); ++t) {
    const Vector& p = tape.value(predicted[t]);
    if (p.size() != target[t].size()) throw ShapeError("mean_squared_error: point dimension mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double d = p[i] - target[t][i];
      s += d * d;
    }
  }
  const double inv = 1.0 / static_cast<double>(predicted.size());
  std::vector<Var> ids(predicted.begin(), predicted.end());
  std::vector<Vector> tgt(target.begin(), target.end());
  return tape.push(Vector{s * inv}, [ids = std::move(ids), tgt = std::move(tgt), inv](Tape& t, std::size_t self) {
    const double g = t.grad_mut(self)[0];
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const Vector& p = t.value_at(ids[k].id);
      Vector& gp = t.grad_mut(ids[k].id);
      for (std::size_t i = 0; i < p.size(); ++i) gp[i] += 2.0 * inv * g * (p[i] - tgt[k][i]);
    }
  });
}

inline Var sum(Tape& tape, Var x) {
  double s = 0.0;
  for (double v : tape.value(x)) s += v;
  return tape.push(Vector{s}, [x](Tape& t, std::size_t self) {
    const double g = t.grad_mut(self)[0];
    for (double& gx : t.grad_mut(x.id)) gx += g;
  });
}

}  // namespace ops
}  // namespace trajattn
