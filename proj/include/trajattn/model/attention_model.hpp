// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "trajattn/data/neighborhood.hpp"
#include "trajattn/data/trajectory.hpp"
#include "trajattn/errors.hpp"
#include "trajattn/numerics/linalg.hpp"
#include "trajattn/numerics/random.hpp"
#include "trajattn/numerics/tape.hpp"

namespace trajattn {

enum class AttentionMode {
  combined,   // soft attention on the target plus hardwired attention on neighbours
  soft_only,  // hardwired context replaced by zeros
};

inline const char* to_string(AttentionMode m) { return m == AttentionMode::combined ? "combined" : "soft_only"; }

struct ModelConfig {
  std::size_t hidden_size = 32;
  std::size_t embedding_size = 16;
  std::size_t t_obs = 20;
  std::size_t t_pred = 40;
  AttentionMode mode = AttentionMode::combined;
  // Per-frame displacements are multiplied by this before entering the
  // network and predicted steps are divided by it. 0 means "calibrate from
  // the training data" and is resolved by the trainer.
  double velocity_scale = 0.0;
  // Multiplier on neighbour offsets relative to the target.
  double neighbor_scale = 5.0;
  // Rescale hardwired weights to sum to one over neighbours at each step.
  bool normalize_hardwired = false;
  // Predict each step as the last observed displacement plus the decoder's
  // correction, so that zero output reproduces constant velocity.
  bool velocity_prior = false;
  double min_distance = kDefaultMinDistance;

  std::size_t horizon() const { return t_pred - t_obs; }
  std::size_t scorer_width() const { return std::max<std::size_t>(4, hidden_size / 2); }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline void validate(const ModelConfig& c, bool require_scale = true) {
  if (c.hidden_size == 0 || c.embedding_size == 0) throw ConfigError("hidden_size and embedding_size must be positive");
  if (c.t_obs < 2) throw ConfigError("T_obs must be at least 2");
  if (c.t_pred <= c.t_obs) throw ConfigError("T_pred must exceed T_obs");
  if (!(c.neighbor_scale > 0)) throw ConfigError("neighbor_scale must be positive");
  if (!(c.min_distance > 0)) throw ConfigError("min_distance must be positive");
  if (require_scale && !(c.velocity_scale > 0)) {
    throw ConfigError("velocity_scale must be positive (calibrate it from data before inference)");
  }
}

// Parameter names. Weight matrices act on column vectors; biases are n x 1.
namespace param {
inline constexpr const char* kEncEmbedW = "enc.embed.W";
inline constexpr const char* kEncEmbedB = "enc.embed.b";
inline constexpr const char* kEncLstmW = "enc.lstm.W";
inline constexpr const char* kEncLstmB = "enc.lstm.b";
inline constexpr const char* kNbrEmbedW = "nbr.embed.W";
inline constexpr const char* kNbrEmbedB = "nbr.embed.b";
inline constexpr const char* kNbrLstmW = "nbr.lstm.W";
inline constexpr const char* kNbrLstmB = "nbr.lstm.b";
inline constexpr const char* kAttQueryW = "att.query.W";
inline constexpr const char* kAttQueryB = "att.query.b";
inline constexpr const char* kAttKeyW = "att.key.W";
inline constexpr const char* kAttV = "att.v";
inline constexpr const char* kMergeW = "merge.W";
inline constexpr const char* kDecEmbedW = "dec.embed.W";
inline constexpr const char* kDecEmbedB = "dec.embed.b";
inline constexpr const char* kDecLstmW = "dec.lstm.W";
inline constexpr const char* kDecLstmB = "dec.lstm.b";
inline constexpr const char* kOutW = "out.W";
inline constexpr const char* kOutB = "out.b";
}  // namespace param

// Encoder input per step: 2 position (or relative offset) + 2 displacement.
inline constexpr std::size_t kEncoderFeatures = 4;
// Decoder input: previous position.
inline constexpr std::size_t kDecoderFeatures = 2;

// Allocates every parameter regardless of mode so that the soft-only and
// combined variants share one layout and one initialization stream.
// Initialization is uniform in +-1/sqrt(fan_in); LSTM forget-gate biases
// start at 1. The merge columns reading the hardwired context start at zero,
// so a fresh combined model predicts exactly like a soft-only one. With the
// velocity prior the output layer starts at zero, so a fresh model
// extrapolates at constant velocity.
inline ParameterStore make_parameters(const ModelConfig& c, std::uint64_t seed) {
  validate(c, false);
  const std::size_t h = c.hidden_size, e = c.embedding_size, a = c.scorer_width();
  struct Spec {
    const char* name;
    std::size_t rows, cols, fan_in;
  };
  const Spec specs[] = {
      {param::kEncEmbedW, e, kEncoderFeatures, kEncoderFeatures},
      {param::kEncEmbedB, e, 1, kEncoderFeatures},
      {param::kEncLstmW, 4 * h, e + h, e + h},
      {param::kEncLstmB, 4 * h, 1, e + h},
      {param::kNbrEmbedW, e, kEncoderFeatures, kEncoderFeatures},
      {param::kNbrEmbedB, e, 1, kEncoderFeatures},
      {param::kNbrLstmW, 4 * h, e + h, e + h},
      {param::kNbrLstmB, 4 * h, 1, e + h},
      {param::kAttQueryW, a, h, h},
      {param::kAttQueryB, a, 1, h},
      {param::kAttKeyW, a, h, h},
      {param::kAttV, a, 1, a},
      {param::kMergeW, h, 2 * h, 2 * h},
      {param::kDecEmbedW, e, kDecoderFeatures, kDecoderFeatures},
      {param::kDecEmbedB, e, 1, kDecoderFeatures},
      {param::kDecLstmW, 4 * h, e + 2 * h, e + 2 * h},
      {param::kDecLstmB, 4 * h, 1, e + 2 * h},
      {param::kOutW, 2, h, h},
      {param::kOutB, 2, 1, h},
  };
  ParameterStore store;
  Rng rng(seed);
  for (const auto& s : specs) {
    auto& p = store.add(s.name, s.rows, s.cols);
    fill_uniform(p.value, 1.0 / std::sqrt(static_cast<double>(s.fan_in)), rng);
  }
  for (const char* b : {param::kEncLstmB, param::kNbrLstmB, param::kDecLstmB}) {
    auto v = store.at(b).value.values();
    for (std::size_t k = h; k < 2 * h; ++k) v[k] = 1.0;
  }
  auto& merge = store.at(param::kMergeW).value;
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t col = h; col < 2 * h; ++col) merge(r, col) = 0.0;
  }
  if (c.velocity_prior) {
    store.at(param::kOutW).value.fill(0.0);
    store.at(param::kOutB).value.fill(0.0);
  }
  return store;
}

// Tape-facing view of a parameter store.
struct ModelRefs {
  ParamRef enc_embed_w, enc_embed_b, enc_lstm_w, enc_lstm_b;
  ParamRef nbr_embed_w, nbr_embed_b, nbr_lstm_w, nbr_lstm_b;
  ParamRef att_query_w, att_query_b, att_key_w, att_v;
  ParamRef merge_w;
  ParamRef dec_embed_w, dec_embed_b, dec_lstm_w, dec_lstm_b;
  ParamRef out_w, out_b;
};

template <typename Store>
ModelRefs bind_parameters(Store& s) {
  auto r = [&](const char* n) { return ParamRef::of(s.at(n)); };
  return {r(param::kEncEmbedW), r(param::kEncEmbedB), r(param::kEncLstmW), r(param::kEncLstmB),
          r(param::kNbrEmbedW), r(param::kNbrEmbedB), r(param::kNbrLstmW), r(param::kNbrLstmB),
          r(param::kAttQueryW), r(param::kAttQueryB), r(param::kAttKeyW),  r(param::kAttV),
          r(param::kMergeW),
          r(param::kDecEmbedW), r(param::kDecEmbedB), r(param::kDecLstmW), r(param::kDecLstmB),
          r(param::kOutW),      r(param::kOutB)};
}

struct EncodedSequence {
  std::vector<Vector> states;  // hidden state after each step
};

namespace detail {

struct EncoderRefs {
  ParamRef embed_w, embed_b, lstm_w, lstm_b;
};

struct EncodedVars {
  std::vector<Var> states;
  ops::LstmVars last;
};

inline EncodedVars encode_features(Tape& tape, const EncoderRefs& enc, const std::vector<Vector>& features,
                                   std::size_t hidden) {
  EncodedVars out;
  ops::LstmVars s{tape.constant(Vector(hidden, 0.0)), tape.constant(Vector(hidden, 0.0))};
  out.states.reserve(features.size());
  for (const auto& f : features) {
    Var x = ops::tanh(tape, ops::affine(tape, enc.embed_w, enc.embed_b, tape.constant(f)));
    s = ops::lstm_step(tape, enc.lstm_w, enc.lstm_b, x, s);
    out.states.push_back(s.hidden);
  }
  out.last = s;
  return out;
}

inline std::vector<Vector> target_features(std::span<const Point> traj, double velocity_scale) {
  std::vector<Vector> f;
  f.reserve(traj.size());
  for (std::size_t t = 0; t < traj.size(); ++t) {
    const Point d = t == 0 ? Point{} : traj[t] - traj[t - 1];
    f.push_back({2.0 * traj[t].x - 1.0, 2.0 * traj[t].y - 1.0, velocity_scale * d.x, velocity_scale * d.y});
  }
  return f;
}

inline std::vector<Vector> neighbor_features(std::span<const Point> target, std::span<const Point> neighbor,
                                             double neighbor_scale, double velocity_scale) {
  std::vector<Vector> f;
  f.reserve(neighbor.size());
  for (std::size_t t = 0; t < neighbor.size(); ++t) {
    const Point r = neighbor[t] - target[t];
    const Point d = t == 0 ? Point{} : neighbor[t] - neighbor[t - 1];
    f.push_back({neighbor_scale * r.x, neighbor_scale * r.y, velocity_scale * d.x, velocity_scale * d.y});
  }
  return f;
}

inline EncoderRefs target_encoder(const ModelRefs& m) {
  return {m.enc_embed_w, m.enc_embed_b, m.enc_lstm_w, m.enc_lstm_b};
}
inline EncoderRefs neighbor_encoder(const ModelRefs& m) {
  return {m.nbr_embed_w, m.nbr_embed_b, m.nbr_lstm_w, m.nbr_lstm_b};
}

inline Vector to_vector(Point p) { return {p.x, p.y}; }
inline Point to_point(const Vector& v) { return {v[0], v[1]}; }

}  // namespace detail

// Graph pieces kept for inspection (attention weights, hidden states).
struct ForwardGraph {
  std::vector<Var> encoder_states;
  std::vector<Var> decoder_states;
  std::vector<Var> attention;
  std::vector<Var> predictions;
  Var hardwired_context;
};

// Hardwired weights of the active slots, optionally normalized per step.
// Slots that are dummies or carry only zero weights are dropped.
inline std::vector<std::size_t> active_slots(const NeighborhoodTensor& n) {
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < kNeighborSlots; ++k) {
    const auto& s = n.slots[k];
    if (s.is_dummy) continue;
    if (std::any_of(s.weights.begin(), s.weights.end(), [](double w) { return w != 0.0; })) idx.push_back(k);
  }
  return idx;
}

inline std::vector<std::vector<double>> effective_weights(const NeighborhoodTensor& n,
                                                          std::span<const std::size_t> slots, bool normalize) {
  std::vector<std::vector<double>> w;
  for (std::size_t k : slots) w.push_back(n.slots[k].weights);
  if (normalize && !w.empty()) {
    for (std::size_t j = 0; j < w[0].size(); ++j) {
      double s = 0.0;
      for (const auto& row : w) s += row[j];
      if (s > 0.0) {
        for (auto& row : w) row[j] /= s;
      }
    }
  }
  return w;
}

// Builds the full prediction graph for one instance. With `teacher` set
// (ground-truth future, T_pred - T_obs points) the decoder is fed the true
// previous position at each step; otherwise it feeds back its own output.
inline ForwardGraph build_forward(Tape& tape, const ModelRefs& m, const ModelConfig& c,
                                  std::span<const Point> observed, const NeighborhoodTensor& neighborhood,
                                  std::span<const Point> teacher = {}) {
  validate(c);
  if (observed.size() != c.t_obs) throw ArgumentError("observed length must equal T_obs");
  if (!teacher.empty() && teacher.size() != c.horizon()) throw ArgumentError("teacher length must equal T_pred - T_obs");
  const std::size_t h = c.hidden_size;
  ForwardGraph g;

  auto enc = detail::encode_features(tape, detail::target_encoder(m), detail::target_features(observed, c.velocity_scale), h);
  g.encoder_states = enc.states;

  // Hardwired context, once per instance.
  std::vector<std::vector<Vector>> nbr_features;
  std::vector<std::vector<double>> weights;
  if (c.mode == AttentionMode::combined) {
    const auto slots = active_slots(neighborhood);
    weights = effective_weights(neighborhood, slots, c.normalize_hardwired);
    for (std::size_t k : slots) {
      const auto& slot = neighborhood.slots[k];
      if (slot.trajectory.size() != c.t_obs || slot.weights.size() != c.t_obs) {
        throw ShapeError("neighbour slot length must equal T_obs");
      }
      nbr_features.push_back(
          detail::neighbor_features(observed, slot.trajectory, c.neighbor_scale, c.velocity_scale));
    }
  }
  g.hardwired_context = ops::weighted_encoding(
      tape, {m.nbr_embed_w, m.nbr_embed_b, m.nbr_lstm_w, m.nbr_lstm_b}, nbr_features, weights, h);

  std::vector<Var> keys;
  keys.reserve(enc.states.size());
  for (Var hj : enc.states) keys.push_back(ops::linear(tape, m.att_key_w, hj));

  ops::LstmVars s = enc.last;
  Var y_prev = tape.constant(detail::to_vector(observed.back()));
  Var prior;
  if (c.velocity_prior) prior = tape.constant(detail::to_vector(observed.back() - observed[observed.size() - 2]));
  const double inv_scale = 1.0 / c.velocity_scale;
  for (std::size_t t = 0; t < c.horizon(); ++t) {
    Var q = ops::affine(tape, m.att_query_w, m.att_query_b, s.hidden);
    Var alpha = ops::softmax(tape, ops::additive_scores(tape, q, keys, m.att_v));
    Var soft = ops::weighted_sum(tape, alpha, enc.states);
    Var merged = ops::tanh(tape, ops::linear(tape, m.merge_w, ops::concat(tape, soft, g.hardwired_context)));
    Var emb = ops::tanh(tape, ops::affine(tape, m.dec_embed_w, m.dec_embed_b, ops::scale(tape, y_prev, 2.0, -1.0)));
    s = ops::lstm_step(tape, m.dec_lstm_w, m.dec_lstm_b, ops::concat(tape, emb, merged), s);
    Var step = ops::affine(tape, m.out_w, m.out_b, s.hidden);
    Var y = ops::add(tape, y_prev, ops::scale(tape, step, inv_scale));
    if (c.velocity_prior) y = ops::add(tape, y, prior);
    g.attention.push_back(alpha);
    g.decoder_states.push_back(s.hidden);
    g.predictions.push_back(y);
    y_prev = teacher.empty() ? y : tape.constant(detail::to_vector(teacher[t]));
  }
  return g;
}

struct PredictionTrace {
  PointSeq predicted;
  std::vector<Vector> encoder_states;  // h_1..h_Tobs
  std::vector<Vector> decoder_states;  // s_{Tobs+1}..s_Tpred
  std::vector<Vector> attention;       // alpha per decode step
  Vector hardwired_context;
};

// Autoregressive inference. Parameters are only read.
inline PredictionTrace predict_trace(const ParameterStore& params, const ModelConfig& c, std::span<const Point> observed,
                                     const NeighborhoodTensor& neighborhood) {
  Tape tape(false);
  const auto g = build_forward(tape, bind_parameters(params), c, observed, neighborhood);
  PredictionTrace tr;
  for (Var v : g.predictions) tr.predicted.push_back(detail::to_point(tape.value(v)));
  for (Var v : g.encoder_states) tr.encoder_states.push_back(tape.value(v));
  for (Var v : g.decoder_states) tr.decoder_states.push_back(tape.value(v));
  for (Var v : g.attention) tr.attention.push_back(tape.value(v));
  tr.hardwired_context = tape.value(g.hardwired_context);
  return tr;
}

inline PointSeq predict(const ParameterStore& params, const ModelConfig& c, std::span<const Point> observed,
                        const NeighborhoodTensor& neighborhood) {
  return predict_trace(params, c, observed, neighborhood).predicted;
}

// ---- Stand-alone pieces of the graph, evaluated without gradients. ----

// Target encoder over a T_obs track; all T_obs hidden states.
inline EncodedSequence encode(const ParameterStore& params, const ModelConfig& c, std::span<const Point> traj) {
  validate(c);
  if (traj.size() != c.t_obs) throw ArgumentError("encode: trajectory length must equal T_obs");
  Tape tape(false);
  const auto m = bind_parameters(params);
  auto enc = detail::encode_features(tape, detail::target_encoder(m), detail::target_features(traj, c.velocity_scale),
                                     c.hidden_size);
  EncodedSequence out;
  for (Var v : enc.states) out.states.push_back(tape.value(v));
  return out;
}

// Neighbour encoder for one slot track, relative to the target track.
inline EncodedSequence encode_neighbor(const ParameterStore& params, const ModelConfig& c,
                                       std::span<const Point> target, std::span<const Point> neighbor) {
  validate(c);
  if (target.size() != c.t_obs || neighbor.size() != c.t_obs) throw ArgumentError("encode_neighbor: length must equal T_obs");
  Tape tape(false);
  const auto m = bind_parameters(params);
  auto enc = detail::encode_features(tape, detail::neighbor_encoder(m),
                                     detail::neighbor_features(target, neighbor, c.neighbor_scale, c.velocity_scale),
                                     c.hidden_size);
  EncodedSequence out;
  for (Var v : enc.states) out.states.push_back(tape.value(v));
  return out;
}

struct SoftAttention {
  Vector context;
  Vector alpha;
};

inline SoftAttention soft_attention(const ParameterStore& params, const Vector& s_prev_hidden,
                                    const EncodedSequence& encoded) {
  if (encoded.states.empty()) throw ArgumentError("soft_attention: empty encoded sequence");
  Tape tape(false);
  const auto m = bind_parameters(params);
  std::vector<Var> states, keys;
  for (const auto& hj : encoded.states) {
    states.push_back(tape.constant(hj));
    keys.push_back(ops::linear(tape, m.att_key_w, states.back()));
  }
  Var q = ops::affine(tape, m.att_query_w, m.att_query_b, tape.constant(s_prev_hidden));
  Var alpha = ops::softmax(tape, ops::additive_scores(tape, q, keys, m.att_v));
  Var ctx = ops::weighted_sum(tape, alpha, states);
  return {tape.value(ctx), tape.value(alpha)};
}

// C_h = sum_n sum_j w_(n,j) h'_(n,j). Slots with zero weight contribute
// nothing, so an all-dummy neighbourhood gives the zero vector.
inline Vector hardwired_context(std::span<const EncodedSequence> neighbor_encodings,
                                std::span<const std::vector<double>> weights, std::size_t hidden_size) {
  if (neighbor_encodings.size() != weights.size()) throw ShapeError("hardwired_context: slot count mismatch");
  Tape tape(false);
  std::vector<double> coeffs;
  std::vector<Var> states;
  for (std::size_t n = 0; n < weights.size(); ++n) {
    if (weights[n].size() != neighbor_encodings[n].states.size()) throw ShapeError("hardwired_context: length mismatch");
    for (std::size_t j = 0; j < weights[n].size(); ++j) {
      coeffs.push_back(weights[n][j]);
      states.push_back(tape.constant(neighbor_encodings[n].states[j]));
    }
  }
  return tape.value(ops::constant_weighted_sum(tape, coeffs, states, hidden_size));
}

// C* = tanh(W_c [C_s; C_h]); soft_only mode merges with a zero C_h.
inline Vector merge_context(const ParameterStore& params, const ModelConfig& c, const Vector& soft,
                            const Vector& hardwired) {
  if (soft.size() != c.hidden_size || hardwired.size() != c.hidden_size) {
    throw ShapeError("merge_context: contexts must have hidden_size entries");
  }
  Tape tape(false);
  const auto m = bind_parameters(params);
  Var ch = tape.constant(c.mode == AttentionMode::soft_only ? Vector(c.hidden_size, 0.0) : hardwired);
  Var out = ops::tanh(tape, ops::linear(tape, m.merge_w, ops::concat(tape, tape.constant(soft), ch)));
  return tape.value(out);
}

struct DecodeStep {
  LstmState state;
  Point y;
};

// `prior_step` is the last observed displacement, used when velocity_prior is set.
inline DecodeStep decode_step(const ParameterStore& params, const ModelConfig& c, const LstmState& s_prev, Point y_prev,
                              const Vector& merged, Point prior_step = {}) {
  validate(c);
  if (merged.size() != c.hidden_size) throw ShapeError("decode_step: context must have hidden_size entries");
  if (s_prev.hidden.size() != c.hidden_size || s_prev.cell.size() != c.hidden_size) {
    throw ShapeError("decode_step: state must have hidden_size entries");
  }
  Tape tape(false);
  const auto m = bind_parameters(params);
  Var yv = tape.constant(detail::to_vector(y_prev));
  Var emb = ops::tanh(tape, ops::affine(tape, m.dec_embed_w, m.dec_embed_b, ops::scale(tape, yv, 2.0, -1.0)));
  ops::LstmVars prev{tape.constant(s_prev.hidden), tape.constant(s_prev.cell)};
  auto s = ops::lstm_step(tape, m.dec_lstm_w, m.dec_lstm_b, ops::concat(tape, emb, tape.constant(merged)), prev);
  Var step = ops::affine(tape, m.out_w, m.out_b, s.hidden);
  Var y = ops::add(tape, yv, ops::scale(tape, step, 1.0 / c.velocity_scale));
  if (c.velocity_prior) y = ops::add(tape, y, tape.constant(detail::to_vector(prior_step)));
  return {{tape.value(s.hidden), tape.value(s.cell)}, detail::to_point(tape.value(y))};
}

}  // namespace trajattn
