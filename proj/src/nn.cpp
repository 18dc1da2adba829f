#include "capembed/nn.hpp"

#include <cmath>
#include <unordered_map>

#include "capembed/rng.hpp"

namespace capembed::nn {

std::string to_string(RnnKind k) { return k == RnnKind::gru ? "gru" : "lstm"; }
std::string to_string(Pooling p) { return p == Pooling::attention ? "attention" : "max"; }

RnnKind rnn_kind_from_string(const std::string& s) {
  if (s == "gru") return RnnKind::gru;
  if (s == "lstm") return RnnKind::lstm;
  throw ValidationError("unknown rnn kind '" + s + "' (expected gru or lstm)");
}

Pooling pooling_from_string(const std::string& s) {
  if (s == "attention") return Pooling::attention;
  if (s == "max") return Pooling::max;
  throw ValidationError("unknown pooling '" + s + "' (expected attention or max)");
}

void EncoderConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v < 1) throw ValidationError(std::string("encoder config: ") + name + " must be >= 1");
  };
  positive(char_vocab_size, "char_vocab_size");
  positive(char_embed_dim, "char_embed_dim");
  positive(hidden_size, "hidden_size");
  positive(attention_hidden, "attention_hidden");
  positive(image_feature_dim, "image_feature_dim");
}

const std::vector<std::string>& gate_names(RnnKind kind) {
  static const std::vector<std::string> gru{"z", "r", "h"};
  static const std::vector<std::string> lstm{"i", "f", "o", "g"};
  return kind == RnnKind::gru ? gru : lstm;
}

namespace {

template <class Params, class Fn>
void for_each_param_impl(Params& p, RnnKind kind, const Fn& fn) {
  fn("char_embedding", p.char_embedding);
  const auto& names = gate_names(kind);
  for (std::size_t i = 0; i < names.size(); ++i) {
    fn("rnn_fwd." + names[i] + ".w", p.rnn_fwd.gates[i].w);
    fn("rnn_fwd." + names[i] + ".u", p.rnn_fwd.gates[i].u);
    fn("rnn_fwd." + names[i] + ".b", p.rnn_fwd.gates[i].b);
  }
  for (std::size_t i = 0; i < names.size(); ++i) {
    fn("rnn_bwd." + names[i] + ".w", p.rnn_bwd.gates[i].w);
    fn("rnn_bwd." + names[i] + ".u", p.rnn_bwd.gates[i].u);
    fn("rnn_bwd." + names[i] + ".b", p.rnn_bwd.gates[i].b);
  }
  fn("attention_w", p.attention_w);
  fn("attention_bw", p.attention_bw);
  fn("attention_v", p.attention_v);
  fn("attention_bv", p.attention_bv);
  fn("image_a", p.image_a);
  fn("image_b", p.image_b);
}

}  // namespace

void for_each_param(EncoderParams& p, RnnKind kind,
                    const std::function<void(const std::string&, Tensor&)>& fn) {
  for_each_param_impl(p, kind, fn);
}

void for_each_param(const EncoderParams& p, RnnKind kind,
                    const std::function<void(const std::string&, const Tensor&)>& fn) {
  for_each_param_impl(p, kind, fn);
}

EncoderParams zero_params(const EncoderConfig& config) {
  config.validate();
  const std::size_t n = config.hidden_size;
  const std::size_t e = config.char_embed_dim;
  const std::size_t two_n = config.embed_dim();
  const std::size_t a = config.attention_hidden;

  EncoderParams p;
  p.char_embedding = Tensor::zeros({config.char_vocab_size, e});
  auto make_cell = [&] {
    RnnCellParams cell;
    for (std::size_t i = 0; i < gate_names(config.rnn_kind).size(); ++i) {
      cell.gates.push_back({Tensor::zeros({e, n}), Tensor::zeros({n, n}), Tensor::zeros({n})});
    }
    return cell;
  };
  p.rnn_fwd = make_cell();
  p.rnn_bwd = make_cell();
  p.attention_w = Tensor::zeros({a, two_n});
  p.attention_bw = Tensor::zeros({a});
  p.attention_v = Tensor::zeros({two_n, a});
  p.attention_bv = Tensor::zeros({two_n});
  p.image_a = Tensor::zeros({two_n, config.image_feature_dim});
  p.image_b = Tensor::zeros({two_n});
  return p;
}

EncoderParams init_params(const EncoderConfig& config, std::uint64_t seed) {
  EncoderParams p = zero_params(config);
  Rng rng(seed);
  for_each_param(p, config.rnn_kind, [&](const std::string& name, Tensor& t) {
    if (name == "char_embedding") {
      for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-0.1, 0.1);
      return;
    }
    if (t.rank() == 1) {
      // biases stay zero; the LSTM forget gate starts open
      if (config.rnn_kind == RnnKind::lstm && name.ends_with(".f.b")) {
        for (std::size_t i = 0; i < t.numel(); ++i) t[i] = 1.0;
      }
      return;
    }
    const double s = std::sqrt(6.0 / static_cast<double>(t.dim(0) + t.dim(1)));
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-s, s);
  });
  return p;
}

BoundParams bind_params(Graph& g, const EncoderParams& p, RnnKind kind) {
  BoundParams bp;
  std::unordered_map<std::string, Var> by_name;
  for_each_param(p, kind, [&](const std::string& name, const Tensor& t) {
    Var v = g.leaf(t, name);
    bp.named.emplace_back(name, v);
    by_name.emplace(name, v);
  });
  const auto& names = gate_names(kind);
  for (const auto& gn : names) {
    bp.fwd.push_back({by_name.at("rnn_fwd." + gn + ".w"), by_name.at("rnn_fwd." + gn + ".u"),
                      by_name.at("rnn_fwd." + gn + ".b")});
    bp.bwd.push_back({by_name.at("rnn_bwd." + gn + ".w"), by_name.at("rnn_bwd." + gn + ".u"),
                      by_name.at("rnn_bwd." + gn + ".b")});
  }
  bp.char_embedding = by_name.at("char_embedding");
  bp.attention_w = by_name.at("attention_w");
  bp.attention_bw = by_name.at("attention_bw");
  bp.attention_v = by_name.at("attention_v");
  bp.attention_bv = by_name.at("attention_bv");
  bp.image_a = by_name.at("image_a");
  bp.image_b = by_name.at("image_b");
  return bp;
}

std::vector<Tensor> collect_grads(Graph& g, const BoundParams& bp) {
  std::vector<Tensor> grads;
  grads.reserve(bp.named.size());
  for (const auto& [name, var] : bp.named) grads.push_back(g.grad(var));
  return grads;
}

RnnState rnn_initial_state(Graph& g, RnnKind kind, std::size_t batch, std::size_t hidden) {
  RnnState s;
  s.h = g.leaf(Tensor::zeros({batch, hidden}), "h0");
  if (kind == RnnKind::lstm) {
    s.c = g.leaf(Tensor::zeros({batch, hidden}), "c0");
    s.has_cell = true;
  }
  return s;
}

RnnState rnn_cell_step(Graph& g, RnnKind kind, Var x, const RnnState& state,
                       const std::vector<BoundGate>& gates) {
  std::vector<Var> proj;
  proj.reserve(gates.size());
  for (const auto& gate : gates) proj.push_back(g.matmul(x, gate.w));
  return rnn_cell_step_preprojected(g, kind, proj, state, gates);
}

RnnState rnn_cell_step_preprojected(Graph& g, RnnKind kind, const std::vector<Var>& x_proj,
                                    const RnnState& state, const std::vector<BoundGate>& gates) {
  auto gate_pre = [&](std::size_t i, Var h) {
    return g.add(g.add(x_proj[i], g.matmul(h, gates[i].u)), gates[i].b);
  };
  if (kind == RnnKind::gru) {
    // z = sig(Wz x + Uz h + bz); r = sig(Wr x + Ur h + br)
    // h~ = tanh(Wh x + Uh (r o h) + bh); h' = (1 - z) o h + z o h~
    Var z = g.sigmoid(gate_pre(0, state.h));
    Var r = g.sigmoid(gate_pre(1, state.h));
    Var rh = g.mul(r, state.h);
    Var cand = g.tanh(g.add(g.add(x_proj[2], g.matmul(rh, gates[2].u)), gates[2].b));
    Var h_new = g.add(g.sub(state.h, g.mul(z, state.h)), g.mul(z, cand));
    return RnnState{h_new, Var{}, false};
  }
  Var i_gate = g.sigmoid(gate_pre(0, state.h));
  Var f_gate = g.sigmoid(gate_pre(1, state.h));
  Var o_gate = g.sigmoid(gate_pre(2, state.h));
  Var g_gate = g.tanh(gate_pre(3, state.h));
  Var c_new = g.add(g.mul(f_gate, state.c), g.mul(i_gate, g_gate));
  Var h_new = g.mul(o_gate, g.tanh(c_new));
  return RnnState{h_new, c_new, true};
}

namespace {

// Per-step mask constants: [B x width] with row b filled by mask(b, t).
Var step_mask_leaf(Graph& g, const std::vector<double>& mask, std::size_t t, std::size_t t_len,
                   std::size_t batch, std::size_t width, bool inverted) {
  Tensor m = Tensor::zeros({batch, width});
  for (std::size_t b = 0; b < batch; ++b) {
    const double v = inverted ? 1.0 - mask[b * t_len + t] : mask[b * t_len + t];
    for (std::size_t j = 0; j < width; ++j) m.at(b, j) = v;
  }
  return g.leaf(std::move(m), "mask");
}

// Carries the previous state through padded steps so the backward-direction
// RNN effectively starts at the true final character.
RnnState masked_state(Graph& g, const RnnState& fresh, const RnnState& prev, Var m, Var m_inv) {
  RnnState out;
  out.h = g.add(g.mul(fresh.h, m), g.mul(prev.h, m_inv));
  out.has_cell = fresh.has_cell;
  if (fresh.has_cell) out.c = g.add(g.mul(fresh.c, m), g.mul(prev.c, m_inv));
  return out;
}

void validate_lengths(const TextBatch& batch) {
  if (batch.batch_size == 0) throw ValidationError("text batch: empty batch");
  if (batch.lengths.size() != batch.batch_size ||
      batch.char_ids.size() != batch.batch_size * batch.max_len) {
    throw DimensionError("text batch: inconsistent field sizes");
  }
  for (std::size_t b = 0; b < batch.batch_size; ++b) {
    if (batch.lengths[b] < 1) {
      throw ValidationError("text batch: zero-length caption at row " + std::to_string(b));
    }
    if (batch.lengths[b] > batch.max_len) {
      throw DimensionError("text batch: length exceeds max_len at row " + std::to_string(b));
    }
  }
}

constexpr double kMaskedLogit = -1e30;

}  // namespace

BidiStates bidirectional_run(Graph& g, const TextBatch& batch, const BoundParams& bp,
                             const EncoderConfig& config) {
  validate_lengths(batch);
  const std::size_t b_size = batch.batch_size;
  const std::size_t t_len = batch.max_len;
  const std::size_t n = config.hidden_size;
  const auto n_gates = bp.fwd.size();

  std::vector<double> mask(b_size * t_len, 0.0);
  for (std::size_t b = 0; b < b_size; ++b)
    for (std::size_t t = 0; t < batch.lengths[b]; ++t) mask[b * t_len + t] = 1.0;

  // step-major gather so each step's embeddings are one contiguous row slab
  std::vector<int> ids_sm(b_size * t_len);
  for (std::size_t t = 0; t < t_len; ++t)
    for (std::size_t b = 0; b < b_size; ++b) ids_sm[t * b_size + b] = batch.char_ids[b * t_len + t];
  Var x_all = g.gather_rows(bp.char_embedding, std::move(ids_sm));

  // input projections for every gate, hoisted out of the recurrence
  std::vector<Var> proj_fwd, proj_bwd;
  for (std::size_t i = 0; i < n_gates; ++i) {
    proj_fwd.push_back(g.matmul(x_all, bp.fwd[i].w));
    proj_bwd.push_back(g.matmul(x_all, bp.bwd[i].w));
  }

  std::vector<Var> mask_n(t_len), mask_n_inv(t_len), mask_2n(t_len);
  for (std::size_t t = 0; t < t_len; ++t) {
    mask_n[t] = step_mask_leaf(g, mask, t, t_len, b_size, n, false);
    mask_n_inv[t] = step_mask_leaf(g, mask, t, t_len, b_size, n, true);
    mask_2n[t] = step_mask_leaf(g, mask, t, t_len, b_size, 2 * n, false);
  }

  auto step_inputs = [&](const std::vector<Var>& proj, std::size_t t) {
    std::vector<Var> xp;
    xp.reserve(n_gates);
    for (std::size_t i = 0; i < n_gates; ++i) xp.push_back(g.slice_rows(proj[i], t * b_size, b_size));
    return xp;
  };

  std::vector<Var> fwd_h(t_len), bwd_h(t_len);
  RnnState state = rnn_initial_state(g, config.rnn_kind, b_size, n);
  for (std::size_t t = 0; t < t_len; ++t) {
    RnnState fresh =
        rnn_cell_step_preprojected(g, config.rnn_kind, step_inputs(proj_fwd, t), state, bp.fwd);
    state = masked_state(g, fresh, state, mask_n[t], mask_n_inv[t]);
    fwd_h[t] = state.h;
  }
  state = rnn_initial_state(g, config.rnn_kind, b_size, n);
  for (std::size_t t = t_len; t-- > 0;) {
    RnnState fresh =
        rnn_cell_step_preprojected(g, config.rnn_kind, step_inputs(proj_bwd, t), state, bp.bwd);
    state = masked_state(g, fresh, state, mask_n[t], mask_n_inv[t]);
    bwd_h[t] = state.h;
  }

  std::vector<Var> per_step(t_len);
  for (std::size_t t = 0; t < t_len; ++t) {
    per_step[t] = g.mul(g.concat(fwd_h[t], bwd_h[t], 1), mask_2n[t]);
  }
  return BidiStates{g.stack_steps(per_step), std::move(mask)};
}

namespace {

void require_valid_rows(const Tensor& states, const std::vector<double>& mask, const char* op) {
  const std::size_t b_size = states.dim(0), t_len = states.dim(1);
  if (mask.size() != b_size * t_len) {
    throw DimensionError(std::string(op) + ": mask size does not match states");
  }
  for (std::size_t b = 0; b < b_size; ++b) {
    bool any = false;
    for (std::size_t t = 0; t < t_len; ++t) any |= mask[b * t_len + t] != 0.0;
    if (!any) {
      throw ValidationError(std::string(op) + ": all time steps masked for row " +
                            std::to_string(b));
    }
  }
}

Var masked_logit_offset(Graph& g, const std::vector<double>& mask, std::size_t b_size,
                        std::size_t t_len, std::size_t feat) {
  Tensor off = Tensor::zeros({b_size, t_len, feat});
  for (std::size_t b = 0; b < b_size; ++b)
    for (std::size_t t = 0; t < t_len; ++t)
      if (mask[b * t_len + t] == 0.0)
        for (std::size_t f = 0; f < feat; ++f) off.at(b, t, f) = kMaskedLogit;
  return g.leaf(std::move(off), "mask_offset");
}

}  // namespace

Var attention_pool(Graph& g, Var states, const std::vector<double>& mask,
                   const BoundParams& bp) {
  const Tensor& sv = g.value(states);
  if (sv.rank() != 3) {
    throw DimensionError("attention_pool: expected B x T x F states, got " +
                         shape_str(sv.shape()));
  }
  require_valid_rows(sv, mask, "attention_pool");
  const std::size_t b_size = sv.dim(0), t_len = sv.dim(1), feat = sv.dim(2);

  Var flat = g.reshape(states, {b_size * t_len, feat});
  Var hidden = g.tanh(g.add(g.matmul(flat, g.transpose(bp.attention_w)), bp.attention_bw));
  Var logits = g.add(g.matmul(hidden, g.transpose(bp.attention_v)), bp.attention_bv);
  Var logits3 = g.reshape(logits, {b_size, t_len, feat});
  Var masked = g.add(logits3, masked_logit_offset(g, mask, b_size, t_len, feat));
  Var weights = g.softmax(masked, 1);
  return g.sum_axis(g.mul(weights, states), 1);
}

Var max_pool(Graph& g, Var states, const std::vector<double>& mask) {
  const Tensor& sv = g.value(states);
  if (sv.rank() != 3) {
    throw DimensionError("max_pool: expected B x T x F states, got " + shape_str(sv.shape()));
  }
  require_valid_rows(sv, mask, "max_pool");
  const std::size_t b_size = sv.dim(0), t_len = sv.dim(1), feat = sv.dim(2);
  // padded steps get a huge negative offset so they can never win the max
  Var shifted = g.add(states, masked_logit_offset(g, mask, b_size, t_len, feat));
  return g.max_axis(shifted, 1);
}

Var encode_caption(Graph& g, const TextBatch& batch, const BoundParams& bp,
                   const EncoderConfig& config) {
  BidiStates bidi = bidirectional_run(g, batch, bp, config);
  Var pooled = config.pooling == Pooling::attention
                   ? attention_pool(g, bidi.states, bidi.mask, bp)
                   : max_pool(g, bidi.states, bidi.mask);
  return g.l2_normalize_rows(pooled);
}

Var encode_image(Graph& g, Var features, const BoundParams& bp, const EncoderConfig& config) {
  const Tensor& fv = g.value(features);
  if (fv.rank() != 2 || fv.dim(1) != config.image_feature_dim) {
    throw DimensionError("encode_image: features " + shape_str(fv.shape()) +
                         " do not match configured feature dim " +
                         std::to_string(config.image_feature_dim));
  }
  Var proj = g.add(g.matmul(features, g.transpose(bp.image_a)), bp.image_b);
  return g.l2_normalize_rows(proj);
}

Tensor encode_caption_values(const TextBatch& batch, const EncoderParams& p,
                             const EncoderConfig& config) {
  Graph g;
  BoundParams bp = bind_params(g, p, config.rnn_kind);
  return g.value(encode_caption(g, batch, bp, config));
}

Tensor encode_image_values(const Tensor& features, const EncoderParams& p,
                           const EncoderConfig& config) {
  Graph g;
  BoundParams bp = bind_params(g, p, config.rnn_kind);
  return g.value(encode_image(g, g.leaf(features, "features"), bp, config));
}

}  // namespace capembed::nn
