#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "capembed/tensor.hpp"

namespace capembed::nn {

enum class RnnKind { gru, lstm };
enum class Pooling { attention, max };

std::string to_string(RnnKind k);
std::string to_string(Pooling p);
RnnKind rnn_kind_from_string(const std::string& s);
Pooling pooling_from_string(const std::string& s);

struct EncoderConfig {
  std::size_t char_vocab_size = 0;
  std::size_t char_embed_dim = 20;
  std::size_t hidden_size = 64;
  RnnKind rnn_kind = RnnKind::gru;
  Pooling pooling = Pooling::attention;
  std::size_t attention_hidden = 128;
  std::size_t image_feature_dim = 2048;

  // Bidirectional states are concatenated, so the embedding width is 2n.
  std::size_t embed_dim() const { return 2 * hidden_size; }

  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

// One gate: contribution x*w + h*u + b.
struct GateParams {
  Tensor w;  // d_in x n
  Tensor u;  // n x n
  Tensor b;  // n
};

// GRU gates: z, r, h. LSTM gates: i, f, o, g.
struct RnnCellParams {
  std::vector<GateParams> gates;
};

const std::vector<std::string>& gate_names(RnnKind kind);

struct EncoderParams {
  Tensor char_embedding;  // vocab x char_embed_dim
  RnnCellParams rnn_fwd;
  RnnCellParams rnn_bwd;
  Tensor attention_w;   // attention_hidden x 2n
  Tensor attention_bw;  // attention_hidden
  Tensor attention_v;   // 2n x attention_hidden
  Tensor attention_bv;  // 2n
  Tensor image_a;       // 2n x image_feature_dim
  Tensor image_b;       // 2n
};

// Visits every learnable tensor in a fixed order with its stable name
// (the order and names used by checkpoints and the optimizer).
void for_each_param(EncoderParams& p, RnnKind kind,
                    const std::function<void(const std::string&, Tensor&)>& fn);
void for_each_param(const EncoderParams& p, RnnKind kind,
                    const std::function<void(const std::string&, const Tensor&)>& fn);

// All tensors allocated to the configured shapes, zero-filled.
EncoderParams zero_params(const EncoderConfig& config);

// Deterministic init: matrices uniform(-s, s) with s = sqrt(6/(fan_in+fan_out)),
// char embeddings uniform(-0.1, 0.1), biases zero except the LSTM forget
// gate bias, which starts at 1.
EncoderParams init_params(const EncoderConfig& config, std::uint64_t seed);

// Parameter leaves registered on one graph for a forward/backward pass.
struct BoundGate {
  Var w, u, b;
};

struct BoundParams {
  Var char_embedding;
  std::vector<BoundGate> fwd;
  std::vector<BoundGate> bwd;
  Var attention_w, attention_bw, attention_v, attention_bv;
  Var image_a, image_b;
  // same order as for_each_param
  std::vector<std::pair<std::string, Var>> named;
};

BoundParams bind_params(Graph& g, const EncoderParams& p, RnnKind kind);

// Gradients for every parameter, aligned with for_each_param order.
std::vector<Tensor> collect_grads(Graph& g, const BoundParams& bp);

struct RnnState {
  Var h;
  Var c;  // valid only when has_cell
  bool has_cell = false;
};

RnnState rnn_initial_state(Graph& g, RnnKind kind, std::size_t batch, std::size_t hidden);

// One recurrence step on a [B x d_in] input slab.
RnnState rnn_cell_step(Graph& g, RnnKind kind, Var x, const RnnState& state,
                       const std::vector<BoundGate>& gates);

// Same step with the input projections x*w_gate precomputed (one per gate);
// bidirectional_run hoists those out of the time loop.
RnnState rnn_cell_step_preprojected(Graph& g, RnnKind kind, const std::vector<Var>& x_proj,
                                    const RnnState& state, const std::vector<BoundGate>& gates);

// Padded character-ID batch. char_ids is row-major B x max_len with PAD (0)
// beyond lengths[i].
struct TextBatch {
  std::size_t batch_size = 0;
  std::size_t max_len = 0;
  std::vector<int> char_ids;
  std::vector<std::size_t> lengths;
};

struct BidiStates {
  Var states;                // B x T x 2n, zero at padded positions
  std::vector<double> mask;  // B x T row-major, 1 on valid steps
};

// Runs the forward RNN left to right and the backward RNN right to left
// (starting at each caption's true final character), concatenating the two
// state sequences per step.
BidiStates bidirectional_run(Graph& g, const TextBatch& batch, const BoundParams& bp,
                             const EncoderConfig& config);

// Attention weights are softmax-normalized over valid time steps,
// independently per feature; output is the weighted sum of states.
Var attention_pool(Graph& g, Var states, const std::vector<double>& mask,
                   const BoundParams& bp);

// Per-feature max over valid time steps; gradient goes to the earliest
// argmax step.
Var max_pool(Graph& g, Var states, const std::vector<double>& mask);

// Full caption encoder: embeddings -> bidirectional RNN -> pooling -> L2 norm.
Var encode_caption(Graph& g, const TextBatch& batch, const BoundParams& bp,
                   const EncoderConfig& config);

// Image encoder: affine projection of the precomputed features -> L2 norm.
Var encode_image(Graph& g, Var features, const BoundParams& bp, const EncoderConfig& config);

// No-grad conveniences: fresh throwaway graph, plain tensor out.
Tensor encode_caption_values(const TextBatch& batch, const EncoderParams& p,
                             const EncoderConfig& config);
Tensor encode_image_values(const Tensor& features, const EncoderParams& p,
                           const EncoderConfig& config);

}  // namespace capembed::nn
