#pragma once
// Model parameters and the graph builders shared by training and decoding:
// embeddings, bidirectional LSTM encoder, decoder LSTM cell, and the tied
// output projection.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "intrasum/common.hpp"
#include "intrasum/tape.hpp"
#include "intrasum/tensor.hpp"
#include "intrasum/vocab.hpp"

namespace intrasum {

struct ModelDims {
  int32_t d_emb = 100;
  int32_t d_enc = 200;   // per direction; encoder states are 2*d_enc wide
  int32_t d_dec = 400;
  int32_t vocab_out = 0;
  int32_t vocab_merged = 0;
  bool intra_decoder = true;

  // Width of [h_dec || enc_context || dec_context]; the decoder context is
  // dropped when intra-decoder attention is disabled.
  int32_t fused_dim() const {
    return d_dec + 2 * d_enc + (intra_decoder ? d_dec : 0);
  }

  void validate() const {
    if (d_emb <= 0 || d_enc <= 0 || d_dec <= 0)
      throw std::invalid_argument("ModelDims: dimensions must be positive");
    if (d_dec != 2 * d_enc)
      throw std::invalid_argument(
          "ModelDims: d_dec must equal 2*d_enc so the decoder can start from "
          "the final encoder state");
    if (vocab_out < static_cast<int32_t>(Vocab::kReserved) ||
        vocab_merged < vocab_out)
      throw std::invalid_argument("ModelDims: vocabulary sizes inconsistent");
  }

  static ModelDims paper_profile() { return ModelDims{}; }

  static ModelDims desk_profile() {
    ModelDims d;
    d.d_emb = 32;
    d.d_enc = 32;
    d.d_dec = 64;
    return d;
  }
};

// Fused gate layout: rows [input | forget | output | candidate], each block
// `hidden` rows tall.
struct LstmWeights {
  Tensor w_x;  // [4*hidden, input_dim]
  Tensor w_h;  // [4*hidden, hidden]
  Tensor b;    // [4*hidden]
};

struct ModelParams {
  ModelDims dims;
  Tensor w_emb;       // [vocab_merged, d_emb]; rows shared by both sides
  LstmWeights enc_fwd;
  LstmWeights enc_bwd;
  LstmWeights dec;
  Tensor w_enc_attn;  // [d_dec, 2*d_enc]
  Tensor w_dec_attn;  // [d_dec, d_dec]
  Tensor w_proj;      // [d_emb, fused_dim]
  Tensor b_out;       // [vocab_out]
  Tensor w_switch;    // [fused_dim]
  Tensor b_switch;    // scalar

  // Fixed order; checkpoints, Adam state and gradient collection rely on it.
  std::vector<std::pair<std::string, Tensor*>> named_tensors() {
    return {
        {"w_emb", &w_emb},
        {"enc_fwd.w_x", &enc_fwd.w_x},
        {"enc_fwd.w_h", &enc_fwd.w_h},
        {"enc_fwd.b", &enc_fwd.b},
        {"enc_bwd.w_x", &enc_bwd.w_x},
        {"enc_bwd.w_h", &enc_bwd.w_h},
        {"enc_bwd.b", &enc_bwd.b},
        {"dec.w_x", &dec.w_x},
        {"dec.w_h", &dec.w_h},
        {"dec.b", &dec.b},
        {"w_enc_attn", &w_enc_attn},
        {"w_dec_attn", &w_dec_attn},
        {"w_proj", &w_proj},
        {"b_out", &b_out},
        {"w_switch", &w_switch},
        {"b_switch", &b_switch},
    };
  }

  std::vector<std::pair<std::string, const Tensor*>> named_tensors() const {
    auto mut = const_cast<ModelParams*>(this)->named_tensors();
    std::vector<std::pair<std::string, const Tensor*>> out;
    out.reserve(mut.size());
    for (auto& [name, t] : mut) out.emplace_back(name, t);
    return out;
  }

  size_t parameter_count() const {
    size_t n = 0;
    for (auto& [name, t] : named_tensors()) n += t->size();
    return n;
  }

  // uniform(-0.1, 0.1) matrices, zero biases, forget-gate bias 1.
  static ModelParams init(const ModelDims& dims, Rng& rng) {
    dims.validate();
    ModelParams p;
    p.dims = dims;
    auto fill = [&rng](Tensor& t) {
      for (double& x : t.v) x = rng.uniform(-0.1, 0.1);
    };
    auto lstm = [&](LstmWeights& w, int32_t in_dim, int32_t hidden) {
      w.w_x = Tensor::mat(static_cast<size_t>(4 * hidden),
                          static_cast<size_t>(in_dim));
      w.w_h = Tensor::mat(static_cast<size_t>(4 * hidden),
                          static_cast<size_t>(hidden));
      w.b = Tensor::vec(static_cast<size_t>(4 * hidden), 0.0);
      fill(w.w_x);
      fill(w.w_h);
      for (int32_t i = hidden; i < 2 * hidden; ++i)
        w.b.v[static_cast<size_t>(i)] = 1.0;  // forget gate starts open
    };
    p.w_emb = Tensor::mat(static_cast<size_t>(dims.vocab_merged),
                          static_cast<size_t>(dims.d_emb));
    fill(p.w_emb);
    lstm(p.enc_fwd, dims.d_emb, dims.d_enc);
    lstm(p.enc_bwd, dims.d_emb, dims.d_enc);
    lstm(p.dec, dims.d_emb, dims.d_dec);
    p.w_enc_attn = Tensor::mat(static_cast<size_t>(dims.d_dec),
                               static_cast<size_t>(2 * dims.d_enc));
    p.w_dec_attn = Tensor::mat(static_cast<size_t>(dims.d_dec),
                               static_cast<size_t>(dims.d_dec));
    p.w_proj = Tensor::mat(static_cast<size_t>(dims.d_emb),
                           static_cast<size_t>(dims.fused_dim()));
    fill(p.w_enc_attn);
    fill(p.w_dec_attn);
    fill(p.w_proj);
    p.b_out = Tensor::vec(static_cast<size_t>(dims.vocab_out), 0.0);
    p.w_switch = Tensor::vec(static_cast<size_t>(dims.fused_dim()));
    for (double& x : p.w_switch.v) x = rng.uniform(-0.1, 0.1);
    p.b_switch = Tensor::scalar(0.0);
    return p;
  }
};

// Optional warm start from a word-vector text file ("token v1 .. vd" per
// line). Tokens are matched by string against the merged vocabulary; misses
// keep their random initialization. Returns the number of rows loaded.
inline size_t load_pretrained_embeddings(ModelParams& params,
                                         const VocabPair& vocabs,
                                         const std::string& path) {
  std::ifstream f(path);
  if (!f)
    throw std::runtime_error("load_pretrained_embeddings: cannot read " +
                             path);
  const size_t d = static_cast<size_t>(params.dims.d_emb);
  std::string line;
  size_t loaded = 0;
  size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string tok;
    is >> tok;
    int32_t id = vocabs.feed_id(tok);
    std::vector<double> row;
    row.reserve(d);
    double x;
    while (is >> x) row.push_back(x);
    if (row.size() != d)
      throw std::runtime_error(
          "load_pretrained_embeddings: line " + std::to_string(lineno) +
          " has " + std::to_string(row.size()) + " values, expected " +
          std::to_string(d));
    if (id == Vocab::kUnk && tok != Vocab::reserved_token(Vocab::kUnk))
      continue;
    for (size_t j = 0; j < d; ++j)
      params.w_emb.at(static_cast<size_t>(id), j) = row[j];
    ++loaded;
  }
  return loaded;
}

// ---- graph builders ----

struct LstmVars {
  Var w_x, w_h, b;
};

struct BoundParams {
  Var w_emb;
  LstmVars enc_fwd, enc_bwd, dec;
  Var w_enc_attn, w_dec_attn, w_proj, b_out, w_switch, b_switch;
  ModelDims dims;
};

inline BoundParams bind_params(Tape& t, const ModelParams& p) {
  BoundParams b;
  b.dims = p.dims;
  b.w_emb = t.leaf_external(&p.w_emb);
  b.enc_fwd = {t.leaf_external(&p.enc_fwd.w_x),
               t.leaf_external(&p.enc_fwd.w_h),
               t.leaf_external(&p.enc_fwd.b)};
  b.enc_bwd = {t.leaf_external(&p.enc_bwd.w_x),
               t.leaf_external(&p.enc_bwd.w_h),
               t.leaf_external(&p.enc_bwd.b)};
  b.dec = {t.leaf_external(&p.dec.w_x), t.leaf_external(&p.dec.w_h),
           t.leaf_external(&p.dec.b)};
  b.w_enc_attn = t.leaf_external(&p.w_enc_attn);
  b.w_dec_attn = t.leaf_external(&p.w_dec_attn);
  b.w_proj = t.leaf_external(&p.w_proj);
  b.b_out = t.leaf_external(&p.b_out);
  b.w_switch = t.leaf_external(&p.w_switch);
  b.b_switch = t.leaf_external(&p.b_switch);
  return b;
}

// Gradients in named_tensors() order, zero for parameters the loss never
// touched.
inline std::vector<Tensor> collect_grads(Tape& t, const BoundParams& b) {
  std::vector<Var> vars = {
      b.w_emb,         b.enc_fwd.w_x, b.enc_fwd.w_h, b.enc_fwd.b,
      b.enc_bwd.w_x,   b.enc_bwd.w_h, b.enc_bwd.b,   b.dec.w_x,
      b.dec.w_h,       b.dec.b,       b.w_enc_attn,  b.w_dec_attn,
      b.w_proj,        b.b_out,       b.w_switch,    b.b_switch};
  std::vector<Tensor> out;
  out.reserve(vars.size());
  for (Var v : vars) out.push_back(t.grad(v));
  return out;
}

struct LstmState {
  Var h, c;
};

// Standard LSTM cell with input/forget/output gates and tanh candidate.
inline LstmState lstm_cell(Tape& t, const LstmVars& w, Var x, Var h_prev,
                           Var c_prev, int32_t hidden) {
  Var z = t.add(t.add(t.matvec(w.w_x, x), t.matvec(w.w_h, h_prev)), w.b);
  const size_t H = static_cast<size_t>(hidden);
  Var gate_in = t.sigmoid(t.slice(z, 0, H));
  Var gate_forget = t.sigmoid(t.slice(z, H, H));
  Var gate_out = t.sigmoid(t.slice(z, 2 * H, H));
  Var candidate = t.tanh(t.slice(z, 3 * H, H));
  Var c = t.add(t.mul(gate_forget, c_prev), t.mul(gate_in, candidate));
  Var h = t.mul(gate_out, t.tanh(c));
  return LstmState{h, c};
}

struct EncoderStates {
  std::vector<Var> states;  // per token, [2*d_enc]
  Var matrix;               // [n, 2*d_enc]
  Var final_state;          // last state; the decoder starts here
  size_t n = 0;
};

inline Var embed(Tape& t, const BoundParams& p, int32_t id) {
  if (id < 0 || id >= p.dims.vocab_merged)
    throw std::invalid_argument("embed: id " + std::to_string(id) +
                                " out of vocabulary");
  return t.embed_row(p.w_emb, static_cast<size_t>(id));
}

// Bidirectional encoder: forward pass left to right, backward pass right to
// left, per-token concatenation [fwd || bwd].
inline EncoderStates encode(Tape& t, const BoundParams& p,
                            const std::vector<int32_t>& input_ids) {
  if (input_ids.empty())
    throw std::invalid_argument("encode: empty input");
  const size_t n = input_ids.size();
  const int32_t H = p.dims.d_enc;

  std::vector<Var> emb(n);
  for (size_t i = 0; i < n; ++i) emb[i] = embed(t, p, input_ids[i]);

  Var zero_h = t.leaf(Tensor::vec(static_cast<size_t>(H), 0.0));
  Var zero_c = t.leaf(Tensor::vec(static_cast<size_t>(H), 0.0));

  std::vector<Var> fwd(n), bwd(n);
  LstmState s{zero_h, zero_c};
  for (size_t i = 0; i < n; ++i) {
    s = lstm_cell(t, p.enc_fwd, emb[i], s.h, s.c, H);
    fwd[i] = s.h;
  }
  s = LstmState{zero_h, zero_c};
  for (size_t i = n; i-- > 0;) {
    s = lstm_cell(t, p.enc_bwd, emb[i], s.h, s.c, H);
    bwd[i] = s.h;
  }

  EncoderStates enc;
  enc.n = n;
  enc.states.resize(n);
  for (size_t i = 0; i < n; ++i)
    enc.states[i] = t.concat({fwd[i], bwd[i]});
  enc.matrix = t.stack_rows(enc.states);
  enc.final_state = enc.states[n - 1];
  return enc;
}

// Tied output matrix tanh(W_emb[0:vocab_out] * W_proj), rebuilt on every
// forward pass so gradients reach both factors.
inline Var shared_output_matrix(Tape& t, const BoundParams& p) {
  Var out_rows =
      t.slice_rows(p.w_emb, 0, static_cast<size_t>(p.dims.vocab_out));
  return t.tanh(t.matmul(out_rows, p.w_proj));
}

}  // namespace intrasum
