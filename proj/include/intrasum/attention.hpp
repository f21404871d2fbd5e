#pragma once
// Intra-temporal attention over the input and intra-decoder attention over
// previously generated states.
//
// Temporal normalization divides each exponentiated score by the sum of the
// exponentiated scores the same input position received at earlier steps.
// It is computed in log space: the history keeps a running log-sum-exp per
// position, and the normalized score is raw - lse(past). The per-step
// attention weights are then a softmax of those shifted scores, which is
// mathematically identical to the direct ratio form.

#include <stdexcept>
#include <vector>

#include "intrasum/tape.hpp"

namespace intrasum {

// Running log-sum-exp of past raw encoder attention scores, one entry per
// input position. O(n) memory regardless of decode length.
struct TemporalHistory {
  Var score_lse;     // valid once step > 0
  int32_t step = 0;  // decode steps absorbed so far
};

// Previously emitted decoder hidden states, oldest first.
struct DecoderHistory {
  std::vector<Var> states;
};

// Bilinear scores of the current decoder state against every encoder state:
// score_i = h_dec^T W enc_i, computed as one matrix-vector product against
// the stacked encoder states.
inline Var encoder_scores(Tape& t, Var h_dec, Var enc_matrix,
                          Var w_enc_attn) {
  return t.matvec(enc_matrix, t.matvec_t(w_enc_attn, h_dec));
}

// Log of the temporally normalized scores for this step; the history then
// absorbs the raw scores. At the first step the scores pass through
// unnormalized.
inline Var temporal_normalize(Tape& t, Var raw_scores,
                              TemporalHistory& history) {
  Var log_norm = raw_scores;
  if (history.step > 0)
    log_norm = t.sub(raw_scores, history.score_lse);
  history.score_lse = history.step == 0
                          ? raw_scores
                          : t.logaddexp(history.score_lse, raw_scores);
  history.step += 1;
  return log_norm;
}

struct AttentionResult {
  Var weights;      // normalized over positions, sums to 1
  Var log_weights;  // log of the same
  Var context;      // weighted sum of states
};

// Normalizes the temporal scores across input positions and mixes the
// encoder states into a context vector.
inline AttentionResult encoder_context(Tape& t, Var log_temporal_scores,
                                       Var enc_matrix) {
  AttentionResult r;
  r.weights = t.softmax(log_temporal_scores);
  r.log_weights = t.log_softmax(log_temporal_scores);
  r.context = t.matvec_t(enc_matrix, r.weights);
  return r;
}

struct DecoderAttention {
  Var weights;  // over past steps; invalid at the first step
  Var context;
  bool has_weights = false;
};

// Attention of the current decoder state over the previously generated
// ones. The first step has an empty history and a zero context. The caller
// appends the current state to the history afterwards.
inline DecoderAttention decoder_context(Tape& t, Var h_dec,
                                        const DecoderHistory& history,
                                        Var w_dec_attn, int32_t d_dec) {
  DecoderAttention r;
  if (history.states.empty()) {
    r.context = t.leaf(Tensor::vec(static_cast<size_t>(d_dec), 0.0));
    return r;
  }
  Var past = t.stack_rows(history.states);
  Var scores = t.matvec(past, t.matvec_t(w_dec_attn, h_dec));
  r.weights = t.softmax(scores);
  r.context = t.matvec_t(past, r.weights);
  r.has_weights = true;
  return r;
}

}  // namespace intrasum
