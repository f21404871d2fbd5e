#pragma once
// Drives one decoder step: embed the previous token, advance the decoder
// LSTM, attend over the input with temporal normalization, attend over the
// decoded prefix, and produce generation logits plus the copy switch.
// Training losses and all decoders run on top of this.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "intrasum/attention.hpp"
#include "intrasum/example.hpp"
#include "intrasum/model.hpp"
#include "intrasum/pointer.hpp"
#include "intrasum/tape.hpp"

namespace intrasum {

struct StepGraph {
  Var h_dec;             // decoder hidden state for this step
  Var attn_weights;      // over input positions, sums to 1
  Var attn_log_weights;
  Var gen_log_probs;     // log softmax over the output vocabulary
  Var switch_logit;      // pre-sigmoid copy switch
  DecoderAttention self_attn;  // weights over the decoded prefix (t > 1)
};

class DecoderStepper {
 public:
  DecoderStepper(Tape& tape, const BoundParams& params,
                 const std::vector<int32_t>& input_ids)
      : t_(tape), p_(params) {
    enc_ = encode(t_, p_, input_ids);
    w_out_ = shared_output_matrix(t_, p_);
    state_.h = enc_.final_state;  // decoder starts at the last encoder state
    state_.c = t_.leaf(Tensor::vec(static_cast<size_t>(p_.dims.d_dec), 0.0));
  }

  // Prebuilt encoder reuse (beam search forks steppers over one encoding).
  DecoderStepper(Tape& tape, const BoundParams& params, EncoderStates enc,
                 Var w_out)
      : t_(tape), p_(params), enc_(std::move(enc)), w_out_(w_out) {
    state_.h = enc_.final_state;
    state_.c = t_.leaf(Tensor::vec(static_cast<size_t>(p_.dims.d_dec), 0.0));
  }

  const EncoderStates& encoder() const { return enc_; }
  Var output_matrix() const { return w_out_; }
  size_t input_len() const { return enc_.n; }
  int32_t steps_taken() const { return temporal_.step; }

  StepGraph step(int32_t feed_id) {
    StepGraph out;
    Var x = embed(t_, p_, feed_id);
    state_ = lstm_cell(t_, p_.dec, x, state_.h, state_.c, p_.dims.d_dec);
    out.h_dec = state_.h;

    Var raw = encoder_scores(t_, out.h_dec, enc_.matrix, p_.w_enc_attn);
    Var log_norm = temporal_normalize(t_, raw, temporal_);
    AttentionResult enc_attn = encoder_context(t_, log_norm, enc_.matrix);
    out.attn_weights = enc_attn.weights;
    out.attn_log_weights = enc_attn.log_weights;

    Var fused;
    if (p_.dims.intra_decoder) {
      out.self_attn =
          decoder_context(t_, out.h_dec, decoded_, p_.w_dec_attn,
                          p_.dims.d_dec);
      decoded_.states.push_back(out.h_dec);
      fused = t_.concat({out.h_dec, enc_attn.context, out.self_attn.context});
    } else {
      fused = t_.concat({out.h_dec, enc_attn.context});
    }

    Var logits = t_.add(t_.matvec(w_out_, fused), p_.b_out);
    out.gen_log_probs = t_.log_softmax(logits);
    out.switch_logit = t_.add(t_.dot(p_.w_switch, fused), p_.b_switch);
    return out;
  }

  // Snapshot/restore of the recurrent state, for beam hypotheses.
  struct Snapshot {
    LstmState state;
    TemporalHistory temporal;
    DecoderHistory decoded;
  };
  Snapshot snapshot() const { return Snapshot{state_, temporal_, decoded_}; }
  void restore(const Snapshot& s) {
    state_ = s.state;
    temporal_ = s.temporal;
    decoded_ = s.decoded;
  }

 private:
  Tape& t_;
  const BoundParams& p_;
  EncoderStates enc_;
  Var w_out_;
  LstmState state_;
  TemporalHistory temporal_;
  DecoderHistory decoded_;
};

// Per-step supervised log-likelihood. The default supervises the switch and
// the labeled branch: copy steps contribute log p(copy) plus the log
// attention weight at the labeled position, generation steps contribute
// log p(gen) plus the log generation probability of the target id. The
// marginal mode instead scores the full mixture probability of the target
// token.
enum class LikelihoodMode { SupervisedBranch, Marginal };

inline Var step_log_likelihood(Tape& t, const StepGraph& sg,
                               const Example& ex, size_t step,
                               LikelihoodMode mode =
                                   LikelihoodMode::SupervisedBranch) {
  if (step >= ex.summary.size())
    throw std::out_of_range("step_log_likelihood: step out of range");
  if (mode == LikelihoodMode::Marginal) {
    std::vector<int64_t> positions;
    for (size_t i = 0; i < ex.article.size(); ++i)
      if (ex.article[i] == ex.summary[step])
        positions.push_back(static_cast<int64_t>(i));
    return mixture_log_prob(t, sg.switch_logit, sg.attn_weights,
                            sg.gen_log_probs, positions,
                            ex.target_ids[step]);
  }
  // Log-space throughout; probabilities below 1e-12 clamp (and count).
  const double log_floor = std::log(1e-12);
  if (ex.copy_switch[step]) {
    Var log_p_copy = t.logsigmoid(sg.switch_logit);
    Var log_attn = t.clamp_min(
        t.pick(sg.attn_log_weights, static_cast<size_t>(ex.copy_pos[step])),
        log_floor);
    return t.add(log_p_copy, log_attn);
  }
  Var log_p_gen = t.logsigmoid(t.neg(sg.switch_logit));
  Var log_tok = t.clamp_min(
      t.pick(sg.gen_log_probs, static_cast<size_t>(ex.target_ids[step])),
      log_floor);
  return t.add(log_p_gen, log_tok);
}

// Value-level view of one step for the decoders.
inline StepDistribution step_distribution_values(
    const Tape& t, const StepGraph& sg,
    const std::vector<std::string>& input_tokens, const VocabPair& vocabs) {
  const Tensor& gen_log = t.val(sg.gen_log_probs);
  std::vector<double> gen(gen_log.size());
  for (size_t i = 0; i < gen.size(); ++i) gen[i] = std::exp(gen_log.v[i]);
  const Tensor& attn = t.val(sg.attn_weights);
  const double logit = t.val(sg.switch_logit).item();
  const double p_copy =
      logit >= 0.0 ? 1.0 / (1.0 + std::exp(-logit))
                   : std::exp(logit) / (1.0 + std::exp(logit));
  return make_step_distribution(std::move(gen), attn.v, p_copy, input_tokens,
                                vocabs);
}

}  // namespace intrasum
