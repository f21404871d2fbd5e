#pragma once
// Training objectives: teacher-forced maximum likelihood with scheduled
// sampling, self-critical policy gradient, and their mixture.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "intrasum/decode.hpp"
#include "intrasum/example.hpp"
#include "intrasum/rouge.hpp"
#include "intrasum/stepper.hpp"

namespace intrasum {

struct MlOptions {
  double sampling_prob = 0.0;  // chance to feed the model's own last token
  LikelihoodMode mode = LikelihoodMode::SupervisedBranch;
};

struct MlLossResult {
  Var loss;      // scalar on the caller's tape
  double value = 0.0;
};

// Negative sum of per-step log likelihoods over the target sequence plus
// the closing EOS step. With probability sampling_prob the decoder input
// for a step is the greedy argmax of the previous step's mixture instead of
// the ground-truth token.
inline MlLossResult ml_loss_on(Tape& t, const BoundParams& b,
                               const Example& ex, const VocabPair& vocabs,
                               const MlOptions& opt, Rng& rng) {
  const size_t m = ex.summary.size();
  if (m == 0) throw std::invalid_argument("ml_loss: empty target");
  DecoderStepper stepper(t, b, ex.input_ids);

  Var total{};
  bool have_total = false;
  int32_t forced_feed = Vocab::kSos;
  StepGraph last_sg{};
  bool have_last = false;

  // One step per target token, then one step supervising EOS.
  for (size_t step = 0; step <= m; ++step) {
    int32_t feed = forced_feed;
    if (have_last && opt.sampling_prob > 0.0 &&
        rng.bernoulli(opt.sampling_prob)) {
      StepDistribution d =
          step_distribution_values(t, last_sg, ex.article, vocabs);
      feed = decode_detail::best_candidate(d).feed_id;
    }
    StepGraph sg = stepper.step(feed);
    Var ll;
    if (step < m) {
      ll = step_log_likelihood(t, sg, ex, step, opt.mode);
      forced_feed = ex.feed_ids[step];
    } else {
      // EOS is always a generation step.
      Var log_p_gen = t.logsigmoid(t.neg(sg.switch_logit));
      Var log_eos = t.clamp_min(t.pick(sg.gen_log_probs, Vocab::kEos),
                                std::log(1e-12));
      ll = t.add(log_p_gen, log_eos);
    }
    total = have_total ? t.add(total, ll) : ll;
    have_total = true;
    last_sg = sg;
    have_last = true;
  }
  MlLossResult out;
  out.loss = t.neg(total);
  out.value = t.val(out.loss).item();
  return out;
}

struct RlOptions {
  size_t max_len = 100;
  RewardConfig reward_cfg;
};

struct RlLossResult {
  Var loss;  // scalar on the caller's tape; constant zero when skipped
  double value = 0.0;
  double reward_greedy = 0.0;
  double reward_sample = 0.0;
  size_t sample_len = 0;
  bool skipped = false;  // empty sample, example dropped
};

// Self-critical loss (reward(greedy) - reward(sample)) * sum log p(sample).
// The reward difference is a constant: no gradient flows through the
// rewards, and equal rewards give an exactly zero loss and gradient.
inline RlLossResult rl_loss_on(Tape& t, const BoundParams& b,
                               const ModelParams& params, const Example& ex,
                               const VocabPair& vocabs, const RlOptions& opt,
                               Rng& rng) {
  RlLossResult out;
  DecodeResult baseline = greedy_decode(params, vocabs, ex.article,
                                        ex.input_ids, opt.max_len);
  out.reward_greedy = reward(baseline.tokens, ex.summary, opt.reward_cfg);

  DecoderStepper stepper(t, b, ex.input_ids);
  SampledPath path =
      sample_decode_on(t, b, stepper, vocabs, ex.article, opt.max_len, rng);
  out.sample_len = path.result.tokens.size();
  if (path.result.tokens.empty()) {
    out.skipped = true;
    out.loss = t.constant(0.0);
    return out;
  }
  out.reward_sample = reward(path.result.tokens, ex.summary, opt.reward_cfg);

  Var sum_logp = path.step_log_probs[0];
  for (size_t i = 1; i < path.step_log_probs.size(); ++i)
    sum_logp = t.add(sum_logp, path.step_log_probs[i]);
  out.loss = t.scale(sum_logp, out.reward_greedy - out.reward_sample);
  out.value = t.val(out.loss).item();
  return out;
}

// gamma * L_rl + (1 - gamma) * L_ml.
inline double mixed_loss(double l_rl, double l_ml, double gamma) {
  if (gamma < 0.0 || gamma > 1.0)
    throw std::invalid_argument("mixed_loss: gamma must lie in [0, 1]");
  return gamma * l_rl + (1.0 - gamma) * l_ml;
}

inline Var mixed_loss_var(Tape& t, Var l_rl, Var l_ml, double gamma) {
  if (gamma < 0.0 || gamma > 1.0)
    throw std::invalid_argument("mixed_loss: gamma must lie in [0, 1]");
  return t.add(t.scale(l_rl, gamma), t.scale(l_ml, 1.0 - gamma));
}

}  // namespace intrasum
