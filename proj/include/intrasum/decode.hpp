#pragma once
// Greedy, sampled, and beam-search decoding over the mixture distribution.
//
// Candidates are drawn from the union of the output vocabulary and the
// article's tokens; PAD and SOS are never emitted. Trigram blocking applies
// only inside beam search: a candidate whose emission would repeat a
// trigram already present in the hypothesis gets probability zero. Sampling
// (used for policy-gradient training) and greedy decoding are unblocked.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "intrasum/common.hpp"
#include "intrasum/stepper.hpp"

namespace intrasum {

// False iff appending `candidate` creates a trigram that already occurs in
// `prefix`. Token strings compare verbatim.
inline bool trigram_allows(const std::vector<std::string>& prefix,
                           const std::string& candidate) {
  const size_t n = prefix.size();
  if (n < 2) return true;
  for (size_t i = 0; i + 2 < n; ++i)
    if (prefix[i] == prefix[n - 2] && prefix[i + 1] == prefix[n - 1] &&
        prefix[i + 2] == candidate)
      return false;
  return true;
}

inline bool has_repeated_trigram(const std::vector<std::string>& tokens) {
  for (size_t i = 0; i + 3 <= tokens.size(); ++i)
    for (size_t j = i + 1; j + 3 <= tokens.size(); ++j)
      if (tokens[i] == tokens[j] && tokens[i + 1] == tokens[j + 1] &&
          tokens[i + 2] == tokens[j + 2])
        return true;
  return false;
}

struct DecodeResult {
  std::vector<std::string> tokens;  // emitted summary, EOS excluded
  double log_prob = 0.0;            // cumulative, including the EOS step
};

namespace decode_detail {

// Argmax over decodable candidates; deterministic tie-break by candidate
// order (output ids ascending, then copy-only tokens by first occurrence).
inline const TokenCandidate& best_candidate(const StepDistribution& d) {
  const TokenCandidate* best = nullptr;
  for (const TokenCandidate& c : d.candidates) {
    if (!c.decodable) continue;
    if (best == nullptr || c.prob > best->prob) best = &c;
  }
  if (best == nullptr)
    throw std::logic_error("decode: no decodable candidate");
  return *best;
}

inline const std::string& eos_token() {
  static const std::string tok = Vocab::reserved_token(Vocab::kEos);
  return tok;
}

}  // namespace decode_detail

// Argmax of the mixture at every step; stops at EOS or max_len.
inline DecodeResult greedy_decode(const ModelParams& params,
                                  const VocabPair& vocabs,
                                  const std::vector<std::string>& article,
                                  const std::vector<int32_t>& input_ids,
                                  size_t max_len) {
  Tape t;
  BoundParams b = bind_params(t, params);
  DecoderStepper stepper(t, b, input_ids);
  DecodeResult out;
  int32_t feed = Vocab::kSos;
  for (size_t step = 0; step < max_len; ++step) {
    StepGraph sg = stepper.step(feed);
    StepDistribution d = step_distribution_values(t, sg, article, vocabs);
    const TokenCandidate& c = decode_detail::best_candidate(d);
    out.log_prob += std::log(std::max(c.prob, 1e-300));
    if (c.out_id == Vocab::kEos) break;
    out.tokens.push_back(c.token);
    feed = c.feed_id;
  }
  return out;
}

struct SampledPath {
  DecodeResult result;
  std::vector<Var> step_log_probs;  // graph-side log p of each sampled token
};

// Multinomial sampling from the mixture, temperature 1, renormalized over
// decodable candidates. Runs on the caller's tape so the per-step log
// probabilities stay differentiable. Reproducible given the Rng state.
inline SampledPath sample_decode_on(Tape& t, const BoundParams& b,
                                    DecoderStepper& stepper,
                                    const VocabPair& vocabs,
                                    const std::vector<std::string>& article,
                                    size_t max_len, Rng& rng) {
  (void)b;
  SampledPath path;
  int32_t feed = Vocab::kSos;
  for (size_t step = 0; step < max_len; ++step) {
    StepGraph sg = stepper.step(feed);
    StepDistribution d = step_distribution_values(t, sg, article, vocabs);
    double total = 0.0;
    for (const TokenCandidate& c : d.candidates)
      if (c.decodable) total += c.prob;
    if (!(total > 0.0))
      throw std::runtime_error("sample_decode: degenerate distribution");
    const double u = rng.uniform() * total;
    double acc = 0.0;
    const TokenCandidate* chosen = nullptr;
    for (const TokenCandidate& c : d.candidates) {
      if (!c.decodable) continue;
      acc += c.prob;
      if (u < acc) {
        chosen = &c;
        break;
      }
    }
    if (chosen == nullptr) {  // u landed on the tail of rounding error
      for (auto it = d.candidates.rbegin(); it != d.candidates.rend(); ++it)
        if (it->decodable) {
          chosen = &*it;
          break;
        }
    }
    path.step_log_probs.push_back(
        mixture_log_prob(t, sg.switch_logit, sg.attn_weights,
                         sg.gen_log_probs, chosen->positions,
                         chosen->out_id));
    path.result.log_prob += std::log(std::max(chosen->prob, 1e-300));
    if (chosen->out_id == Vocab::kEos) break;
    path.result.tokens.push_back(chosen->token);
    feed = chosen->feed_id;
  }
  return path;
}

inline DecodeResult sample_decode(const ModelParams& params,
                                  const VocabPair& vocabs,
                                  const std::vector<std::string>& article,
                                  const std::vector<int32_t>& input_ids,
                                  size_t max_len, uint64_t seed) {
  Tape t;
  BoundParams b = bind_params(t, params);
  DecoderStepper stepper(t, b, input_ids);
  Rng rng(seed);
  return sample_decode_on(t, b, stepper, vocabs, article, max_len, rng)
      .result;
}

struct BeamConfig {
  int32_t width = 5;
  size_t max_len = 100;
  bool length_normalize = true;          // finished compete by lp/len
  bool block_repeated_trigrams = true;
};

// Beam hypothesis: emitted tokens plus the recurrent state snapshot needed
// to extend it. Finished hypotheses are frozen and keep their beam slot.
struct Hypothesis {
  std::vector<std::string> tokens;
  std::vector<int32_t> feeds;      // merged ids fed so far (SOS first)
  double log_prob = 0.0;
  DecoderStepper::Snapshot snap;
  bool finished = false;

  double score(bool normalize) const {
    if (!normalize) return log_prob;
    return log_prob / static_cast<double>(std::max<size_t>(1, tokens.size()));
  }
};

inline DecodeResult beam_search(const ModelParams& params,
                                const VocabPair& vocabs,
                                const std::vector<std::string>& article,
                                const std::vector<int32_t>& input_ids,
                                const BeamConfig& cfg) {
  if (cfg.width < 1)
    throw std::invalid_argument("beam_search: width must be at least 1");
  Tape t;
  BoundParams b = bind_params(t, params);
  DecoderStepper stepper(t, b, input_ids);

  std::vector<Hypothesis> live(1);
  live[0].feeds = {Vocab::kSos};
  live[0].snap = stepper.snapshot();
  std::vector<Hypothesis> finished;

  auto worst_finished = [&]() {
    size_t w = 0;
    for (size_t i = 1; i < finished.size(); ++i)
      if (finished[i].score(cfg.length_normalize) <
          finished[w].score(cfg.length_normalize))
        w = i;
    return w;
  };
  auto retire = [&](Hypothesis h) {
    h.finished = true;
    if (finished.size() < static_cast<size_t>(cfg.width)) {
      finished.push_back(std::move(h));
      return;
    }
    size_t w = worst_finished();
    if (h.score(cfg.length_normalize) >
        finished[w].score(cfg.length_normalize))
      finished[w] = std::move(h);
  };

  struct Extension {
    size_t parent;
    double log_prob;      // cumulative
    double step_log;      // this step's log p
    const TokenCandidate* cand;
  };

  for (size_t step = 0; step < cfg.max_len && !live.empty(); ++step) {
    if (finished.size() >= static_cast<size_t>(cfg.width)) break;

    std::vector<Extension> exts;
    std::vector<DecoderStepper::Snapshot> snaps(live.size());
    std::vector<StepDistribution> dists(live.size());
    for (size_t hi = 0; hi < live.size(); ++hi) {
      stepper.restore(live[hi].snap);
      StepGraph sg = stepper.step(live[hi].feeds.back());
      snaps[hi] = stepper.snapshot();
      dists[hi] = step_distribution_values(t, sg, article, vocabs);
      bool any = false;
      for (const TokenCandidate& c : dists[hi].candidates) {
        if (!c.decodable) continue;
        const bool banned = cfg.block_repeated_trigrams &&
                            c.out_id != Vocab::kEos &&
                            !trigram_allows(live[hi].tokens, c.token);
        if (banned) continue;  // probability forced to zero
        const double lp = std::log(std::max(c.prob, 1e-300));
        exts.push_back(Extension{hi, live[hi].log_prob + lp, lp, &c});
        any = true;
      }
      if (!any) {
        // Everything banned: the hypothesis is forced to end here.
        const TokenCandidate* eos = nullptr;
        for (const TokenCandidate& c : dists[hi].candidates)
          if (c.out_id == Vocab::kEos) eos = &c;
        const double lp = std::log(std::max(eos->prob, 1e-300));
        exts.push_back(Extension{hi, live[hi].log_prob + lp, lp, eos});
      }
    }

    // Stable order: by score descending, ties by (parent, candidate order),
    // which candidate pointers preserve within a parent.
    std::stable_sort(exts.begin(), exts.end(),
                     [](const Extension& a, const Extension& b) {
                       return a.log_prob > b.log_prob;
                     });

    // Finished hypotheses keep their beam slot: an EOS extension consumes a
    // slot permanently, so the live pool shrinks as hypotheses finish.
    std::vector<Hypothesis> next;
    for (const Extension& e : exts) {
      const size_t slots =
          static_cast<size_t>(cfg.width) - finished.size();
      if (next.size() >= slots) break;
      if (e.cand->out_id == Vocab::kEos) {
        Hypothesis h = live[e.parent];
        h.log_prob = e.log_prob;
        h.snap = snaps[e.parent];
        retire(std::move(h));
        continue;
      }
      Hypothesis h = live[e.parent];
      h.tokens.push_back(e.cand->token);
      h.feeds.push_back(e.cand->feed_id);
      h.log_prob = e.log_prob;
      h.snap = snaps[e.parent];
      next.push_back(std::move(h));
    }
    live = std::move(next);
  }

  // Hypotheses still alive at max_len compete as-is.
  for (Hypothesis& h : live) retire(std::move(h));
  if (finished.empty())
    throw std::logic_error("beam_search: no hypotheses produced");

  size_t best = 0;
  for (size_t i = 1; i < finished.size(); ++i)
    if (finished[i].score(cfg.length_normalize) >
        finished[best].score(cfg.length_normalize))
      best = i;

  DecodeResult out;
  out.tokens = finished[best].tokens;
  out.log_prob = finished[best].log_prob;
  if (cfg.block_repeated_trigrams && has_repeated_trigram(out.tokens))
    throw std::logic_error("beam_search: repeated trigram escaped blocking");
  return out;
}

}  // namespace intrasum
