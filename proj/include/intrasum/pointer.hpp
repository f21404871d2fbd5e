#pragma once
// Token generation, copy distribution, switch probability and their
// mixture, over the union of the output vocabulary and the article tokens.
//
// The copy probability of a token string sums the attention weights of all
// its article positions, which makes the copy side a proper distribution
// over distinct tokens.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "intrasum/tape.hpp"
#include "intrasum/vocab.hpp"

namespace intrasum {

// Value-level copy distribution over distinct input tokens.
inline std::map<std::string, double> copy_distribution(
    const std::vector<double>& attn_weights,
    const std::vector<std::string>& input_tokens) {
  if (attn_weights.size() != input_tokens.size())
    throw std::invalid_argument(
        "copy_distribution: weights/tokens length mismatch");
  std::map<std::string, double> probs;
  for (size_t i = 0; i < input_tokens.size(); ++i)
    probs[input_tokens[i]] += attn_weights[i];
  return probs;
}

// One candidate output token at a decoding step: either a vocabulary token,
// an article token, or both when the same string is reachable both ways.
struct TokenCandidate {
  std::string token;
  int32_t out_id = -1;              // output-vocab id, -1 when copy-only
  int32_t feed_id = Vocab::kUnk;    // merged id embedded if emitted
  std::vector<int64_t> positions;   // article positions holding this token
  double prob = 0.0;                // mixture probability
  bool decodable = true;            // PAD and SOS are never emitted
};

// Full per-step distribution: components plus the mixture over the union
// support. The candidate order is deterministic: output-vocabulary ids
// ascending, then copy-only tokens by first article occurrence.
struct StepDistribution {
  std::vector<double> gen_probs;    // over the output vocabulary
  std::vector<double> copy_weights; // attention weights per article position
  double switch_prob = 0.0;         // p(copy)
  std::vector<TokenCandidate> candidates;

  double mixture_total() const {
    double s = 0.0;
    for (const TokenCandidate& c : candidates) s += c.prob;
    return s;
  }

  // Mixture probability of a token string; 0 when unreachable.
  double prob_of(const std::string& token) const {
    for (const TokenCandidate& c : candidates)
      if (c.token == token) return c.prob;
    return 0.0;
  }
};

// Assembles the union-support mixture from component values.
inline StepDistribution make_step_distribution(
    std::vector<double> gen_probs, std::vector<double> copy_weights,
    double switch_prob, const std::vector<std::string>& input_tokens,
    const VocabPair& vocabs) {
  if (copy_weights.size() != input_tokens.size())
    throw std::invalid_argument(
        "make_step_distribution: weights/tokens length mismatch");
  if (gen_probs.size() != vocabs.output_size())
    throw std::invalid_argument(
        "make_step_distribution: generation probabilities sized " +
        std::to_string(gen_probs.size()) + ", vocabulary has " +
        std::to_string(vocabs.output_size()));
  StepDistribution d;
  d.gen_probs = std::move(gen_probs);
  d.copy_weights = std::move(copy_weights);
  d.switch_prob = switch_prob;

  std::map<std::string, std::vector<int64_t>> positions_of;
  for (size_t i = 0; i < input_tokens.size(); ++i)
    positions_of[input_tokens[i]].push_back(static_cast<int64_t>(i));

  const double p_copy = switch_prob;
  const double p_gen = 1.0 - switch_prob;
  auto copy_mass = [&](const std::vector<int64_t>& pos) {
    double m = 0.0;
    for (int64_t i : pos) m += d.copy_weights[static_cast<size_t>(i)];
    return m;
  };

  for (int32_t id = 0; id < static_cast<int32_t>(vocabs.output_size());
       ++id) {
    TokenCandidate c;
    c.token = vocabs.output.token(id);
    c.out_id = id;
    c.feed_id = id;  // output ids lead the merged index
    auto it = positions_of.find(c.token);
    if (it != positions_of.end()) c.positions = it->second;
    c.prob = p_gen * d.gen_probs[static_cast<size_t>(id)] +
             p_copy * copy_mass(c.positions);
    c.decodable = id != Vocab::kPad && id != Vocab::kSos;
    d.candidates.push_back(std::move(c));
  }
  // Copy-only tokens, ordered by first occurrence.
  std::vector<std::pair<int64_t, const std::string*>> rest;
  for (const auto& [tok, pos] : positions_of)
    if (!vocabs.output.contains(tok)) rest.emplace_back(pos[0], &tok);
  std::sort(rest.begin(), rest.end());
  for (const auto& [first_pos, tok] : rest) {
    TokenCandidate c;
    c.token = *tok;
    c.out_id = -1;
    c.feed_id = vocabs.feed_id(*tok);
    c.positions = positions_of[*tok];
    c.prob = p_copy * copy_mass(c.positions);
    d.candidates.push_back(std::move(c));
  }
  return d;
}

// Graph-side log mixture probability of one candidate:
// log( p(copy) * sum(attention at its positions) + p(gen) * gen_prob ),
// clamped at 1e-12. Used for the sampled path in policy-gradient training
// and for marginal supervision.
inline Var mixture_log_prob(Tape& t, Var switch_logit, Var attn_weights,
                            Var gen_log_probs,
                            const std::vector<int64_t>& positions,
                            int32_t out_id) {
  Var p_copy = t.sigmoid(switch_logit);
  Var one = t.constant(1.0);
  Var mix;
  bool have = false;
  if (!positions.empty()) {
    mix = t.mul(p_copy, t.gather_sum(attn_weights, positions));
    have = true;
  }
  if (out_id >= 0) {
    Var gen = t.mul(t.sub(one, p_copy),
                    t.exp(t.pick(gen_log_probs, static_cast<size_t>(out_id))));
    mix = have ? t.add(mix, gen) : gen;
    have = true;
  }
  if (!have)
    throw std::invalid_argument(
        "mixture_log_prob: token reachable by neither route");
  return t.log(t.clamp_min(mix, 1e-12));
}

}  // namespace intrasum
