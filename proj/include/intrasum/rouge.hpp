#pragma once
// Self-contained ROUGE-1/2/L: full-length F1, limited-length recall, and
// the training reward. ROUGE-L treats the whole summary as one sequence.

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "intrasum/porter.hpp"

namespace intrasum {

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  static RougeScore from_pr(double p, double r) {
    RougeScore s;
    s.precision = p;
    s.recall = r;
    s.f1 = (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    return s;
  }
};

namespace rouge_detail {

inline std::vector<std::string> maybe_stem(
    const std::vector<std::string>& tokens, bool stem) {
  if (!stem) return tokens;
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const std::string& t : tokens) out.push_back(porter_stem(t));
  return out;
}

inline std::map<std::vector<std::string>, int64_t> ngram_counts(
    const std::vector<std::string>& tokens, size_t n) {
  std::map<std::vector<std::string>, int64_t> counts;
  if (tokens.size() >= n)
    for (size_t i = 0; i + n <= tokens.size(); ++i)
      counts[std::vector<std::string>(tokens.begin() + static_cast<long>(i),
                                      tokens.begin() +
                                          static_cast<long>(i + n))] += 1;
  return counts;
}

inline size_t lcs_length(const std::vector<std::string>& a,
                         const std::vector<std::string>& b) {
  const size_t n = a.size(), m = b.size();
  std::vector<size_t> prev(m + 1, 0), cur(m + 1, 0);
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j) {
      if (a[i - 1] == b[j - 1])
        cur[j] = prev[j - 1] + 1;
      else
        cur[j] = std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

}  // namespace rouge_detail

// Clipped n-gram overlap. Empty hypothesis or reference scores zero.
inline RougeScore rouge_n(const std::vector<std::string>& hypothesis,
                          const std::vector<std::string>& reference, size_t n,
                          bool stem = false) {
  if (n < 1) throw std::invalid_argument("rouge_n: n must be at least 1");
  auto hyp = rouge_detail::maybe_stem(hypothesis, stem);
  auto ref = rouge_detail::maybe_stem(reference, stem);
  auto hc = rouge_detail::ngram_counts(hyp, n);
  auto rc = rouge_detail::ngram_counts(ref, n);
  int64_t hyp_total = 0, ref_total = 0, match = 0;
  for (auto& [g, c] : hc) hyp_total += c;
  for (auto& [g, c] : rc) ref_total += c;
  for (auto& [g, c] : hc) {
    auto it = rc.find(g);
    if (it != rc.end()) match += std::min(c, it->second);
  }
  if (hyp_total == 0 || ref_total == 0) return RougeScore{};
  return RougeScore::from_pr(
      static_cast<double>(match) / static_cast<double>(hyp_total),
      static_cast<double>(match) / static_cast<double>(ref_total));
}

// Longest-common-subsequence F1 over the summaries as single sequences.
inline RougeScore rouge_l(const std::vector<std::string>& hypothesis,
                          const std::vector<std::string>& reference,
                          bool stem = false) {
  if (hypothesis.empty() || reference.empty()) return RougeScore{};
  auto hyp = rouge_detail::maybe_stem(hypothesis, stem);
  auto ref = rouge_detail::maybe_stem(reference, stem);
  const double lcs =
      static_cast<double>(rouge_detail::lcs_length(hyp, ref));
  return RougeScore::from_pr(lcs / static_cast<double>(hyp.size()),
                             lcs / static_cast<double>(ref.size()));
}

enum class RougeMetric { Rouge1, Rouge2, RougeL };

inline const char* rouge_metric_name(RougeMetric m) {
  switch (m) {
    case RougeMetric::Rouge1: return "rouge1";
    case RougeMetric::Rouge2: return "rouge2";
    case RougeMetric::RougeL: return "rougeL";
  }
  return "?";
}

inline RougeScore rouge_score(const std::vector<std::string>& hyp,
                              const std::vector<std::string>& ref,
                              RougeMetric metric, bool stem = false) {
  switch (metric) {
    case RougeMetric::Rouge1: return rouge_n(hyp, ref, 1, stem);
    case RougeMetric::Rouge2: return rouge_n(hyp, ref, 2, stem);
    case RougeMetric::RougeL: return rouge_l(hyp, ref, stem);
  }
  return RougeScore{};
}

// Recall after truncating the hypothesis to the reference's length.
inline double limited_length_recall(const std::vector<std::string>& hypothesis,
                                    const std::vector<std::string>& reference,
                                    RougeMetric metric, bool stem = false) {
  std::vector<std::string> truncated(
      hypothesis.begin(),
      hypothesis.begin() + static_cast<long>(
                               std::min(hypothesis.size(), reference.size())));
  return rouge_score(truncated, reference, metric, stem).recall;
}

struct RewardConfig {
  RougeMetric metric = RougeMetric::RougeL;
};

// Training reward: F1 of the configured metric, without stemming.
inline double reward(const std::vector<std::string>& sequence,
                     const std::vector<std::string>& reference,
                     const RewardConfig& cfg = RewardConfig{}) {
  return rouge_score(sequence, reference, cfg.metric, false).f1;
}

}  // namespace intrasum
