#pragma once
// Encoded training examples with per-step pointer supervision.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "intrasum/lexicon.hpp"
#include "intrasum/vocab.hpp"

namespace intrasum {

struct Example {
  std::vector<std::string> article;   // normalized+tokenized input tokens
  std::vector<int32_t> input_ids;     // merged-vocab ids, UNK-mapped
  std::vector<std::string> summary;   // normalized+tokenized target tokens
  std::vector<int32_t> target_ids;    // output-vocab ids, UNK-mapped
  std::vector<int32_t> feed_ids;      // merged ids embedded as decoder input
  std::vector<uint8_t> copy_switch;   // 1 when the step is copy-supervised
  std::vector<int32_t> copy_pos;      // source position for copy steps, else -1
  std::string date;                   // optional, ISO "YYYY-MM-DD"

  size_t input_len() const { return article.size(); }
  size_t target_len() const { return summary.size(); }
};

// Copy supervision: a summary token gets u=1 when it is part of a lexicon
// entity and occurs in the article, or when it is outside the output
// vocabulary but occurs in the article. The supervised position is always
// the token's first article occurrence. A token that is out-of-vocabulary
// and absent from the article falls back to u=0 with an UNK target id.
inline Example encode_example(const std::vector<std::string>& article_tokens,
                              const std::vector<std::string>& summary_tokens,
                              const VocabPair& vocabs,
                              const EntityLexicon& lexicon,
                              size_t max_input_len = 800,
                              size_t max_output_len = 100,
                              const std::string& date = "") {
  if (article_tokens.empty())
    throw std::invalid_argument("encode_example: empty article");
  if (summary_tokens.empty())
    throw std::invalid_argument("encode_example: empty summary");

  Example ex;
  ex.date = date;
  ex.article.assign(article_tokens.begin(),
                    article_tokens.begin() +
                        static_cast<long>(std::min(article_tokens.size(),
                                                   max_input_len)));
  ex.summary.assign(summary_tokens.begin(),
                    summary_tokens.begin() +
                        static_cast<long>(std::min(summary_tokens.size(),
                                                   max_output_len)));

  ex.input_ids.reserve(ex.article.size());
  for (const std::string& tok : ex.article)
    ex.input_ids.push_back(vocabs.input_id(tok));

  // Entity spans in the summary, longest match first.
  std::vector<uint8_t> is_entity(ex.summary.size(), 0);
  for (size_t t = 0; t < ex.summary.size();) {
    size_t len = lexicon.match_at(ex.summary, t);
    if (len == 0) {
      ++t;
      continue;
    }
    for (size_t k = 0; k < len && t + k < ex.summary.size(); ++k)
      is_entity[t + k] = 1;
    t += len;
  }

  auto first_occurrence = [&](const std::string& tok) -> int32_t {
    for (size_t i = 0; i < ex.article.size(); ++i)
      if (ex.article[i] == tok) return static_cast<int32_t>(i);
    return -1;
  };

  const size_t m = ex.summary.size();
  ex.target_ids.resize(m);
  ex.feed_ids.resize(m);
  ex.copy_switch.assign(m, 0);
  ex.copy_pos.assign(m, -1);
  for (size_t t = 0; t < m; ++t) {
    const std::string& tok = ex.summary[t];
    ex.target_ids[t] = vocabs.output_id(tok);
    ex.feed_ids[t] = vocabs.feed_id(tok);
    const bool oov = ex.target_ids[t] == Vocab::kUnk;
    if (is_entity[t] || oov) {
      int32_t pos = first_occurrence(tok);
      if (pos >= 0) {
        ex.copy_switch[t] = 1;
        ex.copy_pos[t] = pos;
      }
    }
  }
  return ex;
}

inline void validate_example(const Example& ex, size_t max_input_len = 800,
                             size_t max_output_len = 100) {
  auto fail = [](const std::string& why) {
    throw std::runtime_error("Example invariant violated: " + why);
  };
  if (ex.article.empty() || ex.article.size() > max_input_len)
    fail("input length " + std::to_string(ex.article.size()));
  if (ex.summary.empty() || ex.summary.size() > max_output_len)
    fail("target length " + std::to_string(ex.summary.size()));
  if (ex.input_ids.size() != ex.article.size()) fail("input id count");
  const size_t m = ex.summary.size();
  if (ex.target_ids.size() != m || ex.feed_ids.size() != m ||
      ex.copy_switch.size() != m || ex.copy_pos.size() != m)
    fail("per-step array lengths");
  for (size_t t = 0; t < m; ++t) {
    if (ex.copy_switch[t]) {
      if (ex.copy_pos[t] < 0 ||
          static_cast<size_t>(ex.copy_pos[t]) >= ex.article.size())
        fail("copy position out of range at step " + std::to_string(t));
      if (ex.article[static_cast<size_t>(ex.copy_pos[t])] != ex.summary[t])
        fail("copy position token mismatch at step " + std::to_string(t));
    } else if (ex.copy_pos[t] != -1) {
      fail("copy position set on a generation step");
    }
  }
}

}  // namespace intrasum
