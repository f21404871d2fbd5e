#pragma once
// Frequency-ranked vocabularies with reserved ids, and the merged indexing
// scheme that backs the shared embedding matrix: output-vocabulary tokens
// occupy ids [0, output_size) so the generation softmax can address the
// leading rows, and input-only tokens follow.

#include <algorithm>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "intrasum/common.hpp"

namespace intrasum {

struct Vocab {
  static constexpr int32_t kPad = 0;
  static constexpr int32_t kUnk = 1;
  static constexpr int32_t kSos = 2;
  static constexpr int32_t kEos = 3;
  static constexpr size_t kReserved = 4;

  std::vector<std::string> id_to_token;
  std::unordered_map<std::string, int32_t> token_to_id;
  size_t limit = 0;

  static const char* reserved_token(int32_t id) {
    switch (id) {
      case kPad: return "<pad>";
      case kUnk: return "<unk>";
      case kSos: return "<sos>";
      case kEos: return "<eos>";
    }
    return nullptr;
  }

  static Vocab with_limit(size_t limit) {
    if (limit < kReserved)
      throw std::invalid_argument("Vocab: limit must be at least " +
                                  std::to_string(kReserved));
    Vocab v;
    v.limit = limit;
    for (size_t i = 0; i < kReserved; ++i)
      v.push(reserved_token(static_cast<int32_t>(i)));
    return v;
  }

  static Vocab from_tokens(const std::vector<std::string>& tokens,
                           size_t limit) {
    Vocab v = with_limit(limit);
    for (size_t i = kReserved; i < tokens.size(); ++i) v.push(tokens[i]);
    for (size_t i = 0; i < std::min(tokens.size(), kReserved); ++i)
      if (tokens[i] != reserved_token(static_cast<int32_t>(i)))
        throw std::invalid_argument("Vocab: reserved ids 0..3 are fixed");
    return v;
  }

  size_t size() const { return id_to_token.size(); }

  bool contains(const std::string& tok) const {
    return token_to_id.count(tok) != 0;
  }

  // Id of tok, UNK-mapped.
  int32_t lookup(const std::string& tok) const {
    auto it = token_to_id.find(tok);
    return it == token_to_id.end() ? kUnk : it->second;
  }

  const std::string& token(int32_t id) const {
    if (id < 0 || static_cast<size_t>(id) >= id_to_token.size())
      throw std::out_of_range("Vocab: id " + std::to_string(id) +
                              " out of range");
    return id_to_token[static_cast<size_t>(id)];
  }

  uint64_t content_hash() const {
    uint64_t h = 0xcbf29ce484222325ull;
    const char sep = '\n';
    for (const std::string& t : id_to_token) {
      h = fnv1a64(t, h);
      h = fnv1a64(&sep, 1, h);
    }
    return h;
  }

  void push(const std::string& tok) {
    if (id_to_token.size() >= limit)
      throw std::logic_error("Vocab: limit exceeded");
    token_to_id.emplace(tok, static_cast<int32_t>(id_to_token.size()));
    id_to_token.push_back(tok);
  }
};

// Input and output vocabularies plus the merged embedding index.
struct VocabPair {
  Vocab input;
  Vocab output;
  std::vector<std::string> merged_tokens;
  std::unordered_map<std::string, int32_t> merged_id_of;

  size_t merged_size() const { return merged_tokens.size(); }
  size_t output_size() const { return output.size(); }

  // Merged id for a token regardless of which side it came from; UNK-mapped.
  // Used to embed decoder inputs, including copied tokens.
  int32_t feed_id(const std::string& tok) const {
    auto it = merged_id_of.find(tok);
    return it == merged_id_of.end() ? Vocab::kUnk : it->second;
  }

  // Merged id used to encode article tokens: a token outside the *input*
  // vocabulary reads as UNK even if the output side knows it.
  int32_t input_id(const std::string& tok) const {
    return input.contains(tok) ? feed_id(tok) : Vocab::kUnk;
  }

  int32_t output_id(const std::string& tok) const {
    return output.lookup(tok);
  }

  const std::string& merged_token(int32_t id) const {
    if (id < 0 || static_cast<size_t>(id) >= merged_tokens.size())
      throw std::out_of_range("VocabPair: merged id out of range");
    return merged_tokens[static_cast<size_t>(id)];
  }

  void build_merged() {
    merged_tokens = output.id_to_token;
    merged_id_of.clear();
    for (size_t i = 0; i < merged_tokens.size(); ++i)
      merged_id_of.emplace(merged_tokens[i], static_cast<int32_t>(i));
    for (const std::string& tok : input.id_to_token) {
      if (merged_id_of.count(tok)) continue;
      merged_id_of.emplace(tok, static_cast<int32_t>(merged_tokens.size()));
      merged_tokens.push_back(tok);
    }
  }
};

// Most-frequent-first vocabulary construction; ties break lexicographically.
// Input side counts article tokens, output side counts summary tokens.
inline VocabPair build_vocab(
    const std::vector<std::vector<std::string>>& articles,
    const std::vector<std::vector<std::string>>& summaries,
    size_t input_limit, size_t output_limit) {
  if (input_limit < Vocab::kReserved || output_limit < Vocab::kReserved)
    throw std::invalid_argument("build_vocab: limits below reserved count");
  if (articles.empty() && summaries.empty())
    throw std::invalid_argument("build_vocab: empty corpus");

  auto ranked = [](const std::vector<std::vector<std::string>>& docs) {
    std::map<std::string, int64_t> counts;  // ordered: deterministic ties
    for (const auto& doc : docs)
      for (const std::string& tok : doc) counts[tok] += 1;
    std::vector<std::pair<std::string, int64_t>> items(counts.begin(),
                                                       counts.end());
    std::stable_sort(items.begin(), items.end(),
                     [](const auto& a, const auto& b) {
                       if (a.second != b.second) return a.second > b.second;
                       return a.first < b.first;
                     });
    return items;
  };

  VocabPair vp;
  vp.input = Vocab::with_limit(input_limit);
  vp.output = Vocab::with_limit(output_limit);
  for (const auto& [tok, cnt] : ranked(articles)) {
    if (vp.input.size() >= input_limit) break;
    if (!vp.input.contains(tok)) vp.input.push(tok);
  }
  for (const auto& [tok, cnt] : ranked(summaries)) {
    if (vp.output.size() >= output_limit) break;
    if (!vp.output.contains(tok)) vp.output.push(tok);
  }
  vp.build_merged();
  return vp;
}

}  // namespace intrasum
