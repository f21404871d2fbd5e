#pragma once
// Rule-based tokenization and NYT-style text normalization.
//
// Tokenizer rule: lowercase, split on whitespace, then peel leading and
// trailing ASCII punctuation off each chunk as single-character tokens.
// Internal punctuation (hyphens, periods, apostrophes) stays inside the
// token, so "u.s.-based" survives as one token.
//
// Normalization rules, applied in this fixed order:
//   1. lowercase
//   2. abstract only: delete "(s)" and "(m)" marks
//   3. both sides: replace every maximal digit run with "0"
//   4. abstract only: split on ";"; drop segments made up solely of media
//      words (photo/graph/chart/map/table/drawing, singular or plural);
//      rejoin the remaining segments with " . "
//   5. abstract only: repeatedly drop a trailing media word
//   6. collapse whitespace

#include <cctype>
#include <string>
#include <vector>

namespace intrasum {

inline std::vector<std::string> tokenize(const std::string& text) {
  auto is_punct = [](char c) {
    return std::ispunct(static_cast<unsigned char>(c)) != 0;
  };
  std::vector<std::string> out;
  size_t i = 0;
  const size_t n = text.size();
  while (i < n) {
    while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i >= n) break;
    size_t j = i;
    while (j < n && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    std::string chunk = text.substr(i, j - i);
    for (char& c : chunk) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    size_t lo = 0, hi = chunk.size();
    while (lo < hi && is_punct(chunk[lo])) {
      out.push_back(std::string(1, chunk[lo]));
      ++lo;
    }
    std::vector<std::string> tail;
    while (hi > lo && is_punct(chunk[hi - 1])) {
      tail.push_back(std::string(1, chunk[hi - 1]));
      --hi;
    }
    if (hi > lo) out.push_back(chunk.substr(lo, hi - lo));
    for (auto it = tail.rbegin(); it != tail.rend(); ++it)
      out.push_back(*it);
    i = j;
  }
  return out;
}

namespace detail {

inline bool is_media_word(const std::string& w) {
  static const char* base[] = {"photo", "graph", "chart",
                               "map",   "table", "drawing"};
  for (const char* b : base) {
    if (w == b) return true;
    if (w.size() == std::string(b).size() + 1 && w.back() == 's' &&
        w.compare(0, w.size() - 1, b) == 0)
      return true;
  }
  return false;
}

inline std::string lowercase(std::string s) {
  for (char& c : s)
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline std::string replace_digit_runs(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  size_t i = 0;
  while (i < s.size()) {
    if (std::isdigit(static_cast<unsigned char>(s[i]))) {
      out.push_back('0');
      while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i])))
        ++i;
    } else {
      out.push_back(s[i]);
      ++i;
    }
  }
  return out;
}

inline std::string erase_all(std::string s, const std::string& what) {
  size_t pos;
  while ((pos = s.find(what)) != std::string::npos) s.erase(pos, what.size());
  return s;
}

inline std::string collapse_ws(const std::string& s) {
  std::string out;
  bool in_ws = true;  // trims leading whitespace
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      in_ws = true;
    } else {
      if (in_ws && !out.empty()) out.push_back(' ');
      out.push_back(c);
      in_ws = false;
    }
  }
  return out;
}

inline std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace detail

struct NormalizedPair {
  std::string article;
  std::string abstract;
};

inline std::string normalize_article(const std::string& text) {
  return detail::collapse_ws(
      detail::replace_digit_runs(detail::lowercase(text)));
}

inline std::string normalize_abstract(const std::string& text) {
  std::string s = detail::lowercase(text);
  s = detail::erase_all(std::move(s), "(s)");
  s = detail::erase_all(std::move(s), "(m)");
  s = detail::replace_digit_runs(s);

  // Segment at semicolons; a segment whose words are all media words is
  // dropped entirely.
  std::vector<std::string> kept;
  size_t start = 0;
  while (start <= s.size()) {
    size_t semi = s.find(';', start);
    std::string seg = semi == std::string::npos
                          ? s.substr(start)
                          : s.substr(start, semi - start);
    std::vector<std::string> words = detail::split_ws(seg);
    bool all_media = !words.empty();
    for (const std::string& w : words)
      if (!detail::is_media_word(w)) {
        all_media = false;
        break;
      }
    if (!words.empty() && !all_media) kept.push_back(detail::collapse_ws(seg));
    if (semi == std::string::npos) break;
    start = semi + 1;
  }
  std::string joined;
  for (size_t i = 0; i < kept.size(); ++i) {
    if (i) joined += " . ";
    joined += kept[i];
  }

  // Trailing media words (with an optional trailing period) are dropped.
  std::vector<std::string> words = detail::split_ws(joined);
  while (!words.empty()) {
    std::string last = words.back();
    while (!last.empty() && last.back() == '.') last.pop_back();
    if (!detail::is_media_word(last)) break;
    words.pop_back();
  }
  std::string out;
  for (size_t i = 0; i < words.size(); ++i) {
    if (i) out.push_back(' ');
    out += words[i];
  }
  return out;
}

inline NormalizedPair normalize_nyt(const std::string& article_text,
                                    const std::string& abstract_text) {
  return NormalizedPair{normalize_article(article_text),
                        normalize_abstract(abstract_text)};
}

}  // namespace intrasum
