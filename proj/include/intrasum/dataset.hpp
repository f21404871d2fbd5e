#pragma once
// On-disk formats: raw document corpus, encoded datasets, and vocabulary
// files. Everything is line-delimited JSON behind an explicit header record
// carrying a format name and version, so files are diffable and streamable.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "intrasum/example.hpp"
#include "intrasum/vocab.hpp"

namespace intrasum {

using json = nlohmann::json;

// Missing or unreadable file; maps to its own CLI exit code.
struct FileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Wrong format name or version; maps to its own CLI exit code.
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr int kCorpusVersion = 1;
constexpr int kDatasetVersion = 1;
constexpr int kVocabVersion = 1;

struct RawDoc {
  std::string date;      // ISO "YYYY-MM-DD"; sorts chronologically
  std::string article;   // raw text
  std::string abstract;  // raw text
};

namespace detail {

inline void write_header(std::ofstream& f, const char* format, int version) {
  json h;
  h["format"] = format;
  h["version"] = version;
  f << h.dump() << '\n';
}

inline void check_header(std::ifstream& f, const std::string& path,
                         const char* format, int version) {
  std::string line;
  if (!std::getline(f, line))
    throw SchemaError(path + ": missing header line");
  json h;
  try {
    h = json::parse(line);
  } catch (const json::exception& e) {
    throw SchemaError(path + ": unparseable header: " + e.what());
  }
  if (!h.contains("format") || h["format"] != format)
    throw SchemaError(path + ": expected format '" + format + "'");
  if (!h.contains("version") || h["version"] != version)
    throw SchemaError(path + ": unsupported version (want " +
                      std::to_string(version) + ")");
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw FileError("cannot write " + path);
  return f;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw FileError("cannot read " + path);
  return f;
}

}  // namespace detail

// ---- raw corpus ----

inline void save_corpus(const std::vector<RawDoc>& docs,
                        const std::string& path) {
  auto f = detail::open_out(path);
  detail::write_header(f, "intrasum.corpus", kCorpusVersion);
  for (const RawDoc& d : docs) {
    json j;
    j["date"] = d.date;
    j["article"] = d.article;
    j["abstract"] = d.abstract;
    f << j.dump() << '\n';
  }
}

inline std::vector<RawDoc> load_corpus(const std::string& path) {
  auto f = detail::open_in(path);
  detail::check_header(f, path, "intrasum.corpus", kCorpusVersion);
  std::vector<RawDoc> docs;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    docs.push_back(RawDoc{j.value("date", ""), j.at("article"),
                          j.at("abstract")});
  }
  return docs;
}

// ---- encoded dataset ----

inline void save_dataset(const std::vector<Example>& examples,
                         const std::string& path) {
  auto f = detail::open_out(path);
  detail::write_header(f, "intrasum.dataset", kDatasetVersion);
  for (const Example& ex : examples) {
    json j;
    j["date"] = ex.date;
    j["article"] = ex.article;
    j["input_ids"] = ex.input_ids;
    j["summary"] = ex.summary;
    j["target_ids"] = ex.target_ids;
    j["feed_ids"] = ex.feed_ids;
    j["u"] = std::vector<int>(ex.copy_switch.begin(), ex.copy_switch.end());
    j["ptr"] = ex.copy_pos;
    f << j.dump() << '\n';
  }
}

inline std::vector<Example> load_dataset(const std::string& path) {
  auto f = detail::open_in(path);
  detail::check_header(f, path, "intrasum.dataset", kDatasetVersion);
  std::vector<Example> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    Example ex;
    ex.date = j.value("date", "");
    ex.article = j.at("article").get<std::vector<std::string>>();
    ex.input_ids = j.at("input_ids").get<std::vector<int32_t>>();
    ex.summary = j.at("summary").get<std::vector<std::string>>();
    ex.target_ids = j.at("target_ids").get<std::vector<int32_t>>();
    ex.feed_ids = j.at("feed_ids").get<std::vector<int32_t>>();
    auto u = j.at("u").get<std::vector<int>>();
    ex.copy_switch.assign(u.begin(), u.end());
    ex.copy_pos = j.at("ptr").get<std::vector<int32_t>>();
    out.push_back(std::move(ex));
  }
  return out;
}

// ---- vocabulary file ----

inline void save_vocab(const VocabPair& vp, const std::string& path) {
  auto f = detail::open_out(path);
  json j;
  j["format"] = "intrasum.vocab";
  j["version"] = kVocabVersion;
  j["input_limit"] = vp.input.limit;
  j["output_limit"] = vp.output.limit;
  j["input_tokens"] = vp.input.id_to_token;
  j["output_tokens"] = vp.output.id_to_token;
  f << j.dump(2) << '\n';
}

inline VocabPair load_vocab(const std::string& path) {
  auto f = detail::open_in(path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw SchemaError(path + ": unparseable vocab file: " + e.what());
  }
  if (!j.contains("format") || j["format"] != "intrasum.vocab")
    throw SchemaError(path + ": not a vocab file");
  if (!j.contains("version") || j["version"] != kVocabVersion)
    throw SchemaError(path + ": unsupported vocab version");
  VocabPair vp;
  vp.input = Vocab::from_tokens(
      j.at("input_tokens").get<std::vector<std::string>>(),
      j.at("input_limit").get<size_t>());
  vp.output = Vocab::from_tokens(
      j.at("output_tokens").get<std::vector<std::string>>(),
      j.at("output_limit").get<size_t>());
  vp.build_merged();
  return vp;
}

// ---- chronological split ----

template <class T>
struct Split {
  std::vector<T> train, valid, test;
};

// Sorts ascending by date (stable on ties) and cuts at floor(90%) and
// floor(95%). Every record must carry a date.
template <class T>
Split<T> chronological_split(std::vector<T> docs) {
  for (const T& d : docs)
    if (d.date.empty())
      throw std::invalid_argument("chronological_split: record without date");
  std::stable_sort(docs.begin(), docs.end(),
                   [](const T& a, const T& b) { return a.date < b.date; });
  const size_t n = docs.size();
  const size_t n_train = n * 90 / 100;
  const size_t n_valid = n * 5 / 100;
  Split<T> s;
  s.train.assign(docs.begin(), docs.begin() + static_cast<long>(n_train));
  s.valid.assign(docs.begin() + static_cast<long>(n_train),
                 docs.begin() + static_cast<long>(n_train + n_valid));
  s.test.assign(docs.begin() + static_cast<long>(n_train + n_valid),
                docs.end());
  return s;
}

}  // namespace intrasum
