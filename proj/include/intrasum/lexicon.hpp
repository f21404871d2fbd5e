#pragma once
// Entity lexicon: typed token sequences with longest-match lookup. Stands in
// for an NER tagger when preparing pointer supervision; nothing at decode
// time depends on it.
//
// File format: one entry per line, "TYPE<TAB>token sequence".

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace intrasum {

enum class EntityType { Person, Location, Organization, Misc };

inline const char* entity_type_name(EntityType t) {
  switch (t) {
    case EntityType::Person: return "PERSON";
    case EntityType::Location: return "LOCATION";
    case EntityType::Organization: return "ORGANIZATION";
    case EntityType::Misc: return "MISC";
  }
  return "?";
}

inline EntityType entity_type_from(const std::string& s) {
  if (s == "PERSON") return EntityType::Person;
  if (s == "LOCATION") return EntityType::Location;
  if (s == "ORGANIZATION") return EntityType::Organization;
  if (s == "MISC") return EntityType::Misc;
  throw std::invalid_argument("EntityLexicon: unknown entity type '" + s + "'");
}

class EntityLexicon {
 public:
  struct Entry {
    std::vector<std::string> tokens;
    EntityType type;
  };

  void add(std::vector<std::string> tokens, EntityType type) {
    if (tokens.empty())
      throw std::invalid_argument("EntityLexicon: empty entry");
    auto& bucket = by_first_[tokens[0]];
    bucket.push_back(Entry{std::move(tokens), type});
    std::stable_sort(bucket.begin(), bucket.end(),
                     [](const Entry& a, const Entry& b) {
                       return a.tokens.size() > b.tokens.size();
                     });
    ++count_;
  }

  size_t size() const { return count_; }

  // Length of the longest entity starting at tokens[pos]; 0 if none.
  size_t match_at(const std::vector<std::string>& tokens, size_t pos) const {
    if (pos >= tokens.size()) return 0;
    auto it = by_first_.find(tokens[pos]);
    if (it == by_first_.end()) return 0;
    for (const Entry& e : it->second) {
      if (pos + e.tokens.size() > tokens.size()) continue;
      bool ok = true;
      for (size_t k = 1; k < e.tokens.size(); ++k)
        if (tokens[pos + k] != e.tokens[k]) {
          ok = false;
          break;
        }
      if (ok) return e.tokens.size();
    }
    return 0;
  }

  std::vector<Entry> entries() const {
    std::vector<Entry> out;
    for (const auto& [first, bucket] : by_first_)
      out.insert(out.end(), bucket.begin(), bucket.end());
    return out;
  }

  void save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("EntityLexicon: cannot write " + path);
    for (const Entry& e : entries()) {
      f << entity_type_name(e.type) << '\t';
      for (size_t i = 0; i < e.tokens.size(); ++i) {
        if (i) f << ' ';
        f << e.tokens[i];
      }
      f << '\n';
    }
  }

  static EntityLexicon load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("EntityLexicon: cannot read " + path);
    EntityLexicon lex;
    std::string line;
    size_t lineno = 0;
    while (std::getline(f, line)) {
      ++lineno;
      if (line.empty()) continue;
      size_t tab = line.find('\t');
      if (tab == std::string::npos)
        throw std::runtime_error("EntityLexicon: missing TAB at " + path +
                                 ":" + std::to_string(lineno));
      EntityType type = entity_type_from(line.substr(0, tab));
      std::istringstream rest(line.substr(tab + 1));
      std::vector<std::string> toks;
      std::string tok;
      while (rest >> tok) toks.push_back(tok);
      lex.add(std::move(toks), type);
    }
    return lex;
  }

 private:
  std::map<std::string, std::vector<Entry>> by_first_;
  size_t count_ = 0;
};

}  // namespace intrasum
