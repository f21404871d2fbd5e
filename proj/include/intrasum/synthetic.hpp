#pragma once
// Synthetic dated corpus for desk-scale experiments. Articles are sequences
// of templated fact clauses plus distractors; the summary restates the
// marked facts in order. Entity subjects and rare object tokens are copied
// verbatim (copy supervision), while paraphrased verbs never appear in the
// article (generation supervision).

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "intrasum/common.hpp"
#include "intrasum/dataset.hpp"
#include "intrasum/lexicon.hpp"

namespace intrasum {

struct SyntheticConfig {
  size_t vocab_size = 80;      // approximate distinct content tokens
  size_t corpus_size = 256;
  size_t article_min = 25;
  size_t article_max = 60;
  size_t summary_min = 6;
  size_t summary_max = 18;
  double entity_density = 0.6;    // chance a fact's subject is an entity
  double paraphrase_rate = 0.35;  // chance a summary verb is a synonym
  double rare_rate = 0.15;        // chance a fact's object is a rare token
};

struct SyntheticCorpus {
  std::vector<RawDoc> docs;
  EntityLexicon lexicon;
};

namespace synth_detail {

struct Pools {
  std::vector<std::vector<std::string>> persons;   // two tokens
  std::vector<std::vector<std::string>> orgs;      // two tokens
  std::vector<std::string> locations;
  std::vector<std::string> misc;
  std::vector<std::string> plain_subjects;         // used as "the X"
  std::vector<std::pair<std::string, std::string>> verbs;  // base, synonym
  std::vector<std::string> objects;
  std::vector<std::string> filler_nouns;
  std::vector<std::string> adjectives;
  std::vector<std::string> rare;
};

inline Pools make_pools(size_t vocab_size) {
  Pools p;
  const char* first[] = {"alice", "victor", "nina",  "omar",  "ivy",
                         "hector", "lena",  "felix", "tamsin", "rufus"};
  const char* last[] = {"mercer", "holt",  "patel", "reyes", "okafor",
                        "lindqvist", "barret", "ono", "duarte", "kowalski"};
  for (const char* f : first)
    for (const char* l : last) p.persons.push_back({f, l});
  const char* org_a[] = {"acme", "orion", "zenith", "cobalt", "vertex"};
  const char* org_b[] = {"labs", "press", "works", "group", "partners"};
  for (const char* a : org_a)
    for (const char* b : org_b) p.orgs.push_back({a, b});
  p.locations = {"oslo",   "lagos",  "denver", "porto",  "kyoto",
                 "havana", "tallinn", "quito",  "mumbai", "perth"};
  p.misc = {"zephyr", "quasar", "monsoon", "solstice", "aurora"};
  p.plain_subjects = {"mayor",    "council", "committee", "director",
                      "owner",    "union",   "ministry",  "startup",
                      "festival", "museum"};
  p.verbs = {{"visited", "toured"},     {"bought", "acquired"},
             {"praised", "lauded"},     {"opened", "launched"},
             {"closed", "shuttered"},   {"built", "constructed"},
             {"sold", "offloaded"},     {"won", "claimed"},
             {"reviewed", "assessed"},  {"signed", "endorsed"}};
  p.objects = {"museum",  "factory", "bridge",  "stadium", "library",
               "harbor",  "market",  "theater", "garden",  "tower",
               "archive", "gallery", "school",  "airport", "canal"};
  p.filler_nouns = {"weather", "crowd",   "traffic", "morning", "report",
                    "meeting", "evening", "street",  "forecast", "budget"};
  p.adjectives = {"quiet", "busy", "cold", "warm", "late",
                  "early", "calm", "gray", "loud", "bright"};

  // Rare pool: syllable products, large enough that any sensible output
  // vocabulary limit leaves most of them out.
  const char* syl_a[] = {"zor", "vek", "mux", "qin", "fol",
                         "bax", "tiv", "gos", "ryn", "wub"};
  const char* syl_b[] = {"ard", "een", "oth", "ilk", "ume",
                         "ask", "orn", "ypt", "edge", "awn"};
  for (const char* a : syl_a)
    for (const char* b : syl_b) p.rare.push_back(std::string(a) + b);

  // vocab_size trims the content pools proportionally (never below 3).
  auto trim = [&](auto& pool, size_t share) {
    const size_t keep = std::max<size_t>(3, std::min(pool.size(), share));
    pool.resize(keep);
  };
  const size_t unit = std::max<size_t>(3, vocab_size / 8);
  trim(p.locations, unit);
  trim(p.misc, unit / 2 + 1);
  trim(p.plain_subjects, unit);
  trim(p.verbs, unit);
  trim(p.objects, unit);
  trim(p.filler_nouns, unit);
  trim(p.adjectives, unit);
  return p;
}

inline std::string iso_date(int64_t day_index) {
  // Days since 1996-01-01, proleptic Gregorian.
  int64_t y = 1996, m = 1, d = 1 + day_index;
  auto days_in = [](int64_t year, int64_t month) -> int64_t {
    static const int64_t base[] = {31, 28, 31, 30, 31, 30,
                                   31, 31, 30, 31, 30, 31};
    if (month == 2 &&
        (year % 4 == 0 && (year % 100 != 0 || year % 400 == 0)))
      return 29;
    return base[month - 1];
  };
  while (d > days_in(y, m)) {
    d -= days_in(y, m);
    if (++m > 12) {
      m = 1;
      ++y;
    }
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d",
                static_cast<int>(y % 10000), static_cast<int>(m),
                static_cast<int>(d));
  return buf;
}

struct Fact {
  std::vector<std::string> subject;
  size_t verb_index;
  std::string object;
  bool important;
};

}  // namespace synth_detail

inline void validate_synthetic_config(const SyntheticConfig& cfg) {
  auto reject = [](const std::string& why) {
    throw std::invalid_argument("SyntheticConfig: " + why);
  };
  if (cfg.corpus_size == 0) reject("corpus_size must be positive");
  if (cfg.article_min > cfg.article_max ||
      cfg.summary_min > cfg.summary_max)
    reject("length range minimum exceeds maximum");
  if (cfg.summary_min < 4) reject("summary_min must be at least 4");
  if (cfg.summary_max < cfg.summary_min + 6)
    reject("summary range narrower than one clause");
  if (cfg.article_min < 12) reject("article_min must be at least 12");
  if (cfg.article_max < cfg.article_min + 10)
    reject("article range narrower than one clause");
  if (cfg.article_max < 2 * cfg.summary_max + 8)
    reject("article_max too small to restate the summary facts");
  if (cfg.entity_density < 0.0 || cfg.entity_density > 1.0 ||
      cfg.paraphrase_rate < 0.0 || cfg.paraphrase_rate > 1.0 ||
      cfg.rare_rate < 0.0 || cfg.rare_rate > 1.0)
    reject("rates must lie in [0, 1]");
}

inline SyntheticCorpus generate_synthetic_corpus(const SyntheticConfig& cfg,
                                                 uint64_t seed) {
  using namespace synth_detail;
  validate_synthetic_config(cfg);
  const Pools pools = make_pools(cfg.vocab_size);

  SyntheticCorpus corpus;
  for (const auto& e : pools.persons)
    corpus.lexicon.add(e, EntityType::Person);
  for (const auto& e : pools.orgs)
    corpus.lexicon.add(e, EntityType::Organization);
  for (const auto& l : pools.locations)
    corpus.lexicon.add({l}, EntityType::Location);
  for (const auto& m : pools.misc)
    corpus.lexicon.add({m}, EntityType::Misc);

  Rng root(seed);
  for (size_t doc_i = 0; doc_i < cfg.corpus_size; ++doc_i) {
    Rng rng = root.fork(doc_i);

    auto pick_subject = [&]() -> std::vector<std::string> {
      if (rng.bernoulli(cfg.entity_density)) {
        switch (rng.below(4)) {
          case 0: return pools.persons[rng.below(pools.persons.size())];
          case 1: return pools.orgs[rng.below(pools.orgs.size())];
          case 2: return {pools.locations[rng.below(pools.locations.size())]};
          default: return {pools.misc[rng.below(pools.misc.size())]};
        }
      }
      return {"the", pools.plain_subjects[rng.below(
                         pools.plain_subjects.size())]};
    };

    auto pick_object = [&]() -> std::string {
      if (rng.bernoulli(cfg.rare_rate))
        return pools.rare[rng.below(pools.rare.size())];
      return pools.objects[rng.below(pools.objects.size())];
    };

    // Facts that will be summarized, built until the summary clears its
    // minimum length. A summary clause is subject + verb + object + ".",
    // at most 5 tokens, so with the validated ranges it always fits.
    std::vector<Fact> facts;
    std::vector<std::string> summary;
    while (summary.size() < cfg.summary_min) {
      Fact f;
      f.subject = pick_subject();
      f.verb_index = rng.below(pools.verbs.size());
      f.object = pick_object();
      f.important = true;
      const auto& verb_pair = pools.verbs[f.verb_index];
      const std::string verb = rng.bernoulli(cfg.paraphrase_rate)
                                   ? verb_pair.second
                                   : verb_pair.first;
      for (const std::string& s : f.subject) summary.push_back(s);
      summary.push_back(verb);
      summary.push_back(f.object);
      summary.push_back(".");
      facts.push_back(f);
    }

    // Article: summary facts in order, marked with "notably ,", with
    // distractor facts and filler clauses interleaved under a budget that
    // always leaves room for the remaining mandatory facts (a fact clause
    // is at most 8 tokens, a filler is 5).
    std::vector<std::string> article;
    auto append_fact = [&](const Fact& f) {
      if (f.important) {
        article.push_back("notably");
        article.push_back(",");
      }
      for (const std::string& s : f.subject) article.push_back(s);
      article.push_back(pools.verbs[f.verb_index].first);
      article.push_back("the");
      article.push_back(f.object);
      article.push_back(".");
    };
    auto append_filler = [&]() {
      article.push_back("the");
      article.push_back(
          pools.filler_nouns[rng.below(pools.filler_nouns.size())]);
      article.push_back("was");
      article.push_back(
          pools.adjectives[rng.below(pools.adjectives.size())]);
      article.push_back(".");
    };
    for (size_t next = 0; next < facts.size(); ++next) {
      append_fact(facts[next]);
      const size_t reserved = 8 * (facts.size() - next - 1);
      if (rng.bernoulli(0.25) &&
          article.size() + 8 + reserved <= cfg.article_max) {
        Fact d;
        d.subject = pick_subject();
        d.verb_index = rng.below(pools.verbs.size());
        d.object = pick_object();
        d.important = false;
        append_fact(d);
      } else if (rng.bernoulli(0.3) &&
                 article.size() + 5 + reserved <= cfg.article_max) {
        append_filler();
      }
    }
    const size_t target_len =
        cfg.article_min +
        rng.below(cfg.article_max - cfg.article_min + 1);
    while (article.size() < cfg.article_min ||
           (article.size() < target_len &&
            article.size() + 5 <= cfg.article_max))
      append_filler();

    if (article.size() > cfg.article_max)
      throw std::logic_error("synthetic article exceeded bound");

    auto join = [](const std::vector<std::string>& toks) {
      std::string s;
      for (size_t i = 0; i < toks.size(); ++i) {
        if (i) s.push_back(' ');
        s += toks[i];
      }
      return s;
    };
    corpus.docs.push_back(RawDoc{iso_date(static_cast<int64_t>(doc_i)),
                                 join(article), join(summary)});
  }
  return corpus;
}

}  // namespace intrasum
