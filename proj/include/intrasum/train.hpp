#pragma once
// Mini-batch training loop (ML, RL, ML+RL), periodic validation with
// best-checkpoint retention, beam-search evaluation, and the cumulative
// length-bucket comparison table.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "intrasum/adam.hpp"
#include "intrasum/checkpoint.hpp"
#include "intrasum/loss.hpp"

namespace intrasum {

enum class Objective { Ml, Rl, MlRl };

inline const char* objective_name(Objective o) {
  switch (o) {
    case Objective::Ml: return "ml";
    case Objective::Rl: return "rl";
    case Objective::MlRl: return "ml+rl";
  }
  return "?";
}

inline Objective objective_from(const std::string& s) {
  if (s == "ml") return Objective::Ml;
  if (s == "rl") return Objective::Rl;
  if (s == "ml+rl" || s == "mlrl") return Objective::MlRl;
  throw std::invalid_argument("unknown objective '" + s + "'");
}

struct TrainingConfig {
  Objective objective = Objective::Ml;
  double gamma = 0.9984;           // ML+RL mixing weight
  double learning_rate = 0.001;    // 0.0001 is the usual RL / ML+RL value
  int64_t batch_size = 50;
  double sampling_prob = 0.25;     // scheduled sampling for teacher forcing
  RougeMetric reward_metric = RougeMetric::RougeL;
  int64_t max_steps = 0;
  uint64_t seed = 0;
  int64_t checkpoint_every = 500;
  int64_t validate_every = 200;
  double clip_norm = 2.0;
  size_t max_summary_len = 100;
  LikelihoodMode likelihood_mode = LikelihoodMode::SupervisedBranch;

  void validate() const {
    if (gamma < 0.0 || gamma > 1.0)
      throw std::invalid_argument("TrainingConfig: gamma must be in [0, 1]");
    if (sampling_prob < 0.0 || sampling_prob > 1.0)
      throw std::invalid_argument(
          "TrainingConfig: sampling_prob must be in [0, 1]");
    if (batch_size < 1)
      throw std::invalid_argument("TrainingConfig: batch_size must be >= 1");
    if (!(learning_rate > 0.0))
      throw std::invalid_argument("TrainingConfig: learning_rate must be > 0");
    if (max_steps < 0)
      throw std::invalid_argument("TrainingConfig: max_steps must be >= 0");
  }
};

struct TrainLogEntry {
  int64_t step = 0;
  double l_ml = 0.0;
  double l_rl = 0.0;
  double l_mixed = 0.0;
  double reward_greedy = 0.0;
  double reward_sample = 0.0;
  double grad_norm = 0.0;
  int64_t clamp_events = 0;
  int64_t skipped_examples = 0;
};

inline void save_train_log(const std::vector<TrainLogEntry>& entries,
                           const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("save_train_log: cannot write " + path);
  nlohmann::json header;
  header["format"] = "intrasum.trainlog";
  header["version"] = 1;
  f << header.dump() << '\n';
  for (const TrainLogEntry& e : entries) {
    nlohmann::json j;
    j["step"] = e.step;
    j["l_ml"] = e.l_ml;
    j["l_rl"] = e.l_rl;
    j["l_mixed"] = e.l_mixed;
    j["reward_greedy"] = e.reward_greedy;
    j["reward_sample"] = e.reward_sample;
    j["grad_norm"] = e.grad_norm;
    j["clamp_events"] = e.clamp_events;
    j["skipped"] = e.skipped_examples;
    f << j.dump() << '\n';
  }
}

// Mean greedy-decode reward over a set; used for validation and probes.
inline double mean_greedy_reward(const ModelParams& params,
                                 const VocabPair& vocabs,
                                 const std::vector<Example>& examples,
                                 size_t max_len,
                                 const RewardConfig& cfg = RewardConfig{}) {
  if (examples.empty()) return 0.0;
  double total = 0.0;
  for (const Example& ex : examples) {
    DecodeResult d =
        greedy_decode(params, vocabs, ex.article, ex.input_ids, max_len);
    total += reward(d.tokens, ex.summary, cfg);
  }
  return total / static_cast<double>(examples.size());
}

struct TrainOutcome {
  bool diverged = false;
  int64_t steps_done = 0;
  double best_val_reward = 0.0;
  int64_t best_val_step = 0;
  std::string best_checkpoint;
  std::string last_checkpoint;
};

class Trainer {
 public:
  Trainer(TrainingConfig cfg, ModelParams params, VocabPair vocabs)
      : cfg_(cfg), params_(std::move(params)), vocabs_(std::move(vocabs)) {
    cfg_.validate();
    meta_.input_vocab_hash = vocabs_.input.content_hash();
    meta_.output_vocab_hash = vocabs_.output.content_hash();
  }

  const ModelParams& params() const { return params_; }
  const std::vector<TrainLogEntry>& log() const { return log_; }

  // Runs the configured number of optimizer steps, writing checkpoints and
  // the log under out_dir. A non-finite loss aborts the run before the
  // parameter update, so the written checkpoints stay good.
  TrainOutcome run(const std::vector<Example>& train,
                   const std::vector<Example>& valid,
                   const std::string& out_dir) {
    namespace fs = std::filesystem;
    if (train.empty()) throw std::invalid_argument("Trainer: empty dataset");
    fs::create_directories(out_dir);
    TrainOutcome outcome;
    outcome.last_checkpoint = (fs::path(out_dir) / "ckpt_last.bin").string();
    outcome.best_checkpoint = (fs::path(out_dir) / "ckpt_best.bin").string();
    const std::string log_path = (fs::path(out_dir) / "trainlog.jsonl").string();

    save_checkpoint(params_, meta_, outcome.last_checkpoint);
    Rng rng(cfg_.seed);
    std::vector<size_t> order(train.size());
    std::iota(order.begin(), order.end(), size_t{0});
    size_t cursor = order.size();  // triggers an initial shuffle

    auto named = params_.named_tensors();
    std::vector<Tensor*> param_ptrs;
    for (auto& [name, tp] : named) param_ptrs.push_back(tp);

    for (int64_t step = 1; step <= cfg_.max_steps; ++step) {
      std::vector<Tensor> acc(param_ptrs.size());
      for (size_t i = 0; i < acc.size(); ++i)
        acc[i].reshape_zero_like(*param_ptrs[i]);

      TrainLogEntry entry;
      entry.step = step;
      const int64_t bs = cfg_.batch_size;
      bool finite = true;
      for (int64_t k = 0; k < bs; ++k) {
        if (cursor >= order.size()) {
          rng.shuffle(order);
          cursor = 0;
        }
        const Example& ex = train[order[cursor++]];
        Tape tape;
        BoundParams bound = bind_params(tape, params_);
        Var loss{};
        double l_ml = 0.0, l_rl = 0.0;
        bool skip = false;
        if (cfg_.objective == Objective::Ml) {
          MlOptions mo;
          mo.sampling_prob = cfg_.sampling_prob;
          mo.mode = cfg_.likelihood_mode;
          MlLossResult ml = ml_loss_on(tape, bound, ex, vocabs_, mo, rng);
          loss = ml.loss;
          l_ml = ml.value;
        } else {
          RlOptions ro;
          ro.max_len = cfg_.max_summary_len;
          ro.reward_cfg.metric = cfg_.reward_metric;
          RlLossResult rl =
              rl_loss_on(tape, bound, params_, ex, vocabs_, ro, rng);
          entry.reward_greedy += rl.reward_greedy;
          entry.reward_sample += rl.reward_sample;
          l_rl = rl.value;
          skip = rl.skipped;
          if (cfg_.objective == Objective::Rl) {
            loss = rl.loss;
          } else {
            MlOptions mo;
            mo.sampling_prob = cfg_.sampling_prob;
            mo.mode = cfg_.likelihood_mode;
            MlLossResult ml = ml_loss_on(tape, bound, ex, vocabs_, mo, rng);
            l_ml = ml.value;
            loss = mixed_loss_var(tape, rl.loss, ml.loss, cfg_.gamma);
          }
        }
        const double value = tape.val(loss).item();
        if (!std::isfinite(value)) {
          finite = false;
          break;
        }
        entry.l_ml += l_ml;
        entry.l_rl += l_rl;
        entry.l_mixed += mixed_loss(l_rl, l_ml, effective_gamma());
        entry.clamp_events += tape.clamp_events;
        if (skip) {
          entry.skipped_examples += 1;
          continue;
        }
        tape.backward(loss);
        std::vector<Tensor> grads = collect_grads(tape, bound);
        const double inv = 1.0 / static_cast<double>(bs);
        for (size_t i = 0; i < acc.size(); ++i)
          for (size_t jj = 0; jj < acc[i].size(); ++jj)
            acc[i].v[jj] += grads[i].v[jj] * inv;
      }
      if (!finite) {
        outcome.diverged = true;
        outcome.steps_done = step - 1;
        save_train_log(log_, log_path);
        return outcome;  // last written checkpoints remain valid
      }
      const double b = static_cast<double>(bs);
      entry.l_ml /= b;
      entry.l_rl /= b;
      entry.l_mixed /= b;
      entry.reward_greedy /= b;
      entry.reward_sample /= b;

      std::vector<Tensor*> grad_ptrs;
      for (Tensor& g : acc) grad_ptrs.push_back(&g);
      entry.grad_norm = clip_global_norm(grad_ptrs, cfg_.clip_norm);
      std::vector<const Tensor*> grad_view(grad_ptrs.begin(),
                                           grad_ptrs.end());
      try {
        adam_step(param_ptrs, grad_view, adam_, cfg_.learning_rate);
      } catch (const std::runtime_error&) {
        // Non-finite gradients: abort before touching the parameters.
        outcome.diverged = true;
        outcome.steps_done = step - 1;
        save_train_log(log_, log_path);
        return outcome;
      }
      log_.push_back(entry);

      if (!valid.empty() && cfg_.validate_every > 0 &&
          step % cfg_.validate_every == 0) {
        RewardConfig rc;
        rc.metric = cfg_.reward_metric;
        const double val = mean_greedy_reward(params_, vocabs_, valid,
                                              cfg_.max_summary_len, rc);
        if (val > outcome.best_val_reward || outcome.best_val_step == 0) {
          outcome.best_val_reward = val;
          outcome.best_val_step = step;
          save_checkpoint(params_, meta_, outcome.best_checkpoint);
        }
      }
      if (cfg_.checkpoint_every > 0 && step % cfg_.checkpoint_every == 0)
        save_checkpoint(params_, meta_, outcome.last_checkpoint);
      outcome.steps_done = step;
    }
    save_checkpoint(params_, meta_, outcome.last_checkpoint);
    if (outcome.best_val_step == 0)
      save_checkpoint(params_, meta_, outcome.best_checkpoint);
    save_train_log(log_, log_path);
    return outcome;
  }

 private:
  double effective_gamma() const {
    switch (cfg_.objective) {
      case Objective::Ml: return 0.0;
      case Objective::Rl: return 1.0;
      case Objective::MlRl: return cfg_.gamma;
    }
    return 0.0;
  }

  TrainingConfig cfg_;
  ModelParams params_;
  VocabPair vocabs_;
  AdamState adam_;
  CheckpointMeta meta_;
  std::vector<TrainLogEntry> log_;
};

// ---- evaluation ----

struct EvalOptions {
  int32_t beam_width = 5;
  size_t max_len = 100;
  bool stem = true;            // full-length F1 uses the stemmer
  bool limited_length = false; // report truncated recall instead of F1
  int32_t workers = 1;
};

struct ExampleEval {
  size_t index = 0;
  std::vector<std::string> decoded;
  RougeScore r1, r2, rl;
  double recall1 = 0.0, recall2 = 0.0, recall_l = 0.0;
  size_t ref_len = 0;
  bool empty_decode = false;
};

struct EvalReport {
  std::vector<ExampleEval> examples;
  RougeScore mean1, mean2, mean_l;
  double mean_recall1 = 0.0, mean_recall2 = 0.0, mean_recall_l = 0.0;
  size_t empty_decodes = 0;
};

inline EvalReport evaluate_split(const ModelParams& params,
                                 const VocabPair& vocabs,
                                 const std::vector<Example>& examples,
                                 const EvalOptions& opt) {
  EvalReport report;
  report.examples.resize(examples.size());
  const int32_t workers =
      std::max<int32_t>(1, std::min<int32_t>(opt.workers,
                                             static_cast<int32_t>(
                                                 examples.size() ? examples.size() : 1)));

  auto score_one = [&](size_t i) {
    const Example& ex = examples[i];
    BeamConfig bc;
    bc.width = opt.beam_width;
    bc.max_len = opt.max_len;
    DecodeResult d =
        beam_search(params, vocabs, ex.article, ex.input_ids, bc);
    ExampleEval ev;
    ev.index = i;
    ev.decoded = d.tokens;
    ev.ref_len = ex.summary.size();
    ev.empty_decode = d.tokens.empty();
    ev.r1 = rouge_n(d.tokens, ex.summary, 1, opt.stem);
    ev.r2 = rouge_n(d.tokens, ex.summary, 2, opt.stem);
    ev.rl = rouge_l(d.tokens, ex.summary, opt.stem);
    ev.recall1 =
        limited_length_recall(d.tokens, ex.summary, RougeMetric::Rouge1,
                              opt.stem);
    ev.recall2 =
        limited_length_recall(d.tokens, ex.summary, RougeMetric::Rouge2,
                              opt.stem);
    ev.recall_l =
        limited_length_recall(d.tokens, ex.summary, RougeMetric::RougeL,
                              opt.stem);
    report.examples[i] = std::move(ev);
  };

  if (workers == 1) {
    for (size_t i = 0; i < examples.size(); ++i) score_one(i);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (int32_t w = 0; w < workers; ++w)
      pool.emplace_back([&]() {
        while (true) {
          const size_t i = next.fetch_add(1);
          if (i >= examples.size()) break;
          score_one(i);
        }
      });
    for (std::thread& th : pool) th.join();
  }

  const double n = examples.empty()
                       ? 1.0
                       : static_cast<double>(examples.size());
  auto add = [](RougeScore& acc, const RougeScore& s) {
    acc.precision += s.precision;
    acc.recall += s.recall;
    acc.f1 += s.f1;
  };
  for (const ExampleEval& ev : report.examples) {
    add(report.mean1, ev.r1);
    add(report.mean2, ev.r2);
    add(report.mean_l, ev.rl);
    report.mean_recall1 += ev.recall1;
    report.mean_recall2 += ev.recall2;
    report.mean_recall_l += ev.recall_l;
    if (ev.empty_decode) ++report.empty_decodes;
  }
  auto div = [n](RougeScore& s) {
    s.precision /= n;
    s.recall /= n;
    s.f1 /= n;
  };
  div(report.mean1);
  div(report.mean2);
  div(report.mean_l);
  report.mean_recall1 /= n;
  report.mean_recall2 /= n;
  report.mean_recall_l /= n;
  return report;
}

inline void save_eval_report(const EvalReport& report,
                             const EvalOptions& opt,
                             const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("save_eval_report: cannot write " + path);
  nlohmann::json header;
  header["format"] = "intrasum.report";
  header["version"] = 1;
  header["stem"] = opt.stem;
  header["limited_length"] = opt.limited_length;
  f << header.dump() << '\n';
  auto score_json = [](const RougeScore& s) {
    nlohmann::json j;
    j["p"] = s.precision;
    j["r"] = s.recall;
    j["f"] = s.f1;
    return j;
  };
  for (const ExampleEval& ev : report.examples) {
    nlohmann::json j;
    j["index"] = ev.index;
    j["ref_len"] = ev.ref_len;
    j["decoded"] = ev.decoded;
    if (opt.limited_length) {
      j["recall1"] = ev.recall1;
      j["recall2"] = ev.recall2;
      j["recallL"] = ev.recall_l;
    } else {
      j["rouge1"] = score_json(ev.r1);
      j["rouge2"] = score_json(ev.r2);
      j["rougeL"] = score_json(ev.rl);
    }
    if (ev.empty_decode) j["empty"] = true;
    f << j.dump() << '\n';
  }
  nlohmann::json means;
  means["mean"] = true;
  if (opt.limited_length) {
    means["recall1"] = report.mean_recall1;
    means["recall2"] = report.mean_recall2;
    means["recallL"] = report.mean_recall_l;
  } else {
    means["rouge1"] = score_json(report.mean1);
    means["rouge2"] = score_json(report.mean2);
    means["rougeL"] = score_json(report.mean_l);
  }
  means["empty_decodes"] = report.empty_decodes;
  f << means.dump() << '\n';
}

// ---- length-bucket comparison (cumulative relative improvement) ----

struct BucketRow {
  size_t ref_len = 0;       // inclusive threshold
  size_t count = 0;         // examples with reference length <= threshold
  double mean_a = 0.0;      // cumulative mean ROUGE-1 F1 of model A
  double mean_b = 0.0;
  double rel_improvement = 0.0;  // (mean_a - mean_b) / mean_b, 0 if mean_b=0
};

inline std::vector<BucketRow> length_bucket_diagnostic(
    const EvalReport& model_a, const EvalReport& model_b) {
  if (model_a.examples.size() != model_b.examples.size())
    throw std::invalid_argument(
        "length_bucket_diagnostic: reports cover different example counts");
  const size_t n = model_a.examples.size();
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](size_t x, size_t y) {
    return model_a.examples[x].ref_len < model_a.examples[y].ref_len;
  });
  std::vector<BucketRow> rows;
  double sum_a = 0.0, sum_b = 0.0;
  size_t count = 0;
  for (size_t pos = 0; pos < n; ++pos) {
    const size_t i = idx[pos];
    if (model_a.examples[i].ref_len != model_b.examples[i].ref_len)
      throw std::invalid_argument(
          "length_bucket_diagnostic: reports disagree on reference lengths");
    sum_a += model_a.examples[i].r1.f1;
    sum_b += model_b.examples[i].r1.f1;
    ++count;
    const bool last_of_len =
        pos + 1 == n || model_a.examples[idx[pos + 1]].ref_len !=
                            model_a.examples[i].ref_len;
    if (!last_of_len) continue;
    BucketRow row;
    row.ref_len = model_a.examples[i].ref_len;
    row.count = count;
    row.mean_a = sum_a / static_cast<double>(count);
    row.mean_b = sum_b / static_cast<double>(count);
    row.rel_improvement =
        row.mean_b > 0.0 ? (row.mean_a - row.mean_b) / row.mean_b : 0.0;
    rows.push_back(row);
  }
  return rows;
}

inline void save_bucket_table(const std::vector<BucketRow>& rows,
                              const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("save_bucket_table: cannot write " + path);
  f << "ref_len\tcount\tmean_rouge1_a\tmean_rouge1_b\trel_improvement\n";
  for (const BucketRow& r : rows)
    f << r.ref_len << '\t' << r.count << '\t' << r.mean_a << '\t' << r.mean_b
      << '\t' << r.rel_improvement << '\n';
}

}  // namespace intrasum
