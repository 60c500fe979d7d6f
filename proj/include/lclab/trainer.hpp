#pragma once

#include <chrono>
#include <cstdint>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lclab/adam.hpp"
#include "lclab/augment.hpp"
#include "lclab/autodiff.hpp"
#include "lclab/checkpoint.hpp"
#include "lclab/corpus.hpp"
#include "lclab/encoder.hpp"
#include "lclab/losses.hpp"
#include "lclab/metrics.hpp"

namespace lclab {

enum class Objective { ce, scl, lcl };

inline Objective parse_objective(const std::string& s) {
  if (s == "ce") return Objective::ce;
  if (s == "scl") return Objective::scl;
  if (s == "lcl") return Objective::lcl;
  throw std::invalid_argument("unknown objective '" + s + "' (expected ce, scl or lcl)");
}

inline std::string objective_name(Objective o) {
  switch (o) {
    case Objective::ce: return "ce";
    case Objective::scl: return "scl";
    case Objective::lcl: return "lcl";
  }
  return "?";
}

struct TrainConfig {
  Objective objective = Objective::ce;
  double lr = 2e-5;  // paper-default grid: {1e-5, 2e-5, 3e-5}
  double alpha = 0.5;
  double tau = 0.3;
  std::size_t batch_size = 10;
  std::size_t max_epochs = 30;
  std::size_t patience = 3;
  std::uint64_t seed = 1;
  double augment_rate = 0.3;
  EncoderDims dims{};
  std::size_t min_count = 1;
  std::size_t max_seq_len = 64;
  double dropout = 0.1;
  double weight_decay = 1e-2;

  void validate() const {
    if (lr <= 0.0 || lr >= 1.0) throw std::invalid_argument("learning_rate must be in (0,1)");
    if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("alpha must be in [0,1]");
    if (tau <= 0.0) throw std::invalid_argument("tau must be > 0");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
    if (patience < 1) throw std::invalid_argument("patience must be >= 1");
    if (augment_rate <= 0.0 || augment_rate > 1.0)
      throw std::invalid_argument("augment_rate must be in (0,1]");
    if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("dropout must be in [0,1)");
    if (dims.embed == 0 || dims.hidden == 0 || dims.repr == 0)
      throw std::invalid_argument("encoder dimensions must be positive");
  }
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double loss_w = 0.0;
  double loss_e = 0.0;
  double loss_lcl = 0.0;  // the contrastive component (SCL term for scl runs)
  double loss_f = 0.0;
  double val_accuracy = 0.0;
  double wall_seconds = 0.0;  // kept in memory only, never serialized
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;  // 1-based
};

/// Early stopping on validation accuracy; ties keep the earlier epoch.
class EarlyStopper {
 public:
  explicit EarlyStopper(std::size_t patience) : patience_(patience) {}

  bool observe(std::size_t epoch, double val_accuracy) {
    if (val_accuracy > best_value_) {
      best_value_ = val_accuracy;
      best_epoch_ = epoch;
      strikes_ = 0;
      return true;
    }
    ++strikes_;
    return false;
  }

  bool should_stop() const { return strikes_ >= patience_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_value() const { return best_value_; }

 private:
  std::size_t patience_;
  std::size_t best_epoch_ = 0;
  std::size_t strikes_ = 0;
  double best_value_ = -1.0;
};

/// The deployable artefact: primary encoder, classifier head and tokenizer.
/// The weighting network is a training-time device and is never part of it.
struct TrainedModel {
  Tokenizer tokenizer;
  LabelVocab vocab;
  EncoderDims dims;
  EncoderParams encoder;
  ClassifierHead head;
  TrainConfig config;
  std::size_t best_epoch = 0;

  std::vector<NamedParam> parameters() const {
    auto out = encoder.parameters("phi");
    auto h = head.parameters("head");
    out.insert(out.end(), h.begin(), h.end());
    return out;
  }
};

struct EvalReport {
  double accuracy = 0.0;
  double weighted_f1_score = 0.0;
  ConfusionMatrix confusion;
  Tensor scores;  // N x C prediction scores (row softmax)
  std::vector<int> predictions;
};

namespace detail {

inline std::vector<std::vector<int>> encode_examples(const Tokenizer& tk,
                                                     const std::vector<Example>& examples) {
  std::vector<std::vector<int>> ids;
  ids.reserve(examples.size());
  for (const auto& ex : examples) ids.push_back(tk.encode_text(ex.text));
  return ids;
}

inline std::vector<std::vector<int>> encode_token_rows(
    const Tokenizer& tk, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::vector<int>> ids;
  ids.reserve(rows.size());
  for (const auto& row : rows) ids.push_back(tk.encode_tokens(row));
  return ids;
}

inline Tensor eval_scores(const Tokenizer& tk, const EncoderParams& enc, const ClassifierHead& head,
                          const std::vector<Example>& examples) {
  Tape tape;
  Rng unused(0);
  Var h = encode(tape, enc, encode_examples(tk, examples));
  return softmax_values(classify(tape, head, h, false, unused).value());
}

inline std::vector<int> argmax_rows(const Tensor& scores) {
  std::vector<int> preds(scores.dim(0), 0);
  for (std::size_t i = 0; i < scores.dim(0); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < scores.dim(1); ++j)
      if (scores.at2(i, j) > scores.at2(i, best)) best = j;  // ties keep the lower index
    preds[i] = static_cast<int>(best);
  }
  return preds;
}

struct Snapshot {
  std::vector<Tensor> values;

  static Snapshot of(const std::vector<NamedParam>& params) {
    Snapshot s;
    for (const auto& p : params) s.values.push_back(p.var.value());
    return s;
  }

  void restore(const std::vector<NamedParam>& params) const {
    for (std::size_t i = 0; i < params.size(); ++i) params[i].var.mutable_value() = values[i];
  }
};

}  // namespace detail

inline EvalReport evaluate(const TrainedModel& model, const std::vector<Example>& examples) {
  if (examples.empty()) throw std::invalid_argument("evaluate: no examples");
  EvalReport report;
  report.scores = detail::eval_scores(model.tokenizer, model.encoder, model.head, examples);
  report.predictions = detail::argmax_rows(report.scores);
  std::vector<int> truths;
  truths.reserve(examples.size());
  for (const auto& ex : examples) truths.push_back(ex.label);
  report.confusion = confusion_from_predictions(truths, report.predictions, model.vocab.size());
  report.accuracy = accuracy(report.confusion);
  report.weighted_f1_score = weighted_f1(report.confusion);
  return report;
}

/// Joint training loop. Every batch feeds the primary encoder (and, for the
/// lcl objective, the weighting network); one Adam step per network per
/// batch; early stopping on validation accuracy restores the best epoch's
/// parameters.
inline std::pair<TrainedModel, TrainHistory> train(const DatasetSplit& split,
                                                   const TrainConfig& config,
                                                   const SynonymLexicon* lexicon,
                                                   std::ostream* progress = &std::cerr) {
  config.validate();
  if (split.train.empty()) throw std::invalid_argument("train: empty training split");
  if (split.validation.empty()) throw std::invalid_argument("train: empty validation split");
  const bool contrastive = config.objective != Objective::ce;
  if (contrastive && lexicon == nullptr)
    throw std::invalid_argument("train: objective " + objective_name(config.objective) +
                                " requires a synonym lexicon");

  TrainedModel model;
  model.tokenizer = build_tokenizer(split.train, config.min_count, config.max_seq_len);
  model.vocab = split.vocab;
  model.dims = config.dims;
  model.config = config;
  const std::size_t num_classes = split.vocab.size();

  Rng init_rng = make_stream(config.seed, Stream::init);
  model.encoder = init_encoder(model.tokenizer.vocab_size(), config.dims, init_rng);
  model.head = init_head(config.dims.repr, config.dims.hidden, num_classes, init_rng,
                         config.dropout);
  std::optional<WeightingNetwork> psi;
  if (config.objective == Objective::lcl)
    psi = init_weighting(model.tokenizer.vocab_size(), config.dims, num_classes, init_rng,
                         config.dropout);

  const auto phi_params = model.parameters();
  const AdamConfig adam_cfg{config.lr, 0.9, 0.999, 1e-06, config.weight_decay};
  Adam phi_opt(adam_cfg);
  std::optional<Adam> psi_opt;
  if (psi) psi_opt.emplace(adam_cfg);

  TrainHistory history;
  EarlyStopper stopper(config.patience);
  detail::Snapshot best = detail::Snapshot::of(phi_params);

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const auto batches =
        batch_iter(split.train, BatchPlan{config.batch_size, config.seed, false}, epoch);
    EpochStats stats;
    stats.epoch = epoch;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      Rng dropout_phi = make_stream(config.seed, Stream::dropout, epoch, 2 * b);
      Rng dropout_psi = make_stream(config.seed, Stream::dropout, epoch, 2 * b + 1);
      Tape tape;
      double batch_w = 0.0, batch_e = 0.0, batch_c = 0.0, batch_f = 0.0;
      try {
        if (config.objective == Objective::ce) {
          std::vector<int> labels;
          for (const auto& ex : batches[b]) labels.push_back(ex.label);
          Var h = encode(tape, model.encoder,
                         detail::encode_examples(model.tokenizer, batches[b]));
          Var logits = classify(tape, model.head, h, true, dropout_phi);
          Var loss_e = cross_entropy(tape, logits, labels);
          batch_e = loss_e.scalar();
          batch_f = batch_e;
          tape.backward(loss_e);
          phi_opt.step(phi_params);
        } else {
          Rng augment_rng = make_stream(config.seed, Stream::augment, epoch, b);
          const AugmentedBatch ab =
              make_contrastive_batch(batches[b], *lexicon, augment_rng, config.augment_rate);
          const auto ids = detail::encode_token_rows(model.tokenizer, ab.tokens);
          Var h = encode(tape, model.encoder, ids);
          Var logits = classify(tape, model.head, h, true, dropout_phi);
          Var loss_e = cross_entropy(tape, logits, ab.labels);
          batch_e = loss_e.scalar();
          if (config.objective == Objective::scl) {
            Var loss_scl = l_scl(tape, h, ab.labels, ab.pairing, config.tau);
            batch_c = loss_scl.scalar();
            Var total = add(tape, scalar_mul(tape, loss_e, config.alpha),
                            scalar_mul(tape, loss_scl, 1.0 - config.alpha));
            batch_f = total.scalar();
            tape.backward(total);
            phi_opt.step(phi_params);
          } else {
            const auto w_out = weighting_forward(tape, *psi, ids, true, dropout_psi);
            Var loss_w = cross_entropy(tape, w_out.logits, ab.labels);
            Var loss_lcl = l_lcl(tape, h, ab.labels, ab.pairing, w_out.confidences, config.tau);
            Var total = joint_objective(tape, loss_w, loss_e, loss_lcl, config.alpha);
            batch_w = loss_w.scalar();
            batch_c = loss_lcl.scalar();
            batch_f = total.scalar();
            tape.backward(total);
            phi_opt.step(phi_params);
            psi_opt->step(psi->parameters());
          }
        }
      } catch (const std::runtime_error& e) {
        throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(b + 1) + ": " + e.what());
      }
      if (!std::isfinite(batch_f))
        throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(b + 1) + ": non-finite loss");
      stats.loss_w += batch_w;
      stats.loss_e += batch_e;
      stats.loss_lcl += batch_c;
      stats.loss_f += batch_f;
    }
    const double nb = static_cast<double>(batches.size());
    stats.loss_w /= nb;
    stats.loss_e /= nb;
    stats.loss_lcl /= nb;
    stats.loss_f /= nb;

    const Tensor val_scores =
        detail::eval_scores(model.tokenizer, model.encoder, model.head, split.validation);
    const auto val_preds = detail::argmax_rows(val_scores);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < split.validation.size(); ++i)
      if (val_preds[i] == split.validation[i].label) ++correct;
    stats.val_accuracy = static_cast<double>(correct) / static_cast<double>(split.validation.size());
    stats.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (stopper.observe(epoch, stats.val_accuracy)) best = detail::Snapshot::of(phi_params);
    history.epochs.push_back(stats);
    if (progress)
      (*progress) << "epoch " << epoch << " loss_f " << stats.loss_f << " val_acc "
                  << stats.val_accuracy << " (" << stats.wall_seconds << "s)\n";
    if (stopper.should_stop()) break;
  }
  best.restore(phi_params);
  history.best_epoch = stopper.best_epoch();
  model.best_epoch = stopper.best_epoch();
  return {std::move(model), std::move(history)};
}

// ---------------------------------------------------------------------------
// Seed batteries
// ---------------------------------------------------------------------------

struct SeedRun {
  std::uint64_t seed = 0;
  TrainedModel model;
  TrainHistory history;
  EvalReport test_report;
};

struct SeedBattery {
  std::vector<SeedRun> runs;
  std::vector<double> accuracies;
  std::vector<double> f1_scores;
  SampleStats accuracy_stats;
  SampleStats f1_stats;
};

/// Independent trainings over a list of seeds, evaluated on the test split.
/// Runs may execute in parallel; outputs are ordered by the seed list.
inline SeedBattery run_seeds(const DatasetSplit& split, const TrainConfig& config,
                             const std::vector<std::uint64_t>& seeds, const SynonymLexicon* lexicon,
                             std::size_t jobs = 1, std::ostream* progress = &std::cerr) {
  if (seeds.empty()) throw std::invalid_argument("run_seeds: no seeds");
  SeedBattery battery;
  battery.runs.resize(seeds.size());

  auto run_one = [&](std::size_t i) {
    TrainConfig cfg = config;
    cfg.seed = seeds[i];
    auto [model, history] = train(split, cfg, lexicon, jobs > 1 ? nullptr : progress);
    SeedRun r;
    r.seed = seeds[i];
    r.test_report = evaluate(model, split.test);
    r.model = std::move(model);
    r.history = std::move(history);
    battery.runs[i] = std::move(r);
  };

  if (jobs <= 1) {
    for (std::size_t i = 0; i < seeds.size(); ++i) run_one(i);
  } else {
    std::vector<std::future<void>> pending;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      pending.push_back(std::async(std::launch::async, run_one, i));
      if (pending.size() == jobs) {
        for (auto& f : pending) f.get();
        pending.clear();
      }
    }
    for (auto& f : pending) f.get();
  }

  for (const auto& r : battery.runs) {
    battery.accuracies.push_back(r.test_report.accuracy);
    battery.f1_scores.push_back(r.test_report.weighted_f1_score);
  }
  battery.accuracy_stats = sample_stats(battery.accuracies);
  battery.f1_stats = sample_stats(battery.f1_scores);
  return battery;
}

// ---------------------------------------------------------------------------
// Model serialization: parameter blocks + tokenizer TSV + JSON metadata in
// one indexed container. The weighting network is deliberately absent.
// ---------------------------------------------------------------------------

inline nlohmann::json config_to_json(const TrainConfig& c) {
  return nlohmann::json{{"objective", objective_name(c.objective)},
                        {"learning_rate", c.lr},
                        {"alpha", c.alpha},
                        {"tau", c.tau},
                        {"batch_size", c.batch_size},
                        {"max_epochs", c.max_epochs},
                        {"patience", c.patience},
                        {"seed", c.seed},
                        {"augment_rate", c.augment_rate},
                        {"embed_dim", c.dims.embed},
                        {"hidden_dim", c.dims.hidden},
                        {"repr_dim", c.dims.repr},
                        {"min_count", c.min_count},
                        {"max_seq_len", c.max_seq_len},
                        {"dropout", c.dropout},
                        {"weight_decay", c.weight_decay}};
}

inline TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.objective = parse_objective(j.at("objective").get<std::string>());
  c.lr = j.at("learning_rate").get<double>();
  c.alpha = j.at("alpha").get<double>();
  c.tau = j.at("tau").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.max_epochs = j.at("max_epochs").get<std::size_t>();
  c.patience = j.at("patience").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.augment_rate = j.at("augment_rate").get<double>();
  c.dims.embed = j.at("embed_dim").get<std::size_t>();
  c.dims.hidden = j.at("hidden_dim").get<std::size_t>();
  c.dims.repr = j.at("repr_dim").get<std::size_t>();
  c.min_count = j.at("min_count").get<std::size_t>();
  c.max_seq_len = j.at("max_seq_len").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  return c;
}

inline void save_model(const TrainedModel& model, const std::string& path) {
  blockfile::Writer w;
  nlohmann::json meta{{"format", "lclab-model"},
                      {"version", 1},
                      {"best_epoch", model.best_epoch},
                      {"labels", model.vocab.names},
                      {"config", config_to_json(model.config)}};
  w.add_bytes("__meta__", meta.dump());
  w.add_bytes("__tokenizer__", tokenizer_to_tsv(model.tokenizer));
  for (const auto& p : model.parameters()) w.add_tensor(p.name, p.var.value());
  w.write(path);
}

inline TrainedModel load_model(const std::string& path) {
  const auto file = blockfile::File::read(path);
  TrainedModel model;
  const auto meta = nlohmann::json::parse(file.bytes("__meta__"));
  if (meta.at("format").get<std::string>() != "lclab-model")
    throw std::runtime_error("load_model: not a model checkpoint: " + path);
  model.best_epoch = meta.at("best_epoch").get<std::size_t>();
  model.vocab.names = meta.at("labels").get<std::vector<std::string>>();
  model.config = config_from_json(meta.at("config"));
  model.dims = model.config.dims;
  model.tokenizer = tokenizer_from_tsv(file.bytes("__tokenizer__"));
  auto load = [&](const std::string& name) { return Var::parameter(file.tensor(name)); };
  model.encoder.embedding = load("phi.embedding");
  model.encoder.w1 = load("phi.w1");
  model.encoder.b1 = load("phi.b1");
  model.encoder.w2 = load("phi.w2");
  model.encoder.b2 = load("phi.b2");
  model.head.w1 = load("head.w1");
  model.head.b1 = load("head.b1");
  model.head.w2 = load("head.w2");
  model.head.b2 = load("head.b2");
  model.head.dropout_p = model.config.dropout;
  return model;
}

}  // namespace lclab
