#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "lclab/csvio.hpp"
#include "lclab/trainer.hpp"
#include "toy_data.hpp"

using namespace lclab;

TEST_CASE("early stopping keeps the earlier epoch on ties and decreases") {
  EarlyStopper stopper(2);
  CHECK(stopper.observe(1, 0.9));   // epoch 1 becomes best
  CHECK_FALSE(stopper.observe(2, 0.8));
  CHECK_FALSE(stopper.should_stop());
  CHECK_FALSE(stopper.observe(3, 0.7));
  CHECK(stopper.should_stop());     // stops after epoch 3
  CHECK(stopper.best_epoch() == 1);

  EarlyStopper ties(3);
  ties.observe(1, 0.5);
  CHECK_FALSE(ties.observe(2, 0.5));  // tie is not an improvement
  CHECK(ties.best_epoch() == 1);
}

TEST_CASE("cross-entropy training fits a separable corpus") {
  const auto split = testsupport::toy_split();
  auto cfg = testsupport::toy_config(Objective::ce);
  cfg.max_epochs = 20;
  auto [model, history] = train(split, cfg, nullptr, nullptr);
  const auto train_report = evaluate(model, split.train);
  CHECK(train_report.accuracy >= 0.99);
  CHECK(history.best_epoch >= 1);
  CHECK(history.best_epoch <= history.epochs.size());
}

TEST_CASE("training histories are bit-identical for identical config and seed") {
  const auto split = testsupport::toy_split();
  const auto lex = testsupport::toy_lexicon();
  auto cfg = testsupport::toy_config(Objective::lcl, 17);
  cfg.max_epochs = 4;
  auto [m1, h1] = train(split, cfg, &lex, nullptr);
  auto [m2, h2] = train(split, cfg, &lex, nullptr);
  CHECK(history_to_csv(h1) == history_to_csv(h2));
  // parameters identical too
  const auto p1 = m1.parameters();
  const auto p2 = m2.parameters();
  REQUIRE(p1.size() == p2.size());
  for (std::size_t i = 0; i < p1.size(); ++i) {
    REQUIRE(p1[i].var.value().numel() == p2[i].var.value().numel());
    for (std::size_t j = 0; j < p1[i].var.value().numel(); ++j)
      CHECK(p1[i].var.value()[j] == p2[i].var.value()[j]);
  }
}

TEST_CASE("contrastive objectives require a lexicon") {
  const auto split = testsupport::toy_split();
  CHECK_THROWS_AS(train(split, testsupport::toy_config(Objective::scl), nullptr, nullptr),
                  std::invalid_argument);
  CHECK_THROWS_AS(train(split, testsupport::toy_config(Objective::lcl), nullptr, nullptr),
                  std::invalid_argument);
}

TEST_CASE("with alpha one the joint loss collapses to the two cross entropies") {
  const auto split = testsupport::toy_split(12, 4, 4);
  const auto lex = testsupport::toy_lexicon();
  auto cfg = testsupport::toy_config(Objective::lcl);
  cfg.alpha = 1.0;
  cfg.max_epochs = 3;
  auto [model, history] = train(split, cfg, &lex, nullptr);
  for (const auto& e : history.epochs)
    CHECK(e.loss_f == Catch::Approx(e.loss_w + e.loss_e).margin(1e-12));
}

TEST_CASE("scl histories report the contrastive component") {
  const auto split = testsupport::toy_split(12, 4, 4);
  const auto lex = testsupport::toy_lexicon();
  auto cfg = testsupport::toy_config(Objective::scl);
  cfg.max_epochs = 2;
  auto [model, history] = train(split, cfg, &lex, nullptr);
  for (const auto& e : history.epochs) {
    CHECK(e.loss_w == 0.0);
    CHECK(e.loss_lcl > 0.0);  // the SCL term
    CHECK(e.loss_f ==
          Catch::Approx(cfg.alpha * e.loss_e + (1.0 - cfg.alpha) * e.loss_lcl).margin(1e-12));
  }
}

namespace {

/// Model rigged to predict class 0 for every input (zero head weights make
/// all logits equal and the argmax tie-break picks the lowest index).
TrainedModel constant_model(const DatasetSplit& split) {
  TrainedModel m;
  m.tokenizer = build_tokenizer(split.train, 1, 16);
  m.vocab = split.vocab;
  m.dims = {4, 4, 4};
  Rng rng(3);
  m.encoder = init_encoder(m.tokenizer.vocab_size(), m.dims, rng);
  m.head.w1 = Var::parameter(Tensor({4, 4}));
  m.head.b1 = Var::parameter(Tensor({4}));
  m.head.w2 = Var::parameter(Tensor({4, split.vocab.size()}));
  m.head.b2 = Var::parameter(Tensor({split.vocab.size()}));
  return m;
}

}  // namespace

TEST_CASE("a constant classifier scores one half on a balanced two-class set") {
  const auto split = testsupport::toy_split(10, 4, 8);
  const auto model = constant_model(split);
  const auto report = evaluate(model, split.test);
  CHECK(report.accuracy == Catch::Approx(0.5));
  for (int p : report.predictions) CHECK(p == 0);
  // scores are valid distributions
  for (std::size_t i = 0; i < report.scores.dim(0); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < report.scores.dim(1); ++j) s += report.scores.at2(i, j);
    CHECK(s == Catch::Approx(1.0).margin(1e-9));
  }
  // confusion collapses onto the first column
  CHECK(report.confusion.col_sum(0) == report.confusion.total());
}

TEST_CASE("a fitted model evaluates to a diagonal confusion matrix") {
  const auto split = testsupport::toy_split();
  auto cfg = testsupport::toy_config(Objective::ce);
  cfg.max_epochs = 20;
  auto [model, history] = train(split, cfg, nullptr, nullptr);
  const auto report = evaluate(model, split.train);
  if (report.accuracy == 1.0) {
    CHECK(report.weighted_f1_score == Catch::Approx(1.0).margin(1e-12));
    for (std::size_t r = 0; r < report.confusion.num_classes; ++r)
      for (std::size_t c = 0; c < report.confusion.num_classes; ++c)
        if (r != c) CHECK(report.confusion.at(r, c) == 0);
  }
  CHECK_THROWS_AS(evaluate(model, {}), std::invalid_argument);
}

TEST_CASE("seed batteries aggregate order-free with zero sd for equal seeds") {
  const auto split = testsupport::toy_split(10, 4, 6);
  auto cfg = testsupport::toy_config(Objective::ce);
  cfg.max_epochs = 3;

  const auto twice = run_seeds(split, cfg, {7, 7}, nullptr, 1, nullptr);
  REQUIRE(twice.accuracies.size() == 2);
  CHECK(twice.accuracies[0] == twice.accuracies[1]);
  CHECK(twice.accuracy_stats.sd == 0.0);

  const auto fwd = run_seeds(split, cfg, {1, 2, 3}, nullptr, 1, nullptr);
  const auto rev = run_seeds(split, cfg, {3, 2, 1}, nullptr, 1, nullptr);
  REQUIRE(fwd.accuracies.size() == 3);
  CHECK(fwd.accuracy_stats.mean == Catch::Approx(rev.accuracy_stats.mean).margin(1e-15));
  CHECK(fwd.accuracy_stats.sd == Catch::Approx(rev.accuracy_stats.sd).margin(1e-15));
  CHECK(fwd.f1_stats.mean == Catch::Approx(rev.f1_stats.mean).margin(1e-15));
}

TEST_CASE("parallel seed batteries match sequential ones") {
  const auto split = testsupport::toy_split(8, 4, 4);
  auto cfg = testsupport::toy_config(Objective::ce);
  cfg.max_epochs = 2;
  const auto seq = run_seeds(split, cfg, {4, 5}, nullptr, 1, nullptr);
  const auto par = run_seeds(split, cfg, {4, 5}, nullptr, 2, nullptr);
  REQUIRE(seq.accuracies.size() == par.accuracies.size());
  for (std::size_t i = 0; i < seq.accuracies.size(); ++i)
    CHECK(seq.accuracies[i] == par.accuracies[i]);
}
