#include <catch2/catch_amalgamated.hpp>

#include "lclab/checkpoint.hpp"
#include "lclab/trainer.hpp"
#include "support.hpp"
#include "toy_data.hpp"

using namespace lclab;
using testsupport::TempDir;

TEST_CASE("block files round-trip tensors and bytes") {
  TempDir dir;
  blockfile::Writer w;
  const Tensor t = Tensor::from({2, 3}, {1.5, -2.25, 0.0, 1e-300, 3.14159, -0.5});
  w.add_tensor("weights", t);
  w.add_bytes("meta", "hello\nworld");
  const std::string path = dir.path("f.bin");
  w.write(path);

  const auto f = blockfile::File::read(path);
  CHECK(f.names() == std::vector<std::string>{"weights", "meta"});
  REQUIRE(f.has("weights"));
  const Tensor back = f.tensor("weights");
  REQUIRE(back.shape() == t.shape());
  for (std::size_t i = 0; i < t.numel(); ++i) CHECK(back[i] == t[i]);
  CHECK(f.bytes("meta") == "hello\nworld");
  CHECK_THROWS_AS(f.tensor("meta"), std::runtime_error);
  CHECK_THROWS_AS(f.bytes("weights"), std::runtime_error);
  CHECK_THROWS_AS(f.bytes("nope"), std::runtime_error);
}

TEST_CASE("corrupt block files are rejected") {
  CHECK_THROWS_AS(blockfile::File::parse("not a checkpoint"), std::runtime_error);
  blockfile::Writer w;
  w.add_tensor("x", Tensor::from({2}, {1.0, 2.0}));
  std::string data = w.serialize();
  data.resize(data.size() - 4);  // truncate the payload
  CHECK_THROWS_AS(blockfile::File::parse(data), std::runtime_error);
}

TEST_CASE("model checkpoints restore identical predictions") {
  TempDir dir;
  const auto split = testsupport::toy_split();
  auto [model, history] = train(split, testsupport::toy_config(Objective::ce), nullptr, nullptr);
  const std::string path = dir.path("model.bin");
  save_model(model, path);
  const TrainedModel back = load_model(path);
  CHECK(back.vocab.names == model.vocab.names);
  CHECK(back.best_epoch == model.best_epoch);
  CHECK(back.tokenizer.id_to_token == model.tokenizer.id_to_token);

  const auto a = evaluate(model, split.test);
  const auto b = evaluate(back, split.test);
  REQUIRE(a.scores.numel() == b.scores.numel());
  for (std::size_t i = 0; i < a.scores.numel(); ++i) CHECK(a.scores[i] == b.scores[i]);
}

TEST_CASE("checkpoints never contain weighting-network parameters") {
  TempDir dir;
  const auto split = testsupport::toy_split();
  const auto lex = testsupport::toy_lexicon();
  auto cfg = testsupport::toy_config(Objective::lcl);
  cfg.max_epochs = 2;
  auto [model, history] = train(split, cfg, &lex, nullptr);
  const std::string path = dir.path("model.bin");
  save_model(model, path);
  const auto f = blockfile::File::read(path);
  for (const auto& name : f.names()) {
    CHECK(name.find("psi") == std::string::npos);
    const bool known = name == "__meta__" || name == "__tokenizer__" ||
                       name.rfind("phi.", 0) == 0 || name.rfind("head.", 0) == 0;
    CHECK(known);
  }
}

TEST_CASE("saving the same model twice is byte-identical") {
  TempDir dir;
  const auto split = testsupport::toy_split();
  auto cfg = testsupport::toy_config(Objective::ce);
  cfg.max_epochs = 2;
  auto [model, history] = train(split, cfg, nullptr, nullptr);
  save_model(model, dir.path("a.bin"));
  save_model(model, dir.path("b.bin"));
  CHECK(testsupport::slurp(dir.path("a.bin")) == testsupport::slurp(dir.path("b.bin")));
}
