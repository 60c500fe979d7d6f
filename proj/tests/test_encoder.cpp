#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "lclab/encoder.hpp"

using namespace lclab;

namespace {

std::vector<Example> abc_corpus() { return {{"a a b", 0}}; }

}  // namespace

TEST_CASE("tokenizer ids follow frequency then lexicographic order") {
  const auto tk = build_tokenizer(abc_corpus(), 1);
  CHECK(tk.vocab_size() == 3);
  CHECK(tk.id_of("a") == 1);
  CHECK(tk.id_of("b") == 2);
  CHECK(tk.id_of("zzz") == kUnkId);
}

TEST_CASE("min_count pushes rare tokens to unk") {
  const auto tk = build_tokenizer(abc_corpus(), 2);
  CHECK(tk.vocab_size() == 2);
  CHECK(tk.id_of("a") == 1);
  CHECK(tk.id_of("b") == kUnkId);
}

TEST_CASE("identical corpora give identical vocabularies") {
  std::vector<Example> corpus{{"c b a c", 0}, {"b c", 1}};
  const auto t1 = build_tokenizer(corpus, 1);
  const auto t2 = build_tokenizer(corpus, 1);
  CHECK(t1.id_to_token == t2.id_to_token);
  // c:3, b:2, a:1 -> frequency order with ties broken lexicographically
  CHECK(t1.id_of("c") == 1);
  CHECK(t1.id_of("b") == 2);
  CHECK(t1.id_of("a") == 3);
}

TEST_CASE("tokenizer round-trips through tsv") {
  std::vector<Example> corpus{{"c b a c b c", 0}};
  const auto tk = build_tokenizer(corpus, 1, 48);
  const auto back = tokenizer_from_tsv(tokenizer_to_tsv(tk));
  CHECK(back.id_to_token == tk.id_to_token);
  CHECK(back.id_counts == tk.id_counts);
  CHECK(back.max_len == tk.max_len);
  CHECK(back.id_of("a") == tk.id_of("a"));
}

TEST_CASE("encode emits unit-norm rows deterministically") {
  Rng rng(4);
  const EncoderDims dims{8, 12, 6};
  const auto params = init_encoder(20, dims, rng);
  Tape tape;
  const std::vector<std::vector<int>> ids{{1, 2, 3}, {1, 2, 3}, {4}, {4, 4}};
  Var h = encode(tape, params, ids);
  REQUIRE(h.shape() == std::vector<std::size_t>{4, 6});
  for (std::size_t i = 0; i < 4; ++i) {
    double n = 0.0;
    for (std::size_t j = 0; j < 6; ++j) n += h.value().at2(i, j) * h.value().at2(i, j);
    CHECK(std::sqrt(n) == Catch::Approx(1.0).margin(1e-12));
  }
  // identical texts share a row; mean pooling makes "4" and "4 4" identical
  for (std::size_t j = 0; j < 6; ++j) {
    CHECK(h.value().at2(0, j) == h.value().at2(1, j));
    CHECK(h.value().at2(2, j) == h.value().at2(3, j));
  }
}

TEST_CASE("encode rejects empty sequences") {
  Rng rng(4);
  const auto params = init_encoder(10, {4, 4, 4}, rng);
  Tape tape;
  CHECK_THROWS_AS(encode(tape, params, {{}}), std::invalid_argument);
}

TEST_CASE("classify in eval mode is a pure function") {
  Rng rng(5);
  const EncoderDims dims{8, 12, 6};
  const auto params = init_encoder(20, dims, rng);
  const auto head = init_head(dims.repr, dims.hidden, 3, rng);
  const std::vector<std::vector<int>> ids{{1, 2}, {3}};
  auto run = [&] {
    Tape tape;
    Rng drop(1);
    Var h = encode(tape, params, ids);
    return classify(tape, head, h, false, drop).value();
  };
  const Tensor a = run();
  const Tensor b = run();
  REQUIRE(a.shape() == std::vector<std::size_t>{2, 3});
  for (std::size_t i = 0; i < a.numel(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("zero head weights give zero logits") {
  Rng rng(6);
  ClassifierHead head;
  head.w1 = Var::parameter(Tensor({4, 5}));
  head.b1 = Var::parameter(Tensor({5}));
  head.w2 = Var::parameter(Tensor({5, 2}));
  head.b2 = Var::parameter(Tensor({2}));
  Tape tape;
  Var h = Var::parameter(Tensor::from({1, 4}, {0.5, -0.5, 0.5, -0.5}));
  Rng drop(1);
  Var logits = classify(tape, head, h, false, drop);
  CHECK(logits.value().at2(0, 0) == 0.0);
  CHECK(logits.value().at2(0, 1) == 0.0);
}

TEST_CASE("hand-set one-dimensional head matches hand computation") {
  // d = 1, hidden = 1, C = 2: logits = relu(h*w1 + b1)*w2 + b2
  ClassifierHead head;
  head.w1 = Var::parameter(Tensor::from({1, 1}, {2.0}));
  head.b1 = Var::parameter(Tensor::from({1}, {0.5}));
  head.w2 = Var::parameter(Tensor::from({1, 2}, {1.0, -3.0}));
  head.b2 = Var::parameter(Tensor::from({2}, {0.25, 0.75}));
  Tape tape;
  Rng drop(1);
  Var h = Var::parameter(Tensor::from({1, 1}, {1.5}));
  Var logits = classify(tape, head, h, false, drop);
  // hidden = relu(1.5*2 + 0.5) = 3.5 -> logits = (3.5 + 0.25, -10.5 + 0.75)
  CHECK(logits.value().at2(0, 0) == Catch::Approx(3.75));
  CHECK(logits.value().at2(0, 1) == Catch::Approx(-9.75));
}

TEST_CASE("weighting rows are softmax rows") {
  Rng rng(7);
  const EncoderDims dims{8, 10, 6};
  auto psi = init_weighting(15, dims, 4, rng);
  Tape tape;
  Rng drop(2);
  const auto out = weighting_forward(tape, psi, {{1, 2}, {3, 4, 5}}, false, drop);
  REQUIRE(out.confidences.shape() == std::vector<std::size_t>{2, 4});
  for (std::size_t i = 0; i < 2; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 4; ++j) {
      s += out.confidences.at2(i, j);
      CHECK(out.confidences.at2(i, j) > 0.0);
    }
    CHECK(s == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("softmax of (ln 2, 0) is (2/3, 1/3)") {
  const Tensor w = softmax_values(Tensor::from({1, 2}, {std::log(2.0), 0.0}));
  CHECK(w.at2(0, 0) == Catch::Approx(2.0 / 3.0).margin(1e-12));
  CHECK(w.at2(0, 1) == Catch::Approx(1.0 / 3.0).margin(1e-12));
}

TEST_CASE("perturbing the weighting network leaves the encoder bit-identical") {
  Rng rng(8);
  const EncoderDims dims{8, 10, 6};
  const auto phi = init_encoder(15, dims, rng);
  auto psi = init_weighting(15, dims, 3, rng);
  const std::vector<std::vector<int>> ids{{1, 2, 3}};
  auto phi_out = [&] {
    Tape tape;
    return encode(tape, phi, ids).value();
  };
  const Tensor before = phi_out();
  for (std::size_t i = 0; i < psi.enc.embedding.value().numel(); ++i)
    psi.enc.embedding.mutable_value()[i] += 123.0;
  psi.head.w2.mutable_value()[0] -= 7.0;
  const Tensor after = phi_out();
  REQUIRE(before.numel() == after.numel());
  for (std::size_t i = 0; i < before.numel(); ++i) CHECK(before[i] == after[i]);
}
