#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "lclab/adam.hpp"
#include "lclab/augment.hpp"
#include "lclab/autodiff.hpp"
#include "lclab/corpus.hpp"
#include "lclab/random.hpp"

namespace lclab {

constexpr int kUnkId = 0;
constexpr const char* kUnkToken = "<unk>";

/// Whitespace tokens, lowercased for the vocabulary. Built from the training
/// split only; everything below min_count maps to the reserved unk id 0.
struct Tokenizer {
  std::unordered_map<std::string, int> vocab;  // token -> id, excludes unk
  std::vector<std::string> id_to_token;        // id_to_token[0] == "<unk>"
  std::vector<std::uint64_t> id_counts;        // training-frequency per id, unk = 0
  std::size_t max_len = 64;

  std::size_t vocab_size() const { return id_to_token.size(); }

  int id_of(const std::string& token) const {
    auto it = vocab.find(to_lower(token));
    return it == vocab.end() ? kUnkId : it->second;
  }

  std::vector<int> encode_tokens(const std::vector<std::string>& tokens) const {
    std::vector<int> ids;
    ids.reserve(std::min(tokens.size(), max_len));
    for (const auto& tok : tokens) {
      if (ids.size() >= max_len) break;
      ids.push_back(id_of(tok));
    }
    return ids;
  }

  std::vector<int> encode_text(const std::string& text) const {
    return encode_tokens(whitespace_tokens(text));
  }
};

inline Tokenizer build_tokenizer(const std::vector<Example>& train, std::size_t min_count = 1,
                                 std::size_t max_len = 64) {
  if (train.empty()) throw std::invalid_argument("build_tokenizer: empty training set");
  std::map<std::string, std::uint64_t> counts;  // ordered for the lexicographic tie-break
  for (const auto& ex : train)
    for (const auto& tok : whitespace_tokens(ex.text)) ++counts[to_lower(tok)];
  std::vector<std::pair<std::string, std::uint64_t>> kept;
  for (const auto& [tok, cnt] : counts)
    if (cnt >= min_count) kept.emplace_back(tok, cnt);
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Tokenizer tk;
  tk.max_len = max_len;
  tk.id_to_token.push_back(kUnkToken);
  tk.id_counts.push_back(0);
  for (const auto& [tok, cnt] : kept) {
    tk.vocab.emplace(tok, static_cast<int>(tk.id_to_token.size()));
    tk.id_to_token.push_back(tok);
    tk.id_counts.push_back(cnt);
  }
  return tk;
}

inline std::string tokenizer_to_tsv(const Tokenizer& tk) {
  std::ostringstream out;
  out << "max_len\t" << tk.max_len << "\t0\n";
  for (std::size_t id = 0; id < tk.id_to_token.size(); ++id)
    out << tk.id_to_token[id] << "\t" << id << "\t" << tk.id_counts[id] << "\n";
  return out.str();
}

inline Tokenizer tokenizer_from_tsv(const std::string& content) {
  Tokenizer tk;
  const auto rows = parse_tsv(content);
  if (rows.empty() || rows[0].size() != 3 || rows[0][0] != "max_len")
    throw std::runtime_error("tokenizer tsv: missing max_len header row");
  tk.max_len = static_cast<std::size_t>(std::stoull(rows[0][1]));
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != 3) throw std::runtime_error("tokenizer tsv: malformed row");
    const std::string& tok = rows[r][0];
    const int id = std::stoi(rows[r][1]);
    if (id != static_cast<int>(tk.id_to_token.size()))
      throw std::runtime_error("tokenizer tsv: ids out of order");
    tk.id_to_token.push_back(tok);
    tk.id_counts.push_back(std::stoull(rows[r][2]));
    if (id != kUnkId) tk.vocab.emplace(tok, id);
  }
  if (tk.id_to_token.empty() || tk.id_to_token[0] != kUnkToken)
    throw std::runtime_error("tokenizer tsv: unk token must have id 0");
  return tk;
}

// ---------------------------------------------------------------------------
// Networks. The encoder is embedding -> mean pool -> 2-layer ReLU MLP with
// L2-normalised output rows; the classifier head is a 2-layer dense network
// with dropout after the hidden activation.
// ---------------------------------------------------------------------------

struct EncoderDims {
  std::size_t embed = 64;
  std::size_t hidden = 128;
  std::size_t repr = 64;
};

namespace detail {

inline Tensor xavier(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor w({rows, cols});
  const double s = std::sqrt(6.0 / static_cast<double>(rows + cols));
  for (std::size_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-s, s);
  return w;
}

}  // namespace detail

struct EncoderParams {
  Var embedding;  // V x e
  Var w1, b1;     // e x h, h
  Var w2, b2;     // h x d, d

  std::vector<NamedParam> parameters(const std::string& prefix) const {
    return {{prefix + ".embedding", embedding},
            {prefix + ".w1", w1},
            {prefix + ".b1", b1},
            {prefix + ".w2", w2},
            {prefix + ".b2", b2}};
  }
};

inline EncoderParams init_encoder(std::size_t vocab_size, const EncoderDims& dims, Rng& rng) {
  EncoderParams p;
  p.embedding = Var::parameter(detail::xavier(vocab_size, dims.embed, rng));
  p.w1 = Var::parameter(detail::xavier(dims.embed, dims.hidden, rng));
  p.b1 = Var::parameter(Tensor({dims.hidden}));
  p.w2 = Var::parameter(detail::xavier(dims.hidden, dims.repr, rng));
  p.b2 = Var::parameter(Tensor({dims.repr}));
  return p;
}

struct ClassifierHead {
  Var w1, b1;  // d x h, h
  Var w2, b2;  // h x C, C
  double dropout_p = 0.1;

  std::size_t num_classes() const { return w2.shape()[1]; }

  std::vector<NamedParam> parameters(const std::string& prefix) const {
    return {{prefix + ".w1", w1}, {prefix + ".b1", b1}, {prefix + ".w2", w2}, {prefix + ".b2", b2}};
  }
};

inline ClassifierHead init_head(std::size_t repr, std::size_t hidden, std::size_t num_classes,
                                Rng& rng, double dropout_p = 0.1) {
  ClassifierHead h;
  h.w1 = Var::parameter(detail::xavier(repr, hidden, rng));
  h.b1 = Var::parameter(Tensor({hidden}));
  h.w2 = Var::parameter(detail::xavier(hidden, num_classes, rng));
  h.b2 = Var::parameter(Tensor({num_classes}));
  h.dropout_p = dropout_p;
  return h;
}

/// Mean-pooled representations, one unit-norm row per sequence.
inline Var encode(Tape& tape, const EncoderParams& params,
                  const std::vector<std::vector<int>>& ids) {
  if (ids.empty()) throw std::invalid_argument("encode: empty batch");
  std::vector<std::size_t> flat;
  for (const auto& seq : ids) {
    if (seq.empty()) throw std::invalid_argument("encode: empty token sequence");
    for (int id : seq) flat.push_back(static_cast<std::size_t>(id));
  }
  // Pooling as a constant row-stochastic matrix handles ragged lengths
  // through plain matmul.
  Tensor pool({ids.size(), flat.size()});
  std::size_t offset = 0;
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const double w = 1.0 / static_cast<double>(ids[r].size());
    for (std::size_t k = 0; k < ids[r].size(); ++k) pool.at2(r, offset + k) = w;
    offset += ids[r].size();
  }
  Var token_vecs = gather_rows(tape, params.embedding, std::move(flat));
  Var pooled = matmul(tape, Var::constant(std::move(pool)), token_vecs);
  Var hidden = relu(tape, add_rowvec(tape, matmul(tape, pooled, params.w1), params.b1));
  Var repr = add_rowvec(tape, matmul(tape, hidden, params.w2), params.b2);
  return l2_normalize(tape, repr);
}

/// Logits from representations; dropout is active only in train mode.
inline Var classify(Tape& tape, const ClassifierHead& head, const Var& h, bool train_mode,
                    Rng& rng) {
  Var hidden = relu(tape, add_rowvec(tape, matmul(tape, h, head.w1), head.b1));
  if (train_mode && head.dropout_p > 0.0) hidden = dropout(tape, hidden, head.dropout_p, rng);
  return add_rowvec(tape, matmul(tape, hidden, head.w2), head.b2);
}

/// The weighting network: same architecture as the primary encoder plus
/// head, with its own independent parameters.
struct WeightingNetwork {
  EncoderParams enc;
  ClassifierHead head;

  std::vector<NamedParam> parameters() const {
    auto out = enc.parameters("psi.enc");
    auto h = head.parameters("psi.head");
    out.insert(out.end(), h.begin(), h.end());
    return out;
  }
};

inline WeightingNetwork init_weighting(std::size_t vocab_size, const EncoderDims& dims,
                                       std::size_t num_classes, Rng& rng, double dropout_p = 0.1) {
  WeightingNetwork w;
  w.enc = init_encoder(vocab_size, dims, rng);
  w.head = init_head(dims.repr, dims.hidden, num_classes, rng, dropout_p);
  return w;
}

struct WeightingOutput {
  Var logits;  // 2K x C, differentiable for the weighting network's CE loss
  Tensor confidences;  // detached row-softmax; no gradient flows through it
};

inline WeightingOutput weighting_forward(Tape& tape, const WeightingNetwork& psi,
                                         const std::vector<std::vector<int>>& ids, bool train_mode,
                                         Rng& rng) {
  Var h = encode(tape, psi.enc, ids);
  Var logits = classify(tape, psi.head, h, train_mode, rng);
  return {logits, softmax_values(logits.value())};
}

}  // namespace lclab
