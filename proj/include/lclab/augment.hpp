#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "lclab/corpus.hpp"
#include "lclab/random.hpp"

namespace lclab {

inline std::string to_lower(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline std::vector<std::string> whitespace_tokens(const std::string& text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) tokens.push_back(text.substr(start, i - start));
  }
  return tokens;
}

struct SynonymLexicon {
  std::unordered_map<std::string, std::vector<std::string>> entries;

  std::size_t size() const { return entries.size(); }

  const std::vector<std::string>* lookup(const std::string& token) const {
    auto it = entries.find(to_lower(token));
    return it == entries.end() ? nullptr : &it->second;
  }
};

/// TSV lexicon: column 1 = word, column 2 = comma-separated synonyms.
/// Duplicate rows merge with de-duplication; a word listing only itself as
/// a synonym is rejected.
inline SynonymLexicon load_lexicon(const std::string& path) {
  SynonymLexicon lex;
  const auto rows = parse_tsv(read_file(path));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != 2)
      throw std::runtime_error(path + ": row " + std::to_string(r + 1) +
                               ": expected 2 tab-separated columns, got " +
                               std::to_string(row.size()));
    const std::string word = to_lower(trim(row[0]));
    if (word.empty())
      throw std::runtime_error(path + ": row " + std::to_string(r + 1) + ": empty word");
    std::vector<std::string>& syns = lex.entries[word];
    std::size_t added = 0;
    std::size_t listed = 0;
    std::size_t start = 0;
    const std::string& field = row[1];
    while (start <= field.size()) {
      const std::size_t comma = field.find(',', start);
      const std::string raw =
          comma == std::string::npos ? field.substr(start) : field.substr(start, comma - start);
      const std::string syn = trim(raw);
      if (!syn.empty()) {
        ++listed;
        if (to_lower(syn) != word && std::find(syns.begin(), syns.end(), syn) == syns.end()) {
          syns.push_back(syn);
          ++added;
        }
      }
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (listed == 0)
      throw std::runtime_error(path + ": row " + std::to_string(r + 1) + ": word '" + word +
                               "' has an empty synonym list");
    if (syns.empty())
      throw std::runtime_error(path + ": row " + std::to_string(r + 1) + ": word '" + word +
                               "' is its own sole synonym");
    (void)added;
  }
  return lex;
}

/// Replaces min(|R|, max(1, round(rate * n))) tokens, where R is the set of
/// positions with a lexicon entry. Positions are drawn uniformly without
/// replacement; each replacement is a uniform draw from the word's synonyms.
/// No covered token means the input comes back unchanged.
inline std::vector<std::string> synonym_replace(const std::vector<std::string>& tokens,
                                                double rate, const SynonymLexicon& lexicon,
                                                Rng& rng) {
  if (tokens.empty()) throw std::invalid_argument("synonym_replace: empty token list");
  if (rate <= 0.0 || rate > 1.0)
    throw std::invalid_argument("synonym_replace: rate must be in (0,1]");
  std::vector<std::size_t> replaceable;
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (lexicon.lookup(tokens[i]) != nullptr) replaceable.push_back(i);
  std::vector<std::string> out = tokens;
  if (replaceable.empty()) return out;

  const auto target = static_cast<std::size_t>(
      std::max<long>(1, std::lround(rate * static_cast<double>(tokens.size()))));
  const std::size_t m = std::min(replaceable.size(), target);

  // partial Fisher-Yates: first m entries are a uniform m-subset
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + rng.below(replaceable.size() - i);
    std::swap(replaceable[i], replaceable[j]);
  }
  std::vector<std::size_t> chosen(replaceable.begin(),
                                  replaceable.begin() + static_cast<std::ptrdiff_t>(m));
  std::sort(chosen.begin(), chosen.end());
  for (std::size_t pos : chosen) {
    const auto* syns = lexicon.lookup(tokens[pos]);
    out[pos] = (*syns)[rng.below(syns->size())];
  }
  return out;
}

/// 2K-row contrastive batch: rows [0,K) are the originals, rows [K,2K) the
/// augmented twins, pairing g(i) = i +/- K.
struct AugmentedBatch {
  std::vector<std::vector<std::string>> tokens;  // 2K token sequences
  std::vector<int> labels;                       // 2K ids
  std::vector<std::size_t> pairing;              // involution, g(i) != i
  std::size_t k = 0;
};

inline AugmentedBatch make_contrastive_batch(const std::vector<Example>& batch,
                                             const SynonymLexicon& lexicon, Rng& rng,
                                             double rate = 0.3) {
  if (batch.empty()) throw std::invalid_argument("make_contrastive_batch: empty batch");
  const std::size_t k = batch.size();
  AugmentedBatch out;
  out.k = k;
  out.tokens.resize(2 * k);
  out.labels.resize(2 * k);
  out.pairing.resize(2 * k);
  for (std::size_t i = 0; i < k; ++i) {
    out.tokens[i] = whitespace_tokens(batch[i].text);
    if (out.tokens[i].empty())
      throw std::invalid_argument("make_contrastive_batch: text with no tokens");
    out.labels[i] = batch[i].label;
    out.labels[i + k] = batch[i].label;
    out.pairing[i] = i + k;
    out.pairing[i + k] = i;
  }
  for (std::size_t i = 0; i < k; ++i)
    out.tokens[i + k] = synonym_replace(out.tokens[i], rate, lexicon, rng);
  return out;
}

}  // namespace lclab
