#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lclab/corpus.hpp"
#include "lclab/metrics.hpp"
#include "lclab/subsets.hpp"
#include "lclab/tensor.hpp"
#include "lclab/trainer.hpp"

namespace lclab {

namespace detail {

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
  if (!out) throw std::runtime_error("short write to " + path);
}

}  // namespace detail

/// History CSV. Wall time is intentionally absent so re-runs with the same
/// config and seed produce byte-identical files.
inline std::string history_to_csv(const TrainHistory& history) {
  std::ostringstream out;
  out << "epoch,loss_w,loss_e,loss_lcl,loss_f,val_accuracy\n";
  for (const auto& e : history.epochs)
    out << e.epoch << ',' << format_double(e.loss_w) << ',' << format_double(e.loss_e) << ','
        << format_double(e.loss_lcl) << ',' << format_double(e.loss_f) << ','
        << format_double(e.val_accuracy) << "\n";
  return out.str();
}

inline void write_history_csv(const TrainHistory& history, const std::string& path) {
  detail::write_text_file(path, history_to_csv(history));
}

inline void write_confusion_csv(const ConfusionMatrix& m, const std::string& path) {
  std::ostringstream out;
  for (std::size_t r = 0; r < m.num_classes; ++r) {
    for (std::size_t c = 0; c < m.num_classes; ++c) {
      if (c) out << ',';
      out << m.at(r, c);
    }
    out << "\n";
  }
  detail::write_text_file(path, out.str());
}

inline ConfusionMatrix read_confusion_csv(const std::string& path) {
  const auto rows = parse_csv(read_file(path));
  if (rows.empty()) throw std::runtime_error(path + ": empty confusion matrix");
  const std::size_t c = rows.size();
  ConfusionMatrix m(c);
  for (std::size_t r = 0; r < c; ++r) {
    if (rows[r].size() != c)
      throw std::runtime_error(path + ": confusion matrix must be square (row " +
                               std::to_string(r + 1) + " has " + std::to_string(rows[r].size()) +
                               " columns, expected " + std::to_string(c) + ")");
    for (std::size_t j = 0; j < c; ++j) {
      const double v = parse_double(rows[r][j]);
      if (v < 0) throw std::runtime_error(path + ": negative confusion count");
      m.at(r, j) = static_cast<std::int64_t>(v);
    }
  }
  return m;
}

inline void write_matrix_csv(const Tensor& t, const std::string& path) {
  if (t.ndim() != 2) throw std::invalid_argument("write_matrix_csv: expected a matrix");
  std::ostringstream out;
  for (std::size_t r = 0; r < t.dim(0); ++r) {
    for (std::size_t c = 0; c < t.dim(1); ++c) {
      if (c) out << ',';
      out << format_double(t.at2(r, c));
    }
    out << "\n";
  }
  detail::write_text_file(path, out.str());
}

inline Tensor read_matrix_csv(const std::string& path) {
  const auto rows = parse_csv(read_file(path));
  if (rows.empty()) throw std::runtime_error(path + ": empty matrix");
  const std::size_t cols = rows[0].size();
  Tensor t({rows.size(), cols});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols)
      throw std::runtime_error(path + ": ragged matrix at row " + std::to_string(r + 1));
    for (std::size_t c = 0; c < cols; ++c) t.at2(r, c) = parse_double(rows[r][c]);
  }
  return t;
}

inline std::string entropy_curve_to_csv(const std::vector<std::pair<std::size_t, double>>& curve) {
  std::ostringstream out;
  out << "k,mean_entropy\n";
  for (const auto& [k, v] : curve) out << k << ',' << format_double(v) << "\n";
  return out.str();
}

inline std::string combination_field(const std::vector<int>& classes) {
  std::string s;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (i) s += ' ';
    s += std::to_string(classes[i]);
  }
  return s;
}

inline std::string ranking_to_csv(const SubsetRanking& ranking) {
  std::ostringstream out;
  out << "combination,off_diagonal_sum\n";
  for (const auto& e : ranking.entries)
    out << combination_field(e.classes) << ',' << format_double(e.score) << "\n";
  return out.str();
}

inline std::string sequence_to_csv(const std::vector<RankedSubset>& sequence) {
  std::ostringstream out;
  out << "round,combination,off_diagonal_sum\n";
  for (std::size_t i = 0; i < sequence.size(); ++i)
    out << (i + 1) << ',' << combination_field(sequence[i].classes) << ','
        << format_double(sequence[i].score) << "\n";
  return out.str();
}

}  // namespace lclab
