#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "lclab/random.hpp"

namespace lclab {

enum class FileFormat { csv, tsv };

inline FileFormat parse_format(const std::string& s) {
  if (s == "csv") return FileFormat::csv;
  if (s == "tsv") return FileFormat::tsv;
  throw std::invalid_argument("unknown format '" + s + "' (expected csv or tsv)");
}

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

struct LabelVocab {
  std::vector<std::string> names;

  std::size_t size() const { return names.size(); }

  int id_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return static_cast<int>(i);
    return -1;
  }
};

struct Example {
  std::string text;
  int label = 0;
};

struct DatasetSplit {
  std::vector<Example> train, validation, test;
  LabelVocab vocab;
};

struct BatchPlan {
  std::size_t batch_size = 10;
  std::uint64_t seed = 0;
  bool drop_last = false;
};

// ---------------------------------------------------------------------------
// Delimited-file reading. CSV follows RFC 4180 quoting (quoted fields may
// contain delimiters, doubled quotes and newlines); TSV is a plain split.
// ---------------------------------------------------------------------------

inline std::vector<std::vector<std::string>> parse_csv(const std::string& content) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t i = 0;
  const std::size_t n = content.size();
  auto end_field = [&]() {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&]() {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
  };
  while (i < n) {
    const char c = content[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < n && content[i + 1] == '"') {
          field += '"';
          i += 2;
        } else {
          in_quotes = false;
          ++i;
        }
      } else {
        field += c;
        ++i;
      }
    } else if (c == '"' && !field_started && field.empty()) {
      in_quotes = true;
      field_started = true;
      ++i;
    } else if (c == ',') {
      end_field();
      ++i;
    } else if (c == '\r') {
      ++i;  // bare CR or part of CRLF; row ends at the LF
      if (i >= n || content[i] != '\n') end_row();
    } else if (c == '\n') {
      end_row();
      ++i;
    } else {
      field += c;
      field_started = true;
      ++i;
    }
  }
  if (in_quotes) throw std::runtime_error("malformed csv: unterminated quoted field");
  if (field_started || !field.empty() || !row.empty()) end_row();
  return rows;
}

inline std::vector<std::vector<std::string>> parse_tsv(const std::string& content) {
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::istringstream in(content);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> row;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      if (tab == std::string::npos) {
        row.push_back(line.substr(start));
        break;
      }
      row.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<std::vector<std::string>> read_delimited(const std::string& path,
                                                            FileFormat format) {
  const std::string content = read_file(path);
  return format == FileFormat::csv ? parse_csv(content) : parse_tsv(content);
}

// ---------------------------------------------------------------------------
// Dataset loading
// ---------------------------------------------------------------------------

struct SplitPaths {
  std::string train, validation, test;
};

inline SplitPaths split_paths_from_stem(const std::string& stem, FileFormat format) {
  const std::string ext = format == FileFormat::csv ? ".csv" : ".tsv";
  return {stem + "_train" + ext, stem + "_validation" + ext, stem + "_test" + ext};
}

namespace detail {

struct RawFile {
  std::vector<std::pair<std::string, std::string>> rows;  // (text, label)
};

inline RawFile read_labeled_file(const std::string& path, FileFormat format,
                                 const std::string& text_column,
                                 const std::string& label_column) {
  auto rows = read_delimited(path, format);
  if (rows.empty()) throw std::runtime_error(path + ": empty file, header row required");
  const auto& header = rows.front();
  auto find_col = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (trim(header[i]) == name) return i;
    throw std::runtime_error(path + ": column not found: '" + name + "'");
  };
  const std::size_t text_idx = find_col(text_column);
  const std::size_t label_idx = find_col(label_column);
  RawFile out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size())
      throw std::runtime_error(path + ": row " + std::to_string(r + 1) + " has " +
                               std::to_string(row.size()) + " fields, header has " +
                               std::to_string(header.size()));
    const std::string text = trim(row[text_idx]);
    const std::string label = trim(row[label_idx]);
    if (text.empty())
      throw std::runtime_error(path + ": row " + std::to_string(r + 1) + ": empty text");
    if (label.empty())
      throw std::runtime_error(path + ": row " + std::to_string(r + 1) + ": empty label");
    out.rows.emplace_back(text, label);
  }
  return out;
}

}  // namespace detail

/// Loads train/validation/test files. Label ids are assigned by first
/// appearance in the training file; validation/test labels must be a subset
/// of the training labels.
inline DatasetSplit load_dataset(const SplitPaths& paths, FileFormat format,
                                 const std::string& text_column,
                                 const std::string& label_column) {
  DatasetSplit split;
  const auto train_raw = detail::read_labeled_file(paths.train, format, text_column, label_column);
  std::unordered_map<std::string, int> label_ids;
  for (const auto& [text, label] : train_raw.rows) {
    auto it = label_ids.find(label);
    int id;
    if (it == label_ids.end()) {
      id = static_cast<int>(split.vocab.names.size());
      label_ids.emplace(label, id);
      split.vocab.names.push_back(label);
    } else {
      id = it->second;
    }
    split.train.push_back({text, id});
  }
  if (split.train.empty()) throw std::runtime_error(paths.train + ": no training rows");

  auto map_rows = [&](const std::string& path, std::vector<Example>& dst) {
    const auto raw = detail::read_labeled_file(path, format, text_column, label_column);
    for (const auto& [text, label] : raw.rows) {
      auto it = label_ids.find(label);
      if (it == label_ids.end())
        throw std::runtime_error(path + ": label '" + label + "' does not appear in the training file");
      dst.push_back({text, it->second});
    }
  };
  map_rows(paths.validation, split.validation);
  map_rows(paths.test, split.test);
  return split;
}

inline DatasetSplit load_dataset(const std::string& stem, FileFormat format,
                                 const std::string& text_column,
                                 const std::string& label_column) {
  return load_dataset(split_paths_from_stem(stem, format), format, text_column, label_column);
}

/// Restricts the split to the given classes. Kept labels are remapped to
/// [0, |keep|) in ascending original-id order, and the vocab lists the kept
/// names in that order.
inline DatasetSplit filter_classes(const DatasetSplit& split, const std::set<int>& keep) {
  const int c = static_cast<int>(split.vocab.size());
  if (keep.size() < 2) throw std::invalid_argument("filter_classes: need at least 2 classes");
  for (int id : keep)
    if (id < 0 || id >= c)
      throw std::invalid_argument("filter_classes: class id " + std::to_string(id) +
                                  " out of range [0," + std::to_string(c) + ")");
  std::map<int, int> remap;  // ordered: ascending original id
  for (int id : keep) {
    const int new_id = static_cast<int>(remap.size());
    remap.emplace(id, new_id);
  }
  DatasetSplit out;
  for (const auto& [old_id, new_id] : remap) out.vocab.names.push_back(split.vocab.names[old_id]);
  auto apply = [&](const std::vector<Example>& src, std::vector<Example>& dst) {
    for (const auto& ex : src) {
      auto it = remap.find(ex.label);
      if (it != remap.end()) dst.push_back({ex.text, it->second});
    }
  };
  apply(split.train, out.train);
  apply(split.validation, out.validation);
  apply(split.test, out.test);
  std::vector<std::size_t> train_counts(out.vocab.size(), 0);
  for (const auto& ex : out.train) ++train_counts[static_cast<std::size_t>(ex.label)];
  for (std::size_t i = 0; i < train_counts.size(); ++i)
    if (train_counts[i] == 0)
      throw std::runtime_error("filter_classes: kept class '" + out.vocab.names[i] +
                               "' has no training examples");
  return out;
}

/// Convenience: resolve keep-class names to ids first.
inline DatasetSplit filter_classes(const DatasetSplit& split,
                                   const std::vector<std::string>& keep_names) {
  std::set<int> keep;
  for (const auto& name : keep_names) {
    const int id = split.vocab.id_of(name);
    if (id < 0) throw std::invalid_argument("filter_classes: unknown class '" + name + "'");
    keep.insert(id);
  }
  return filter_classes(split, keep);
}

/// Deterministic shuffled batches for one epoch. The permutation depends
/// only on (plan.seed, epoch), so interrupted epochs can be replayed.
inline std::vector<std::vector<Example>> batch_iter(const std::vector<Example>& examples,
                                                    const BatchPlan& plan, std::uint64_t epoch) {
  if (examples.empty()) throw std::invalid_argument("batch_iter: no examples");
  if (plan.batch_size == 0) throw std::invalid_argument("batch_iter: batch_size must be >= 1");
  if (plan.drop_last && plan.batch_size > examples.size())
    throw std::invalid_argument("batch_iter: batch_size exceeds dataset with drop_last set");
  Rng rng = make_stream(plan.seed, Stream::shuffle, epoch);
  const std::vector<std::size_t> order = rng.permutation(examples.size());
  std::vector<std::vector<Example>> batches;
  for (std::size_t start = 0; start < order.size(); start += plan.batch_size) {
    const std::size_t end = std::min(order.size(), start + plan.batch_size);
    if (plan.drop_last && end - start < plan.batch_size) break;
    std::vector<Example> batch;
    batch.reserve(end - start);
    for (std::size_t i = start; i < end; ++i) batch.push_back(examples[order[i]]);
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace lclab
