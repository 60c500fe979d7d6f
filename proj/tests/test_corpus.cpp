#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>

#include "lclab/corpus.hpp"
#include "support.hpp"

using namespace lclab;
using testsupport::TempDir;

namespace {

std::string csv_of(const std::vector<std::pair<std::string, std::string>>& rows) {
  std::string out = "text,label\n";
  for (const auto& [t, l] : rows) out += t + "," + l + "\n";
  return out;
}

DatasetSplit tiny_split(const TempDir& dir) {
  const auto train = dir.file("d_train.csv", csv_of({{"a sad day", "sad"},
                                                     {"what a joy", "joyful"},
                                                     {"tears again", "sad"},
                                                     {"pure joy", "joyful"}}));
  const auto val = dir.file("d_validation.csv", csv_of({{"so sad", "sad"}}));
  const auto test = dir.file("d_test.csv", csv_of({{"joy joy", "joyful"}}));
  return load_dataset(SplitPaths{train, val, test}, FileFormat::csv, "text", "label");
}

}  // namespace

TEST_CASE("label ids follow first appearance in the training file") {
  TempDir dir;
  const auto train =
      dir.file("t_train.csv", csv_of({{"x", "sad"}, {"y", "joyful"}, {"z", "sad"}}));
  const auto val = dir.file("t_validation.csv", csv_of({{"v", "sad"}}));
  const auto test = dir.file("t_test.csv", csv_of({{"w", "joyful"}}));
  const auto split =
      load_dataset(SplitPaths{train, val, test}, FileFormat::csv, "text", "label");
  REQUIRE(split.vocab.names == std::vector<std::string>{"sad", "joyful"});
  REQUIRE(split.train.size() == 3);
  CHECK(split.train[0].label == 0);
  CHECK(split.train[1].label == 1);
  CHECK(split.train[2].label == 0);
}

TEST_CASE("unknown column names are rejected") {
  TempDir dir;
  const auto train = dir.file("t_train.csv", csv_of({{"x", "sad"}}));
  const auto val = dir.file("t_validation.csv", csv_of({{"v", "sad"}}));
  const auto test = dir.file("t_test.csv", csv_of({{"w", "sad"}}));
  try {
    load_dataset(SplitPaths{train, val, test}, FileFormat::csv, "body", "label");
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("column not found") != std::string::npos);
  }
}

TEST_CASE("validation labels missing from train fail the load") {
  TempDir dir;
  const auto train = dir.file("t_train.csv", csv_of({{"x", "sad"}}));
  const auto val = dir.file("t_validation.csv", csv_of({{"v", "angry"}}));
  const auto test = dir.file("t_test.csv", csv_of({{"w", "sad"}}));
  CHECK_THROWS_WITH(load_dataset(SplitPaths{train, val, test}, FileFormat::csv, "text", "label"),
                    Catch::Matchers::ContainsSubstring("angry"));
}

TEST_CASE("empty labels and empty texts are rejected") {
  TempDir dir;
  const auto bad_label = dir.file("a_train.csv", "text,label\nhello,\n");
  const auto val = dir.file("a_validation.csv", csv_of({}));
  const auto test = dir.file("a_test.csv", csv_of({}));
  CHECK_THROWS_WITH(
      load_dataset(SplitPaths{bad_label, val, test}, FileFormat::csv, "text", "label"),
      Catch::Matchers::ContainsSubstring("empty label"));
  const auto bad_text = dir.file("b_train.csv", "text,label\n   ,sad\n");
  CHECK_THROWS_WITH(
      load_dataset(SplitPaths{bad_text, val, test}, FileFormat::csv, "text", "label"),
      Catch::Matchers::ContainsSubstring("empty text"));
}

TEST_CASE("csv quoting handles embedded commas and quotes") {
  const auto rows = parse_csv("text,label\n\"hello, there\",joy\n\"she said \"\"hi\"\"\",sad\n");
  REQUIRE(rows.size() == 3);
  CHECK(rows[1][0] == "hello, there");
  CHECK(rows[2][0] == "she said \"hi\"");
}

TEST_CASE("split sizes are preserved exactly") {
  TempDir dir;
  std::vector<std::pair<std::string, std::string>> train_rows, val_rows, test_rows;
  const char* names[4] = {"a", "b", "c", "d"};
  for (int i = 0; i < 280; ++i) train_rows.push_back({"t " + std::to_string(i), names[i % 4]});
  for (int i = 0; i < 60; ++i) val_rows.push_back({"v " + std::to_string(i), names[i % 4]});
  for (int i = 0; i < 60; ++i) test_rows.push_back({"s " + std::to_string(i), names[i % 4]});
  const auto split = load_dataset(
      SplitPaths{dir.file("c_train.csv", csv_of(train_rows)),
                 dir.file("c_validation.csv", csv_of(val_rows)),
                 dir.file("c_test.csv", csv_of(test_rows))},
      FileFormat::csv, "text", "label");
  CHECK(split.train.size() == 280);
  CHECK(split.validation.size() == 60);
  CHECK(split.test.size() == 60);
  CHECK(split.vocab.size() == 4);
}

TEST_CASE("filter_classes remaps ascending and preserves counts") {
  TempDir dir;
  auto split = tiny_split(dir);
  // add two more classes by rebuilding a 4-class corpus
  const auto train = dir.file("f_train.csv", csv_of({{"w0", "a"},
                                                     {"w1", "b"},
                                                     {"w2", "c"},
                                                     {"w3", "d"},
                                                     {"w4", "b"},
                                                     {"w5", "d"}}));
  const auto val = dir.file("f_validation.csv", csv_of({{"v", "a"}}));
  const auto test = dir.file("f_test.csv", csv_of({{"s", "c"}}));
  split = load_dataset(SplitPaths{train, val, test}, FileFormat::csv, "text", "label");

  const auto filtered = filter_classes(split, std::set<int>{3, 1});
  REQUIRE(filtered.vocab.names == std::vector<std::string>{"b", "d"});
  std::map<int, int> counts;
  for (const auto& ex : filtered.train) ++counts[ex.label];
  CHECK(counts[0] == 2);  // b
  CHECK(counts[1] == 2);  // d
  CHECK(filtered.validation.empty());
  CHECK(filtered.test.empty());
}

TEST_CASE("filter_classes with every class is the identity up to vocab object") {
  TempDir dir;
  const auto split = tiny_split(dir);
  std::set<int> all{0, 1};
  const auto filtered = filter_classes(split, all);
  REQUIRE(filtered.train.size() == split.train.size());
  for (std::size_t i = 0; i < split.train.size(); ++i) {
    CHECK(filtered.train[i].text == split.train[i].text);
    CHECK(filtered.train[i].label == split.train[i].label);
  }
  CHECK(filtered.vocab.names == split.vocab.names);
}

TEST_CASE("filter_classes is idempotent") {
  TempDir dir;
  const auto train = dir.file("g_train.csv", csv_of({{"w0", "a"},
                                                     {"w1", "b"},
                                                     {"w2", "c"},
                                                     {"w3", "a"}}));
  const auto val = dir.file("g_validation.csv", csv_of({{"v", "b"}}));
  const auto test = dir.file("g_test.csv", csv_of({{"s", "c"}}));
  const auto split = load_dataset(SplitPaths{train, val, test}, FileFormat::csv, "text", "label");
  const auto once = filter_classes(split, std::set<int>{0, 2});
  const auto twice = filter_classes(once, std::set<int>{0, 1});
  REQUIRE(once.vocab.names == twice.vocab.names);
  REQUIRE(once.train.size() == twice.train.size());
  for (std::size_t i = 0; i < once.train.size(); ++i)
    CHECK(once.train[i].label == twice.train[i].label);
}

TEST_CASE("filter_classes by the four easy names over a 32-class corpus") {
  TempDir dir;
  std::vector<std::pair<std::string, std::string>> rows;
  std::vector<std::string> names;
  for (int i = 0; i < 32; ++i) names.push_back("emotion" + std::to_string(i));
  names[4] = "Angry";
  names[9] = "Afraid";
  names[17] = "Joyful";
  names[23] = "Sad";
  for (int rep = 0; rep < 3; ++rep)
    for (int i = 0; i < 32; ++i) rows.push_back({"text " + std::to_string(rep), names[i]});
  const auto split = load_dataset(
      SplitPaths{dir.file("h_train.csv", csv_of(rows)), dir.file("h_validation.csv", csv_of(rows)),
                 dir.file("h_test.csv", csv_of(rows))},
      FileFormat::csv, "text", "label");
  REQUIRE(split.vocab.size() == 32);
  const auto easy = filter_classes(split, std::vector<std::string>{"Angry", "Afraid", "Joyful", "Sad"});
  CHECK(easy.vocab.names == std::vector<std::string>{"Angry", "Afraid", "Joyful", "Sad"});
  CHECK(easy.train.size() == 12);
  for (const auto& ex : easy.train) CHECK((ex.label >= 0 && ex.label < 4));
}

TEST_CASE("filter_classes rejects bad keep sets") {
  TempDir dir;
  const auto split = tiny_split(dir);
  CHECK_THROWS_AS(filter_classes(split, std::set<int>{0}), std::invalid_argument);
  CHECK_THROWS_AS(filter_classes(split, std::set<int>{0, 7}), std::invalid_argument);
}

TEST_CASE("batch_iter is deterministic in (seed, epoch)") {
  std::vector<Example> ex;
  for (int i = 0; i < 4; ++i) ex.push_back({"t" + std::to_string(i), 0});
  const BatchPlan plan{2, 99, false};
  const auto a = batch_iter(ex, plan, 0);
  const auto b = batch_iter(ex, plan, 0);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) CHECK(a[i][j].text == b[i][j].text);
}

TEST_CASE("different epochs give different permutations") {
  std::vector<Example> ex;
  for (int i = 0; i < 16; ++i) ex.push_back({"t" + std::to_string(i), 0});
  const BatchPlan plan{16, 7, false};
  const auto e0 = batch_iter(ex, plan, 0);
  const auto e1 = batch_iter(ex, plan, 1);
  std::vector<std::string> o0, o1;
  for (const auto& b : e0)
    for (const auto& e : b) o0.push_back(e.text);
  for (const auto& b : e1)
    for (const auto& e : b) o1.push_back(e.text);
  CHECK(o0 != o1);
}

TEST_CASE("drop_last drops the short batch") {
  std::vector<Example> ex;
  for (int i = 0; i < 5; ++i) ex.push_back({"t" + std::to_string(i), 0});
  CHECK(batch_iter(ex, {2, 1, true}, 0).size() == 2);
  CHECK(batch_iter(ex, {2, 1, false}, 0).size() == 3);
  CHECK_THROWS_AS(batch_iter(ex, {9, 1, true}, 0), std::invalid_argument);
}

TEST_CASE("one epoch of batches is a permutation of the input") {
  std::vector<Example> ex;
  for (int i = 0; i < 23; ++i) ex.push_back({"t" + std::to_string(i), i % 3});
  for (std::uint64_t epoch = 0; epoch < 3; ++epoch) {
    const auto batches = batch_iter(ex, {4, 5, false}, epoch);
    std::vector<std::string> seen;
    for (const auto& b : batches)
      for (const auto& e : b) seen.push_back(e.text);
    std::vector<std::string> want;
    for (const auto& e : ex) want.push_back(e.text);
    std::sort(seen.begin(), seen.end());
    std::sort(want.begin(), want.end());
    CHECK(seen == want);
  }
}
