#include <doctest.h>

#include <set>
#include <sstream>

#include "ltr/data.hpp"
#include "ltr/errors.hpp"

using namespace ltr;

TEST_CASE("parse_libsvm reads the documented format") {
  std::istringstream in("2 qid:1 1:0.5 3:1.0 # d7\n0 qid:q 5:0\n");
  auto records = parse_libsvm(in);
  REQUIRE(records.size() == 2);
  CHECK(records[0].label == 2.0);
  CHECK(records[0].query_id == "1");
  CHECK(records[0].dense_features.at(1) == 0.5);
  CHECK(records[0].dense_features.at(3) == 1.0);
  CHECK(records[0].dense_features.size() == 2);
  CHECK(records[0].comment == "d7");
  CHECK(records[1].label == 0.0);
  CHECK(records[1].query_id == "q");
  CHECK(records[1].dense_features.at(5) == 0.0);
  CHECK(records[1].dense_features.size() == 1);
}

TEST_CASE("parse_libsvm reports the failing line") {
  std::istringstream in("x qid:1 1:1\n");
  try {
    parse_libsvm(in);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
  std::istringstream in2("1 qid:1 1:1\n2 qid:2 oops\n");
  try {
    parse_libsvm(in2);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("group_by_qid groups globally, preserving first-appearance order") {
  RawRecord a1, a2, b;
  a1.query_id = "a";
  a1.label = 1;
  a2.query_id = "a";
  a2.label = 2;
  b.query_id = "b";
  b.label = 3;

  auto groups = group_by_qid({a1, a2, b});
  REQUIRE(groups.size() == 2);
  CHECK(groups[0].first == "a");
  CHECK(groups[0].second.size() == 2);
  CHECK(groups[1].first == "b");
  CHECK(groups[1].second.size() == 1);

  // Interleaved qids: grouping is global, not run-length.
  auto interleaved = group_by_qid({a1, b, a2});
  REQUIRE(interleaved.size() == 2);
  CHECK(interleaved[0].first == "a");
  CHECK(interleaved[0].second[0].label == 1);
  CHECK(interleaved[0].second[1].label == 2);
  CHECK(interleaved[1].first == "b");

  CHECK(group_by_qid({}).empty());
}

TEST_CASE("densified records default unspecified indices to zero") {
  RawRecord rec;
  rec.query_id = "q";
  rec.label = 1.0;
  rec.dense_features = {{1, 0.5}, {3, 1.5}};
  auto list = list_from_records("q", {rec}, 4);
  const auto& dense = list.items[0].dense.at("features");
  CHECK(dense == std::vector<double>{0.5, 0.0, 1.5, 0.0});
}

TEST_CASE("libsvm round trip: written file parses back to the same features") {
  std::string text = "1 qid:a 1:0.25 4:-2\n0 qid:a 2:7\n";
  std::istringstream in(text);
  auto records = parse_libsvm(in);
  auto list = list_from_records("a", records, 4);
  CHECK(list.items[0].dense.at("features") == std::vector<double>{0.25, 0, 0, -2});
  CHECK(list.items[1].dense.at("features") == std::vector<double>{0, 7, 0, 0});
}

TEST_CASE("pad_to_list_size pads short lists with sentinel slots") {
  ExampleList list;
  list.query_id = "q";
  list.push_item({}, 1.0, 1.0);
  list.push_item({}, 0.0, 1.0);
  auto padded = pad_to_list_size(std::move(list), 3, Rng(1), TruncatePolicy::kSample);
  REQUIRE(padded.size() == 3);
  CHECK(padded.mask == std::vector<uint8_t>{1, 1, 0});
  CHECK(padded.labels[2] == kPaddingLabel);
  CHECK(padded.valid_count() == 2);
}

TEST_CASE("pad_to_list_size keeps exact-size lists untouched") {
  ExampleList list;
  for (int i = 0; i < 5; ++i) list.push_item({}, static_cast<double>(i), 1.0);
  auto padded = pad_to_list_size(std::move(list), 5, Rng(1), TruncatePolicy::kSample);
  CHECK(padded.valid_count() == 5);
  for (uint8_t m : padded.mask) CHECK(m == 1);
}

TEST_CASE("oversized groups downsample deterministically under a seed") {
  auto make = [] {
    ExampleList list;
    for (int i = 0; i < 10; ++i) list.push_item({}, static_cast<double>(i), 1.0);
    return list;
  };
  auto a = pad_to_list_size(make(), 5, Rng(77).fork("pad", 0), TruncatePolicy::kSample);
  auto b = pad_to_list_size(make(), 5, Rng(77).fork("pad", 0), TruncatePolicy::kSample);
  REQUIRE(a.size() == 5);
  CHECK(a.labels == b.labels);
  CHECK(a.valid_count() == 5);
  // Sampling keeps original relative order and distinct items.
  std::set<double> seen;
  double prev = -1.0;
  for (double l : a.labels) {
    CHECK(l > prev);
    prev = l;
    seen.insert(l);
  }
  CHECK(seen.size() == 5);

  auto first = pad_to_list_size(make(), 5, Rng(77), TruncatePolicy::kFirst);
  CHECK(first.labels == std::vector<double>{0, 1, 2, 3, 4});
}

TEST_CASE("padding preserves the multiset of valid labels") {
  ExampleList list;
  list.push_item({}, 3.0, 2.0);
  list.push_item({}, 0.0, 1.0);
  auto padded = pad_to_list_size(std::move(list), 6, Rng(5), TruncatePolicy::kSample);
  std::multiset<double> valid;
  for (size_t i = 0; i < padded.size(); ++i) {
    if (padded.mask[i]) valid.insert(padded.labels[i]);
  }
  CHECK(valid == std::multiset<double>{0.0, 3.0});
}

TEST_CASE("batch_iterator covers each epoch exactly once with a short tail") {
  std::vector<ExampleList> lists(5);
  for (size_t i = 0; i < 5; ++i) {
    lists[i].query_id = "q" + std::to_string(i);
    lists[i].push_item({}, 1.0, 1.0);
  }
  BatchIterator iter(lists, 2, false, Rng(1));
  CHECK(iter.batches_per_epoch() == 3);
  std::vector<size_t> sizes;
  std::vector<std::string> seen;
  for (int i = 0; i < 3; ++i) {
    auto batch = iter.next();
    sizes.push_back(batch.batch_size());
    for (const auto* l : batch.lists) seen.push_back(l->query_id);
  }
  CHECK(sizes == std::vector<size_t>{2, 2, 1});
  CHECK(seen == std::vector<std::string>{"q0", "q1", "q2", "q3", "q4"});
}

TEST_CASE("batch_iterator shuffling is per-epoch deterministic under the seed") {
  std::vector<ExampleList> lists(7);
  for (size_t i = 0; i < 7; ++i) {
    lists[i].query_id = "q" + std::to_string(i);
    lists[i].push_item({}, 1.0, 1.0);
  }
  auto collect = [&](uint64_t start) {
    BatchIterator iter(lists, 3, true, Rng(4).fork("data", 0), start);
    std::vector<std::string> order;
    for (int i = 0; i < 6; ++i) {
      for (const auto* l : iter.next().lists) order.push_back(l->query_id);
    }
    return order;
  };
  auto a = collect(0);
  auto b = collect(0);
  CHECK(a == b);

  // Epoch coverage despite shuffling.
  std::set<std::string> first_epoch(a.begin(), a.begin() + 7);
  CHECK(first_epoch.size() == 7);

  // Restart at a later cursor reproduces the uninterrupted tail.
  auto resumed = collect(3);
  std::vector<std::string> tail(a.begin() + 7, a.end());
  std::vector<std::string> resumed_head(resumed.begin(), resumed.begin() + tail.size());
  CHECK(resumed_head == tail);
}

TEST_CASE("jsonl parser reads context, items, weights and token features") {
  std::istringstream in(
      R"({"qid":"g","context":{"session":[0.1,0.2],"lang":"en"},"items":[)"
      R"({"label":2,"weight":3.5,"features":{"f":[1,2],"words":["a","b"]}},)"
      R"({"label":0,"features":{"f":[3,4]}}]})"
      "\n");
  auto lists = parse_jsonl(in);
  REQUIRE(lists.size() == 1);
  const auto& list = lists[0];
  CHECK(list.query_id == "g");
  CHECK(list.context_dense.at("session") == std::vector<double>{0.1, 0.2});
  CHECK(list.context_tokens.at("lang") == std::vector<std::string>{"en"});
  REQUIRE(list.size() == 2);
  CHECK(list.labels[0] == 2.0);
  CHECK(list.weights[0] == 3.5);
  CHECK(list.weights[1] == 1.0);
  CHECK(list.items[0].tokens.at("words") == std::vector<std::string>{"a", "b"});
}

TEST_CASE("jsonl parser rejects malformed lines with their number") {
  std::istringstream in("{\"qid\":\"a\",\"items\":[{\"label\":1}]}\nnot json\n");
  try {
    parse_jsonl(in);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }

  std::istringstream neg(R"({"qid":"a","items":[{"label":-2}]})");
  CHECK_THROWS_AS(parse_jsonl(neg), ParseError);
  std::istringstream zero_w(R"({"qid":"a","items":[{"label":1,"weight":0}]})");
  CHECK_THROWS_AS(parse_jsonl(zero_w), ParseError);
}

TEST_CASE("batch_iterator rejects empty datasets and bad batch sizes") {
  std::vector<ExampleList> lists;
  CHECK_THROWS_AS(BatchIterator(lists, 2, false, Rng(1)), DomainError);
  lists.emplace_back();
  lists[0].push_item({}, 1.0, 1.0);
  CHECK_THROWS_AS(BatchIterator(lists, 0, false, Rng(1)), ConfigError);
}
