#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "ltr/errors.hpp"
#include "ltr/feature.hpp"
#include "oracles.hpp"

using namespace ltr;

namespace {

FeatureSpec dense_spec(const std::string& name, size_t width,
                       FeatureScope scope = FeatureScope::kPerItem) {
  FeatureSpec s;
  s.name = name;
  s.scope = scope;
  s.width = width;
  return s;
}

FeatureSpec cat_spec(const std::string& name, const std::string& vocab_id, size_t dim,
                     FeatureScope scope = FeatureScope::kPerItem) {
  FeatureSpec s;
  s.name = name;
  s.scope = scope;
  s.categorical = true;
  s.vocabulary_id = vocab_id;
  s.embedding_dim = dim;
  return s;
}

}  // namespace

TEST_CASE("build_vocab prunes by frequency and orders by count then token") {
  auto v1 = build_vocab({"a", "a", "b"}, 1, 1, "v");
  CHECK(v1.token_to_index.at("a") == 0);
  CHECK(v1.token_to_index.at("b") == 1);

  auto v2 = build_vocab({"a", "a", "b"}, 2, 1, "v");
  CHECK(v2.size() == 1);
  CHECK(v2.token_to_index.at("a") == 0);
  CHECK(v2.lookup("b") >= v2.size());  // OOV bucket

  // Ties break lexicographically.
  auto v3 = build_vocab({"b", "a", "b", "a"}, 1, 1, "v");
  CHECK(v3.token_to_index.at("a") == 0);
  CHECK(v3.token_to_index.at("b") == 1);
}

TEST_CASE("oov lookup is the stated fnv1a hash into the bucket range") {
  auto vocab = build_vocab({"a", "b"}, 1, 4, "v");
  const size_t bucket = vocab.lookup("unseen-token");
  CHECK(bucket >= vocab.size());
  CHECK(bucket < vocab.total_rows());
  CHECK(bucket == vocab.size() + fnv1a64("unseen-token") % 4);
  CHECK(vocab.lookup("unseen-token") == bucket);  // stable across calls
}

TEST_CASE("embed_lookup: exact row, zero vector, mean pooling") {
  auto vocab = build_vocab({"a", "b"}, 1, 1, "v");
  EmbeddingTable table;
  table.vocabulary_id = "v";
  table.rows = Matrix(3, 2);
  table.rows.at(0, 0) = 1.0;
  table.rows.at(0, 1) = 2.0;
  table.rows.at(1, 0) = 3.0;
  table.rows.at(1, 1) = 4.0;

  CHECK(embed_lookup({"a"}, vocab, table) == std::vector<double>{1.0, 2.0});
  CHECK(embed_lookup({}, vocab, table) == std::vector<double>{0.0, 0.0});
  CHECK(embed_lookup({"a", "b"}, vocab, table) == std::vector<double>{2.0, 3.0});
}

TEST_CASE("embed_backward is the exact adjoint of embed_lookup") {
  auto vocab = build_vocab({"a", "b", "c"}, 1, 1, "v");
  Rng rng(13);
  EmbeddingTable table;
  table.vocabulary_id = "v";
  table.rows = random_matrix(4, 3, -1.0, 1.0, rng);

  const std::vector<std::string> tokens{"a", "c", "c"};
  std::vector<double> upstream{0.3, -1.0, 0.5};

  RowGrads grads;
  embed_backward(tokens, vocab, upstream, 3, grads);
  CHECK(grads.count(vocab.lookup("b")) == 0);

  // Objective: dot(upstream, lookup(tokens)) as a function of the table.
  auto objective = [&](const std::vector<double>& flat) {
    EmbeddingTable t = table;
    t.rows.data = flat;
    auto vec = embed_lookup(tokens, vocab, t);
    double s = 0.0;
    for (size_t d = 0; d < vec.size(); ++d) s += upstream[d] * vec[d];
    return s;
  };
  auto fd = oracle::central_diff(objective, table.rows.data);
  for (size_t row = 0; row < table.rows.rows; ++row) {
    for (size_t d = 0; d < 3; ++d) {
      const double analytic = grads.count(row) ? grads.at(row)[d] : 0.0;
      CHECK(oracle::close_rel(analytic, fd[row * 3 + d], 1e-5));
    }
  }

  // Single token receives the upstream exactly; empty tokens produce nothing.
  RowGrads single;
  embed_backward({"a"}, vocab, upstream, 3, single);
  CHECK(single.at(0) == upstream);
  RowGrads none;
  embed_backward({}, vocab, upstream, 3, none);
  CHECK(none.empty());
}

namespace {

Batch singleton_batch(const ExampleList& list) {
  Batch b;
  b.lists = {&list};
  b.list_size = list.size();
  return b;
}

}  // namespace

TEST_CASE("encode_listwise lays features out in declaration order") {
  ExampleList list;
  list.query_id = "q";
  ItemFeatures i0, i1;
  i0.dense["x"] = {0.3};
  i1.dense["x"] = {0.7};
  list.push_item(i0, 1.0, 1.0);
  list.push_item(i1, 0.0, 1.0);

  std::vector<FeatureSpec> specs{dense_spec("x", 1)};
  auto enc = encode_listwise(singleton_batch(list), specs, {}, {});
  CHECK(enc.context.cols == 0);
  REQUIRE(enc.per_item.rows == 2);
  CHECK(enc.per_item.at(0, 0) == 0.3);
  CHECK(enc.per_item.at(1, 0) == 0.7);

  // dense(1) + embedding(2): dense first, then the embedding columns.
  auto vocab = build_vocab({"t"}, 1, 1, "v");
  EmbeddingTable table;
  table.vocabulary_id = "v";
  table.rows = Matrix(2, 2);
  table.rows.at(0, 0) = 5.0;
  table.rows.at(0, 1) = 6.0;
  ExampleList list2;
  ItemFeatures j;
  j.dense["x"] = {0.5};
  j.tokens["w"] = {"t"};
  list2.push_item(j, 1.0, 1.0);
  std::vector<FeatureSpec> both{dense_spec("x", 1), cat_spec("w", "v", 2)};
  std::map<std::string, Vocabulary> vocabs{{"v", vocab}};
  std::map<std::string, EmbeddingTable> tables{{"v", table}};
  auto enc2 = encode_listwise(singleton_batch(list2), both, vocabs, tables);
  CHECK(enc2.per_item.cols == 3);
  CHECK(enc2.per_item.at(0, 0) == 0.5);
  CHECK(enc2.per_item.at(0, 1) == 5.0);
  CHECK(enc2.per_item.at(0, 2) == 6.0);
}

TEST_CASE("encode_listwise zeroes missing features and padded slots") {
  ExampleList list;
  list.push_item({}, 1.0, 1.0);  // no features at all
  auto padded = pad_to_list_size(std::move(list), 2, Rng(1), TruncatePolicy::kSample);
  std::vector<FeatureSpec> specs{dense_spec("x", 2)};
  auto enc = encode_listwise(singleton_batch(padded), specs, {}, {});
  for (double v : enc.per_item.data) CHECK(v == 0.0);
  CHECK(enc.mask == std::vector<uint8_t>{1, 0});
}

TEST_CASE("encode_listwise rejects unknown vocabularies") {
  ExampleList list;
  ItemFeatures f;
  f.tokens["w"] = {"t"};
  list.push_item(f, 1.0, 1.0);
  std::vector<FeatureSpec> specs{cat_spec("w", "missing", 2)};
  CHECK_THROWS_AS(encode_listwise(singleton_batch(list), specs, {}, {}), ConfigError);
}

TEST_CASE("encode_listwise is permutation-equivariant over items") {
  Rng rng(21);
  auto vocab = build_vocab({"a", "b", "c"}, 1, 2, "v");
  auto table = init_embedding_table(vocab, 3, rng.fork("emb"));
  std::map<std::string, Vocabulary> vocabs{{"v", vocab}};
  std::map<std::string, EmbeddingTable> tables{{"v", table}};
  std::vector<FeatureSpec> specs{dense_spec("x", 2), cat_spec("w", "v", 3)};

  ExampleList list;
  const std::vector<std::string> toks{"a", "b", "c", "zz"};
  for (size_t i = 0; i < 4; ++i) {
    ItemFeatures f;
    f.dense["x"] = {rng.next_double(), rng.next_double()};
    f.tokens["w"] = {toks[i]};
    list.push_item(f, 1.0, 1.0);
  }
  auto enc = encode_listwise(singleton_batch(list), specs, vocabs, tables);

  ExampleList permuted;
  const std::vector<size_t> perm{2, 0, 3, 1};
  for (size_t i : perm) permuted.push_item(list.items[i], list.labels[i], list.weights[i]);
  auto enc_p = encode_listwise(singleton_batch(permuted), specs, vocabs, tables);

  for (size_t i = 0; i < 4; ++i) {
    for (size_t c = 0; c < enc.per_item.cols; ++c) {
      CHECK(enc_p.per_item.at(i, c) == enc.per_item.at(perm[i], c));
    }
  }
}

TEST_CASE("embedding init is seeded and bounded by 1/sqrt(dim)") {
  auto vocab = build_vocab({"a", "b"}, 1, 1, "v");
  auto t1 = init_embedding_table(vocab, 16, Rng(5));
  auto t2 = init_embedding_table(vocab, 16, Rng(5));
  CHECK(t1.rows.data == t2.rows.data);
  const double bound = 1.0 / 4.0;
  for (double v : t1.rows.data) {
    CHECK(v >= -bound);
    CHECK(v < bound);
  }
}

TEST_CASE("infer_feature_specs discovers dense and categorical features") {
  std::istringstream in(
      R"({"qid":"a","context":{"s":[1,2]},"items":[{"label":1,"features":{"f":[1,2,3],"w":"tok"}}]})"
      "\n");
  auto lists = parse_jsonl(in);
  auto specs = infer_feature_specs(lists, 20);
  REQUIRE(specs.size() == 3);
  CHECK(specs[0].name == "s");
  CHECK(specs[0].scope == FeatureScope::kContext);
  CHECK(specs[0].width == 2);
  CHECK(specs[1].name == "f");
  CHECK_FALSE(specs[1].categorical);
  CHECK(specs[1].width == 3);
  CHECK(specs[2].name == "w");
  CHECK(specs[2].categorical);
  CHECK(specs[2].embedding_dim == 20);
}
