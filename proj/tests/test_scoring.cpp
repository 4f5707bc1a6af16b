#include <doctest.h>

#include <cmath>

#include "ltr/errors.hpp"
#include "ltr/model.hpp"
#include "ltr/scoring.hpp"
#include "oracles.hpp"

using namespace ltr;

namespace {

// Single dense per-item feature of the given width, no context.
std::vector<FeatureSpec> item_specs(size_t width) {
  FeatureSpec s;
  s.name = "f";
  s.scope = FeatureScope::kPerItem;
  s.width = width;
  return {s};
}

ExampleList make_list(const std::vector<std::vector<double>>& rows,
                      const std::vector<double>& labels) {
  ExampleList list;
  list.query_id = "q";
  for (size_t i = 0; i < rows.size(); ++i) {
    ItemFeatures f;
    f.dense["f"] = rows[i];
    list.push_item(f, labels[i], 1.0);
  }
  return list;
}

Batch batch_of(const std::vector<const ExampleList*>& lists) {
  Batch b;
  b.lists = lists;
  b.list_size = lists.front()->size();
  return b;
}

EncodedBatch encode(const Batch& batch, size_t width) {
  return encode_listwise(batch, item_specs(width), {}, {});
}

ScorerArchitecture arch_of(std::vector<size_t> hidden, size_t group_size,
                           double dropout = 0.0) {
  ScorerArchitecture arch;
  arch.hidden_dims = std::move(hidden);
  arch.dropout_rate = dropout;
  arch.group_size = group_size;
  return arch;
}

double min_abs_preact(const ScoreCache& cache) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& pre : cache.preactivations) {
    for (double v : pre.data) best = std::min(best, std::fabs(v));
  }
  return best;
}

}  // namespace

TEST_CASE("make_groups slices circular windows over valid items") {
  auto g = make_groups(5, 2, 3);
  REQUIRE(g.size() == 3);
  CHECK(g[0] == std::vector<size_t>{0, 1});
  CHECK(g[1] == std::vector<size_t>{1, 2});
  CHECK(g[2] == std::vector<size_t>{2, 0});

  auto singles = make_groups(3, 1, 3);
  REQUIRE(singles.size() == 3);
  CHECK(singles[0] == std::vector<size_t>{0});
  CHECK(singles[2] == std::vector<size_t>{2});

  // Wrapping when group_size exceeds the valid count.
  auto wrapped = make_groups(5, 3, 2);
  REQUIRE(wrapped.size() == 2);
  CHECK(wrapped[0] == std::vector<size_t>{0, 1, 0});
  CHECK(wrapped[1] == std::vector<size_t>{1, 0, 1});

  // Every valid item appears in exactly group_size member slots.
  for (size_t n : {3, 5, 7}) {
    for (size_t gs : {1, 2, 3}) {
      std::vector<size_t> hits(n, 0);
      for (const auto& grp : make_groups(8, gs, n)) {
        for (size_t m : grp) ++hits[m];
      }
      for (size_t h : hits) CHECK(h == gs);
    }
  }

  CHECK_THROWS_AS(make_groups(3, 4, 3), ConfigError);
  CHECK_THROWS_AS(make_groups(3, 0, 3), ConfigError);
}

TEST_CASE("univariate scoring depends only on the item's own features") {
  Rng rng(41);
  auto arch = arch_of({8, 8}, 1);
  auto layers = init_scorer_layers(arch, 3, 0, rng.fork("init"));

  // Identical items get identical scores.
  auto twins = make_list({{0.4, 0.2, 0.1}, {0.4, 0.2, 0.1}}, {1, 0});
  auto enc = encode(batch_of({&twins}), 3);
  auto scored = score_univariate(enc, layers, arch, Mode::kEval, rng);
  CHECK(scored.scores.at(0, 0) == scored.scores.at(0, 1));

  // Perturbing item j never moves item i's score.
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<double>> rows{{rng.next_double(), rng.next_double(), rng.next_double()},
                                          {rng.next_double(), rng.next_double(), rng.next_double()}};
    auto base_list = make_list(rows, {1, 0});
    auto base = score_univariate(encode(batch_of({&base_list}), 3), layers, arch,
                                 Mode::kEval, rng);
    rows[1][0] += rng.next_uniform(0.1, 2.0);
    auto bumped_list = make_list(rows, {1, 0});
    auto bumped = score_univariate(encode(batch_of({&bumped_list}), 3), layers, arch,
                                   Mode::kEval, rng);
    CHECK(base.scores.at(0, 0) == bumped.scores.at(0, 0));
    CHECK(base.scores.at(0, 1) != bumped.scores.at(0, 1));
  }
}

TEST_CASE("zeroed network passes the output bias to every item") {
  auto arch = arch_of({4}, 1);
  std::vector<DenseLayerParams> layers(2);
  layers[0].weight = Matrix(2, 4, 0.0);
  layers[0].bias.assign(4, 0.0);
  layers[1].weight = Matrix(4, 1, 0.0);
  layers[1].bias = {2.5};
  auto list = make_list({{0.1, 0.9}, {0.7, 0.3}}, {1, 0});
  Rng rng(1);
  auto scored = score_univariate(encode(batch_of({&list}), 2), layers, arch, Mode::kEval, rng);
  CHECK(scored.scores.at(0, 0) == 2.5);
  CHECK(scored.scores.at(0, 1) == 2.5);
}

TEST_CASE("groupwise with group_size 1 equals the univariate path") {
  Rng rng(5);
  auto arch = arch_of({6}, 1);
  auto layers = init_scorer_layers(arch, 2, 0, rng.fork("init"));
  auto list = make_list({{0.2, 0.4}, {0.9, 0.5}, {0.3, 0.3}}, {1, 0, 0});
  auto enc = encode(batch_of({&list}), 2);
  auto uni = score_univariate(enc, layers, arch, Mode::kEval, rng);
  auto grp = score_groupwise(enc, layers, arch, Mode::kEval, rng);
  CHECK(uni.scores.data == grp.scores.data);
}

TEST_CASE("a group scorer that ignores co-items reduces to univariate scores") {
  // group_size=2 network whose first-layer weights zero out the second item
  // block; logit p only reads item p's features and the shared parameters.
  Rng rng(6);
  auto uni_arch = arch_of({5}, 1);
  auto uni_layers = init_scorer_layers(uni_arch, 2, 0, rng.fork("init"));

  auto grp_arch = arch_of({10}, 2);
  std::vector<DenseLayerParams> grp_layers(2);
  grp_layers[0].weight = Matrix(4, 10, 0.0);
  grp_layers[0].bias.assign(10, 0.0);
  grp_layers[1].weight = Matrix(10, 2, 0.0);
  grp_layers[1].bias.assign(2, 0.0);
  // Block-diagonal copy of the univariate net: slot p's features feed hidden
  // units [5p, 5p+5) which feed logit p.
  for (size_t p = 0; p < 2; ++p) {
    for (size_t i = 0; i < 2; ++i) {
      for (size_t h = 0; h < 5; ++h) {
        grp_layers[0].weight.at(p * 2 + i, p * 5 + h) = uni_layers[0].weight.at(i, h);
      }
    }
    for (size_t h = 0; h < 5; ++h) {
      grp_layers[0].bias[p * 5 + h] = uni_layers[0].bias[h];
      grp_layers[1].weight.at(p * 5 + h, p) = uni_layers[1].weight.at(h, 0);
    }
    grp_layers[1].bias[p] = uni_layers[1].bias[0];
  }

  auto list = make_list({{0.2, 0.7}, {0.5, 0.1}, {0.8, 0.4}}, {1, 0, 0});
  auto enc = encode(batch_of({&list}), 2);
  Rng rng2(9);
  auto uni = score_univariate(enc, uni_layers, uni_arch, Mode::kEval, rng2);
  auto grp = score_groupwise(enc, grp_layers, grp_arch, Mode::kEval, rng2);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(grp.scores.at(0, i) == doctest::Approx(uni.scores.at(0, i)).epsilon(1e-12));
  }
}

TEST_CASE("voting layer averages the logits each item received") {
  Rng rng(77);
  auto arch = arch_of({7}, 2);
  auto layers = init_scorer_layers(arch, 2, 0, rng.fork("init"));
  auto list = make_list({{0.3, 0.6}, {0.8, 0.2}, {0.1, 0.9}}, {2, 1, 0});
  auto enc = encode(batch_of({&list}), 2);
  auto scored = score_groupwise(enc, layers, arch, Mode::kEval, rng);

  // Hand aggregation: run each window through a manual forward pass.
  auto groups = make_groups(3, 2, 3);
  std::vector<std::vector<double>> logits;
  for (const auto& grp : groups) {
    Matrix x(1, 4);
    for (size_t p = 0; p < 2; ++p) {
      for (size_t c = 0; c < 2; ++c) x.at(0, p * 2 + c) = enc.per_item.at(grp[p], c);
    }
    auto h = relu(dense_forward(x, layers[0]));
    auto out = dense_forward(h, layers[1]);
    logits.push_back({out.at(0, 0), out.at(0, 1)});
  }
  // Item 0 receives its logit in windows (0,1) and (2,0).
  const double expected0 = (logits[0][0] + logits[2][1]) / 2.0;
  CHECK(scored.scores.at(0, 0) == doctest::Approx(expected0).epsilon(1e-12));
  const double expected1 = (logits[0][1] + logits[1][0]) / 2.0;
  CHECK(scored.scores.at(0, 1) == doctest::Approx(expected1).epsilon(1e-12));
}

TEST_CASE("groupwise scores are invariant to the window origin") {
  Rng rng(3);
  auto arch = arch_of({6, 6}, 3);
  auto layers = init_scorer_layers(arch, 2, 0, rng.fork("init"));
  auto list = make_list({{0.3, 0.6}, {0.8, 0.2}, {0.1, 0.9}, {0.4, 0.4}, {0.9, 0.1}},
                        {2, 1, 0, 1, 0});
  auto enc = encode(batch_of({&list}), 2);
  auto base = score_groupwise(enc, layers, arch, Mode::kEval, rng, nullptr, 0);
  for (size_t origin : {1, 2, 3, 4}) {
    auto shifted = score_groupwise(enc, layers, arch, Mode::kEval, rng, nullptr, origin);
    for (size_t i = 0; i < 5; ++i) {
      CHECK(shifted.scores.at(0, i) == doctest::Approx(base.scores.at(0, i)).epsilon(1e-12));
    }
  }
}

TEST_CASE("padded slots score -inf and join no group") {
  Rng rng(12);
  auto arch = arch_of({4}, 2);
  auto layers = init_scorer_layers(arch, 2, 0, rng.fork("init"));
  auto list = make_list({{0.3, 0.6}, {0.8, 0.2}}, {1, 0});
  auto padded = pad_to_list_size(std::move(list), 5, Rng(1), TruncatePolicy::kSample);
  auto enc = encode(batch_of({&padded}), 2);
  ScoreCache cache;
  auto scored = score_groupwise(enc, layers, arch, Mode::kEval, rng, &cache);
  for (size_t i = 2; i < 5; ++i) {
    CHECK(scored.scores.at(0, i) == -std::numeric_limits<double>::infinity());
  }
  // Groups cover only the two valid slots.
  CHECK(cache.groups[0].size() == 2);
  for (const auto& grp : cache.groups[0]) {
    for (size_t m : grp) CHECK(m < 2);
  }
}

TEST_CASE("eval scoring is bit-deterministic across repeats") {
  Rng rng(99);
  auto arch = arch_of({16, 16}, 2, 0.5);  // dropout configured but eval ignores it
  auto layers = init_scorer_layers(arch, 3, 0, rng.fork("init"));
  auto list = make_list({{0.1, 0.2, 0.3}, {0.4, 0.5, 0.6}, {0.7, 0.8, 0.9}}, {1, 0, 2});
  auto enc = encode(batch_of({&list}), 3);
  auto a = score_groupwise(enc, layers, arch, Mode::kEval, rng);
  auto b = score_groupwise(enc, layers, arch, Mode::kEval, rng);
  CHECK(a.scores.data == b.scores.data);
}

TEST_CASE("serving consistency: univariate list scores equal singleton scores") {
  Rng rng(23);
  auto arch = arch_of({12, 12}, 1);
  auto layers = init_scorer_layers(arch, 4, 0, rng.fork("init"));
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 6; ++i) {
    rows.push_back({rng.next_double(), rng.next_double(), rng.next_double(), rng.next_double()});
  }
  auto list = make_list(rows, std::vector<double>(6, 1.0));
  auto whole = score_univariate(encode(batch_of({&list}), 4), layers, arch, Mode::kEval, rng);
  for (size_t i = 0; i < 6; ++i) {
    auto single = make_list({rows[i]}, {1.0});
    auto one = score_univariate(encode(batch_of({&single}), 4), layers, arch, Mode::kEval, rng);
    CHECK(one.scores.at(0, 0) == whole.scores.at(0, i));  // bit-exact
  }
}

TEST_CASE("group_shuffle reorders windows in train mode only") {
  Rng init(71);
  auto arch = arch_of({6}, 2);
  arch.group_shuffle = true;
  auto layers = init_scorer_layers(arch, 2, 0, init.fork("init"));
  auto list = make_list({{0.1, 0.9}, {0.5, 0.5}, {0.9, 0.1}, {0.3, 0.7}}, {1, 0, 0, 0});
  auto enc = encode(batch_of({&list}), 2);

  ScoreCache train_a, train_b, train_c;
  score_groupwise(enc, layers, arch, Mode::kTrain, Rng(1).fork("train_step", 0), &train_a);
  score_groupwise(enc, layers, arch, Mode::kTrain, Rng(1).fork("train_step", 0), &train_b);
  score_groupwise(enc, layers, arch, Mode::kTrain, Rng(1).fork("train_step", 1), &train_c);
  CHECK(train_a.groups == train_b.groups);  // same step key, same order
  CHECK(train_a.groups != train_c.groups);  // another step reshuffles

  // Eval ignores the flag: windows follow slot order.
  ScoreCache eval_cache;
  score_groupwise(enc, layers, arch, Mode::kEval, Rng(1).fork("train_step", 0), &eval_cache);
  CHECK(eval_cache.groups[0][0] == std::vector<size_t>{0, 1});
  CHECK(eval_cache.groups[0][3] == std::vector<size_t>{3, 0});
}

TEST_CASE("scorer_backward requires a cached train forward") {
  ScoreCache cache;
  std::vector<DenseLayerParams> layers;
  CHECK_THROWS_AS(scorer_backward(cache, layers, Matrix(1, 1)), StateError);
}

TEST_CASE("zero upstream yields zero parameter gradients") {
  Rng rng(31);
  auto arch = arch_of({5}, 2);
  auto layers = init_scorer_layers(arch, 2, 0, rng.fork("init"));
  auto list = make_list({{0.3, 0.6}, {0.8, 0.2}, {0.1, 0.9}}, {1, 0, 0});
  auto enc = encode(batch_of({&list}), 2);
  ScoreCache cache;
  score_groupwise(enc, layers, arch, Mode::kTrain, rng.fork("step"), &cache);
  auto grads = scorer_backward(cache, layers, Matrix(1, 3, 0.0));
  for (const auto& layer : grads.layers) {
    for (double v : layer.weight.data) CHECK(v == 0.0);
    for (double v : layer.bias) CHECK(v == 0.0);
  }
  for (double v : grads.d_per_item.data) CHECK(v == 0.0);
}

TEST_CASE("linear-region scorer matches the closed-form linear-model gradient") {
  // Positive inputs, positive weights and zero biases keep every ReLU in its
  // identity region, so the scorer is the linear map W1 W2 and the gradients
  // have closed forms.
  Rng rng(19);
  const size_t in = 3, hidden = 4;
  std::vector<DenseLayerParams> layers(2);
  layers[0].weight = random_matrix(in, hidden, 0.1, 1.0, rng);
  layers[0].bias.assign(hidden, 0.0);
  layers[1].weight = random_matrix(hidden, 1, 0.1, 1.0, rng);
  layers[1].bias.assign(1, 0.0);
  auto arch = arch_of({hidden}, 1);

  std::vector<std::vector<double>> rows{{0.2, 0.5, 0.9}, {0.7, 0.1, 0.4}};
  auto list = make_list(rows, {1, 0});
  auto enc = encode(batch_of({&list}), in);
  ScoreCache cache;
  score_univariate(enc, layers, arch, Mode::kTrain, rng.fork("step"), &cache);

  Matrix upstream(1, 2);
  upstream.at(0, 0) = 0.7;
  upstream.at(0, 1) = -1.2;
  auto grads = scorer_backward(cache, layers, upstream);

  // grad_W2[h] = sum_b (X W1)[b][h] * u[b];  grad_W1[i][h] = sum_b X[b][i] u[b] W2[h].
  auto hidden_act = dense_forward(enc.per_item, layers[0]);
  for (size_t h = 0; h < hidden; ++h) {
    double expected = 0.0;
    for (size_t b = 0; b < 2; ++b) expected += hidden_act.at(b, h) * upstream.at(0, b);
    CHECK(grads.layers[1].weight.at(h, 0) == doctest::Approx(expected).epsilon(1e-12));
  }
  for (size_t i = 0; i < in; ++i) {
    for (size_t h = 0; h < hidden; ++h) {
      double expected = 0.0;
      for (size_t b = 0; b < 2; ++b) {
        expected += enc.per_item.at(b, i) * upstream.at(0, b) * layers[1].weight.at(h, 0);
      }
      CHECK(grads.layers[0].weight.at(i, h) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("full pipeline gradients match finite differences") {
  // Softmax loss through encode -> groupwise scorer -> voting, differentiated
  // w.r.t. every layer parameter, on a 2-list batch with dropout active.
  for (size_t group_size : {size_t{1}, size_t{2}}) {
    RankingConfig config;
    config.list_size = 4;
    config.group_size = group_size;
    config.hidden_dims = {6, 5};
    config.dropout_rate = 0.3;
    config.seed = 1234 + group_size;
    config.loss = LossKey::kSoftmaxCrossEntropy;
    FeatureSpec spec;
    spec.name = "f";
    spec.width = 3;
    config.feature_specs = {spec};

    auto params = init_params(config, {});
    std::vector<ExampleList> lists;
    Rng rng(55 + group_size);
    for (int q = 0; q < 2; ++q) {
      std::vector<std::vector<double>> rows;
      std::vector<double> labels;
      for (int i = 0; i < 3 + q; ++i) {
        rows.push_back({rng.next_double(), rng.next_double(), rng.next_double()});
        labels.push_back(static_cast<double>(rng.next_below(3)));
      }
      lists.push_back(pad_to_list_size(make_list(rows, labels), 4, Rng(q), TruncatePolicy::kSample));
    }
    Batch batch = batch_of({&lists[0], &lists[1]});

    const uint64_t step = 3;
    auto analytic = compute_gradients(params, config, {}, batch, step);
    auto loss_at = [&](const ModelParams& p) {
      return compute_gradients(p, config, {}, batch, step).loss;
    };

    for (size_t l = 0; l < params.layers.size(); ++l) {
      auto fd_w = oracle::central_diff(
          [&](const std::vector<double>& flat) {
            ModelParams p = params;
            p.layers[l].weight.data = flat;
            return loss_at(p);
          },
          params.layers[l].weight.data, 1e-6);
      for (size_t i = 0; i < fd_w.size(); ++i) {
        CHECK(oracle::close_rel(analytic.grads.layers[l].weight.data[i], fd_w[i], 1e-4));
      }
      auto fd_b = oracle::central_diff(
          [&](const std::vector<double>& flat) {
            ModelParams p = params;
            p.layers[l].bias = flat;
            return loss_at(p);
          },
          params.layers[l].bias, 1e-6);
      for (size_t i = 0; i < fd_b.size(); ++i) {
        CHECK(oracle::close_rel(analytic.grads.layers[l].bias[i], fd_b[i], 1e-4));
      }
    }
  }
}
