#include "ltr/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>

#include <json.hpp>

#include "ltr/errors.hpp"
#include "ltr/rng.hpp"

namespace ltr {

LabelScheme label_scheme_from_string(const std::string& name) {
  if (name == "graded") return LabelScheme::kGraded;
  if (name == "clicks") return LabelScheme::kClicks;
  throw ConfigError("unknown label scheme '" + name + "' (expected graded|clicks)");
}

std::string to_string(LabelScheme scheme) {
  return scheme == LabelScheme::kGraded ? "graded" : "clicks";
}

void SyntheticSpec::validate(std::vector<std::string>& problems) const {
  if (query_count < 1) problems.push_back("synth: queries must be >= 1");
  if (items_min < 1) problems.push_back("synth: items_min must be >= 1");
  if (items_max < items_min) problems.push_back("synth: items_max must be >= items_min");
  if (dense_dim < 1) problems.push_back("synth: dim must be >= 1");
  if (weight_scheme != "uniform") {
    problems.push_back("synth: unknown weight scheme '" + weight_scheme + "'");
  }
  if (levels < 2) problems.push_back("synth: levels must be >= 2");
  if (position_bias_eta < 0.0) problems.push_back("synth: eta must be >= 0");
  if (click_noise < 0.0) problems.push_back("synth: click_noise must be >= 0");
  if (eval_fraction < 0.0 || eval_fraction >= 1.0) {
    problems.push_back("synth: eval_fraction must be in [0, 1)");
  }
}

namespace {

// Quantile-bucketed grades: items sorted by utility ascending; grade of the
// item at ascending position p is floor(p * levels / n). Monotone in u, so
// ranking by true utility is label-ideal by construction.
std::vector<double> graded_labels(const std::vector<double>& utilities, size_t levels) {
  const size_t n = utilities.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return utilities[a] < utilities[b]; });
  std::vector<double> labels(n, 0.0);
  for (size_t p = 0; p < n; ++p) {
    labels[order[p]] = static_cast<double>(p * levels / n);
  }
  return labels;
}

}  // namespace

SyntheticData gen_synthetic(const SyntheticSpec& spec) {
  std::vector<std::string> problems;
  spec.validate(problems);
  if (!problems.empty()) {
    std::string joined;
    for (const auto& p : problems) joined += (joined.empty() ? "" : "; ") + p;
    throw ConfigError(joined);
  }

  Rng root(spec.seed);
  SyntheticData data;

  Rng weight_rng = root.fork("truth_weights");
  data.true_weights.resize(spec.dense_dim);
  for (double& w : data.true_weights) w = weight_rng.next_uniform(-1.0, 1.0);

  std::vector<double> token_values(spec.token_vocab);
  Rng token_rng = root.fork("token_values");
  for (double& v : token_values) v = token_rng.next_double();

  size_t eval_quota = 0;
  for (size_t q = 0; q < spec.query_count; ++q) {
    Rng qrng = root.fork("query", q);
    const size_t n = spec.items_min + qrng.next_below(spec.items_max - spec.items_min + 1);

    ExampleList list;
    list.query_id = "q" + std::to_string(q);
    std::vector<double> utilities(n, 0.0);
    std::vector<std::string> tokens(n);
    std::vector<std::vector<double>> features(n);
    for (size_t i = 0; i < n; ++i) {
      features[i].resize(spec.dense_dim);
      for (double& x : features[i]) x = qrng.next_double();
      if (spec.token_vocab > 0) {
        const size_t t = qrng.next_below(spec.token_vocab);
        tokens[i] = "t" + std::to_string(t);
        utilities[i] = token_values[t];
      } else {
        for (size_t d = 0; d < spec.dense_dim; ++d) {
          utilities[i] += data.true_weights[d] * features[i][d];
        }
      }
    }

    auto truth_labels = graded_labels(utilities, spec.levels);

    // Even spread of eval queries: one whenever the running quota crosses an
    // integer, matching the requested fraction for any query count.
    const bool is_eval =
        static_cast<size_t>(std::floor((q + 1) * spec.eval_fraction)) > eval_quota;
    if (is_eval) ++eval_quota;

    std::vector<double> labels = truth_labels;
    std::vector<double> weights(n, 1.0);
    if (!is_eval && spec.scheme == LabelScheme::kClicks) {
      // Production ranking: a miscalibrated utility estimate (only the first
      // half of the true weights) plus noise. The misweighted component makes
      // examination correlate with the wrong feature direction, which is the
      // logging-policy bias the IPW weights exist to undo.
      double lo = *std::min_element(utilities.begin(), utilities.end());
      double hi = *std::max_element(utilities.begin(), utilities.end());
      const double spread = hi > lo ? hi - lo : 1.0;
      std::vector<double> shown(n);
      Rng noise_rng = qrng.fork("rank_noise");
      for (size_t i = 0; i < n; ++i) {
        if (spec.token_vocab > 0) {
          shown[i] = utilities[i];
        } else {
          shown[i] = 0.0;
          for (size_t d = 0; d < (spec.dense_dim + 1) / 2; ++d) {
            shown[i] += data.true_weights[d] * features[i][d];
          }
        }
        shown[i] += spec.click_noise * spread * noise_rng.next_normal();
      }
      std::vector<size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](size_t a, size_t b) { return shown[a] > shown[b]; });
      Rng click_rng = qrng.fork("clicks");
      for (size_t r = 0; r < n; ++r) {
        const size_t i = order[r];
        const double rank = static_cast<double>(r + 1);
        const double relevance = hi > lo ? (utilities[i] - lo) / spread : 0.5;
        const double examine = std::pow(rank, -spec.position_bias_eta);
        const bool clicked = click_rng.next_double() < relevance * examine;
        labels[i] = clicked ? 1.0 : 0.0;
        weights[i] = clicked ? std::pow(rank, spec.position_bias_eta) : 1.0;
      }
    }

    for (size_t i = 0; i < n; ++i) {
      ItemFeatures feat;
      feat.dense["features"] = features[i];
      if (spec.token_vocab > 0) feat.tokens["token"] = {tokens[i]};
      list.push_item(std::move(feat), labels[i], weights[i]);
    }
    data.truth.emplace_back(list.query_id, utilities);
    (is_eval ? data.eval : data.train).push_back(std::move(list));
  }
  return data;
}

namespace {

void write_jsonl(const std::vector<ExampleList>& lists, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  for (const auto& list : lists) {
    nlohmann::json j;
    j["qid"] = list.query_id;
    nlohmann::json items = nlohmann::json::array();
    for (size_t i = 0; i < list.size(); ++i) {
      nlohmann::json item;
      item["label"] = list.labels[i];
      if (list.weights[i] != 1.0) item["weight"] = list.weights[i];
      nlohmann::json features;
      for (const auto& [name, v] : list.items[i].dense) features[name] = v;
      for (const auto& [name, v] : list.items[i].tokens) features[name] = v;
      item["features"] = std::move(features);
      items.push_back(std::move(item));
    }
    j["items"] = std::move(items);
    out << j.dump() << "\n";
  }
}

void write_libsvm(const std::vector<ExampleList>& lists, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << std::setprecision(17);
  for (const auto& list : lists) {
    for (size_t i = 0; i < list.size(); ++i) {
      if (!list.items[i].tokens.empty() || list.weights[i] != 1.0) {
        throw ConfigError("libsvm output supports dense unweighted data only");
      }
      out << list.labels[i] << " qid:" << list.query_id;
      auto it = list.items[i].dense.find("features");
      if (it != list.items[i].dense.end()) {
        for (size_t d = 0; d < it->second.size(); ++d) {
          out << " " << (d + 1) << ":" << it->second[d];
        }
      }
      out << "\n";
    }
  }
}

}  // namespace

void write_synthetic(const SyntheticData& data, const std::string& dir,
                     const std::string& format) {
  std::filesystem::create_directories(dir);
  if (format == "jsonl") {
    write_jsonl(data.train, dir + "/train.jsonl");
    write_jsonl(data.eval, dir + "/eval.jsonl");
  } else if (format == "libsvm") {
    write_libsvm(data.train, dir + "/train.txt");
    write_libsvm(data.eval, dir + "/eval.txt");
  } else {
    throw ConfigError("unknown synth format '" + format + "' (expected jsonl|libsvm)");
  }
  std::ofstream truth(dir + "/ground_truth.tsv");
  if (!truth) throw IoError("cannot write '" + dir + "/ground_truth.tsv'");
  truth << std::setprecision(17) << "qid\titem_index\tutility\n";
  for (const auto& [qid, utilities] : data.truth) {
    for (size_t i = 0; i < utilities.size(); ++i) {
      truth << qid << "\t" << i << "\t" << utilities[i] << "\n";
    }
  }
}

}  // namespace ltr
