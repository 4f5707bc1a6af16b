#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ltr/data.hpp"

namespace ltr {

enum class LabelScheme { kGraded, kClicks };

LabelScheme label_scheme_from_string(const std::string& name);
std::string to_string(LabelScheme scheme);

/// Generator for position-bias experiments: dense features are uniform in
/// [0,1)^d, the true utility is a fixed linear function of them (or of a
/// hidden per-token value when token_vocab > 0, in which case the dense
/// features are pure noise). Graded labels quantile-bucket the utility within
/// each query. Click labels simulate a biased logging policy: items are shown
/// in the order of a miscalibrated utility (first half of the true weights,
/// plus noise), examined with probability rank^(-eta), and clicked items
/// carry IPW weight rank^(+eta).
struct SyntheticSpec {
  size_t query_count = 1000;
  size_t items_min = 10;
  size_t items_max = 10;
  size_t dense_dim = 10;
  std::string weight_scheme = "uniform";  // true weights ~ U(-1,1)^d under seed
  LabelScheme scheme = LabelScheme::kGraded;
  size_t levels = 5;              // graded label count
  double position_bias_eta = 1.0; // clicks
  double click_noise = 0.25;      // ranking-noise stddev, relative to utility spread
  size_t token_vocab = 0;         // >0: utility driven by a categorical token
  double eval_fraction = 0.1;
  uint64_t seed = 1;

  void validate(std::vector<std::string>& problems) const;
};

struct SyntheticData {
  std::vector<ExampleList> train;  // unpadded; clicks scheme: click labels + IPW weights
  std::vector<ExampleList> eval;   // unpadded; always carries the true graded labels
  /// True utility per item (input order) for every query, train and eval.
  std::vector<std::pair<std::string, std::vector<double>>> truth;
  std::vector<double> true_weights;
};

SyntheticData gen_synthetic(const SyntheticSpec& spec);

/// Writes train.<ext>, eval.<ext> and ground_truth.tsv under `dir`.
/// format: "jsonl" (native) or "libsvm" (graded dense-only data only).
void write_synthetic(const SyntheticData& data, const std::string& dir,
                     const std::string& format);

}  // namespace ltr
