#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ltr/rng.hpp"

namespace ltr {

/// Sentinel label carried by padded slots. Real labels are >= 0, so the
/// sentinel can never collide with a valid one; the mask is authoritative.
constexpr double kPaddingLabel = -1.0;

/// One parsed LIBSVM line.
struct RawRecord {
  double label = 0.0;
  std::string query_id;
  std::map<int, double> dense_features;  // indices stored as given (1-based)
  std::map<std::string, std::vector<std::string>> categorical_features;
  std::string comment;
};

/// `<label> qid:<id> <idx>:<val> ... [# comment]`, one record per line.
/// Throws ParseError with the 1-based line number on malformed input.
std::vector<RawRecord> parse_libsvm(std::istream& in);

/// Groups preserve first-appearance order of qids; records within a group
/// keep file order. Grouping is global, not run-length.
std::vector<std::pair<std::string, std::vector<RawRecord>>> group_by_qid(
    const std::vector<RawRecord>& records);

/// Feature payload of one item: named dense vectors and named token lists.
struct ItemFeatures {
  std::map<std::string, std::vector<double>> dense;
  std::map<std::string, std::vector<std::string>> tokens;
};

/// One query's items, labels, weights and validity mask. Lists are built
/// unpadded (mask all true) and then brought to a fixed size by
/// pad_to_list_size.
struct ExampleList {
  std::string query_id;
  std::map<std::string, std::vector<double>> context_dense;
  std::map<std::string, std::vector<std::string>> context_tokens;
  std::vector<ItemFeatures> items;
  std::vector<double> labels;
  std::vector<double> weights;
  std::vector<uint8_t> mask;  // 1 = valid slot

  size_t size() const { return items.size(); }
  size_t valid_count() const;
  void push_item(ItemFeatures features, double label, double weight);
};

/// How oversized groups are brought down to list_size.
enum class TruncatePolicy {
  kSample,  // uniform subset without replacement, original order kept
  kFirst,   // first list_size items
};

TruncatePolicy truncate_policy_from_string(const std::string& name);

/// LIBSVM records of one query as an unpadded list. Sparse indices are
/// densified into a single per-item feature named "features" of width
/// `dense_width`; unspecified indices become 0.0.
ExampleList list_from_records(const std::string& qid, const std::vector<RawRecord>& records,
                              size_t dense_width);

/// Pads short lists with mask=false / label=-1 / zero-feature slots, and
/// shrinks oversized ones under `policy`. Deterministic under `rng`.
ExampleList pad_to_list_size(ExampleList list, size_t list_size, Rng rng,
                             TruncatePolicy policy);

/// JSONL-listwise: one JSON object per line,
///   {"qid": str, "context": {name: value-or-tokens},
///    "items": [{"label": num, "weight": num, "features": {name: value-or-tokens}}]}
/// Lists come back unpadded. Throws ParseError with the line number.
std::vector<ExampleList> parse_jsonl(std::istream& in);

/// Reads a dataset file, unpadded. Format is picked by content: lines starting
/// with '{' are JSONL-listwise, anything else is LIBSVM. For LIBSVM the dense
/// width is the maximum feature index seen (or `libsvm_width` if nonzero).
std::vector<ExampleList> read_lists(const std::string& path, size_t libsvm_width = 0);

/// Pads every list; per-list randomness is keyed by list position.
std::vector<ExampleList> pad_all(std::vector<ExampleList> lists, size_t list_size,
                                 const Rng& rng, TruncatePolicy policy);

struct Batch {
  std::vector<const ExampleList*> lists;
  size_t list_size = 0;

  size_t batch_size() const { return lists.size(); }
};

/// Endless stream of batches; each epoch covers every list exactly once and
/// the final short batch is emitted as-is. The epoch permutation is a pure
/// function of (key, epoch), so an iterator restarted at `start_batch` yields
/// exactly the batches an uninterrupted run would have produced.
class BatchIterator {
 public:
  BatchIterator(const std::vector<ExampleList>& lists, size_t batch_size, bool shuffle,
                Rng key, uint64_t start_batch = 0);

  Batch next();
  size_t batches_per_epoch() const { return batches_per_epoch_; }
  uint64_t cursor() const { return cursor_; }

 private:
  void load_epoch(uint64_t epoch);

  const std::vector<ExampleList>* lists_;
  size_t batch_size_;
  size_t batches_per_epoch_;
  bool shuffle_;
  Rng key_;
  uint64_t cursor_;
  uint64_t cached_epoch_;
  std::vector<size_t> order_;
};

}  // namespace ltr
