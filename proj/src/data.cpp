#include "ltr/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "ltr/errors.hpp"

namespace ltr {

namespace {

using nlohmann::json;

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

[[noreturn]] void parse_fail(size_t line_no, const std::string& what) {
  throw ParseError("line " + std::to_string(line_no) + ": " + what);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream iss(s);
  std::string tok;
  while (iss >> tok) out.push_back(tok);
  return out;
}

}  // namespace

std::vector<RawRecord> parse_libsvm(std::istream& in) {
  std::vector<RawRecord> records;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string body = line;
    std::string comment;
    if (auto hash = line.find('#'); hash != std::string::npos) {
      body = line.substr(0, hash);
      comment = line.substr(hash + 1);
      if (!comment.empty() && comment.front() == ' ') comment.erase(0, 1);
    }
    auto fields = split_ws(body);
    if (fields.empty()) continue;
    if (fields.size() < 2) parse_fail(line_no, "expected '<label> qid:<id> ...'");

    RawRecord rec;
    rec.comment = std::move(comment);
    if (!parse_double(fields[0], rec.label)) {
      parse_fail(line_no, "non-numeric label '" + fields[0] + "'");
    }
    if (fields[1].rfind("qid:", 0) != 0 || fields[1].size() == 4) {
      parse_fail(line_no, "expected qid:<id>, got '" + fields[1] + "'");
    }
    rec.query_id = fields[1].substr(4);

    for (size_t f = 2; f < fields.size(); ++f) {
      auto colon = fields[f].find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == fields[f].size()) {
        parse_fail(line_no, "expected <idx>:<val>, got '" + fields[f] + "'");
      }
      int idx = 0;
      const char* first = fields[f].data();
      auto [p, ec] = std::from_chars(first, first + colon, idx);
      if (ec != std::errc() || p != first + colon || idx < 1) {
        parse_fail(line_no, "bad feature index in '" + fields[f] + "'");
      }
      double val = 0.0;
      if (!parse_double(fields[f].substr(colon + 1), val)) {
        parse_fail(line_no, "bad feature value in '" + fields[f] + "'");
      }
      rec.dense_features[idx] = val;
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<std::pair<std::string, std::vector<RawRecord>>> group_by_qid(
    const std::vector<RawRecord>& records) {
  std::vector<std::pair<std::string, std::vector<RawRecord>>> groups;
  std::unordered_map<std::string, size_t> index;
  for (const auto& rec : records) {
    auto [it, inserted] = index.try_emplace(rec.query_id, groups.size());
    if (inserted) groups.emplace_back(rec.query_id, std::vector<RawRecord>{});
    groups[it->second].second.push_back(rec);
  }
  return groups;
}

size_t ExampleList::valid_count() const {
  size_t n = 0;
  for (uint8_t m : mask) n += m != 0;
  return n;
}

void ExampleList::push_item(ItemFeatures features, double label, double weight) {
  items.push_back(std::move(features));
  labels.push_back(label);
  weights.push_back(weight);
  mask.push_back(1);
}

TruncatePolicy truncate_policy_from_string(const std::string& name) {
  if (name == "sample") return TruncatePolicy::kSample;
  if (name == "first") return TruncatePolicy::kFirst;
  throw ConfigError("unknown truncate policy '" + name + "' (expected sample|first)");
}

ExampleList list_from_records(const std::string& qid, const std::vector<RawRecord>& records,
                              size_t dense_width) {
  ExampleList list;
  list.query_id = qid;
  for (const auto& rec : records) {
    ItemFeatures feat;
    std::vector<double> dense(dense_width, 0.0);
    for (const auto& [idx, val] : rec.dense_features) {
      if (static_cast<size_t>(idx) <= dense_width) dense[idx - 1] = val;
    }
    feat.dense["features"] = std::move(dense);
    feat.tokens = rec.categorical_features;
    list.push_item(std::move(feat), rec.label, 1.0);
  }
  return list;
}

ExampleList pad_to_list_size(ExampleList list, size_t list_size, Rng rng,
                             TruncatePolicy policy) {
  if (list_size < 1) throw ConfigError("list_size must be >= 1");
  const size_t n = list.items.size();
  if (n > list_size) {
    std::vector<size_t> keep(n);
    std::iota(keep.begin(), keep.end(), 0);
    if (policy == TruncatePolicy::kSample) {
      rng.shuffle(keep);
      keep.resize(list_size);
      std::sort(keep.begin(), keep.end());
    } else {
      keep.resize(list_size);
    }
    ExampleList cut;
    cut.query_id = std::move(list.query_id);
    cut.context_dense = std::move(list.context_dense);
    cut.context_tokens = std::move(list.context_tokens);
    for (size_t i : keep) {
      cut.push_item(std::move(list.items[i]), list.labels[i], list.weights[i]);
    }
    return cut;
  }
  while (list.items.size() < list_size) {
    list.items.emplace_back();
    list.labels.push_back(kPaddingLabel);
    list.weights.push_back(0.0);
    list.mask.push_back(0);
  }
  return list;
}

namespace {

// value-or-token-list: number | [numbers] | string | [strings]
void assign_feature(const std::string& name, const json& value, size_t line_no,
                    std::map<std::string, std::vector<double>>& dense,
                    std::map<std::string, std::vector<std::string>>& tokens) {
  if (value.is_number()) {
    dense[name] = {value.get<double>()};
  } else if (value.is_string()) {
    tokens[name] = {value.get<std::string>()};
  } else if (value.is_array()) {
    if (value.empty()) {
      tokens[name] = {};
      return;
    }
    if (value.front().is_number()) {
      std::vector<double> v;
      for (const auto& e : value) {
        if (!e.is_number()) parse_fail(line_no, "mixed array in feature '" + name + "'");
        v.push_back(e.get<double>());
      }
      dense[name] = std::move(v);
    } else if (value.front().is_string()) {
      std::vector<std::string> v;
      for (const auto& e : value) {
        if (!e.is_string()) parse_fail(line_no, "mixed array in feature '" + name + "'");
        v.push_back(e.get<std::string>());
      }
      tokens[name] = std::move(v);
    } else {
      parse_fail(line_no, "feature '" + name + "' must hold numbers or strings");
    }
  } else {
    parse_fail(line_no, "feature '" + name + "' must be number, string, or array");
  }
}

}  // namespace

std::vector<ExampleList> parse_jsonl(std::istream& in) {
  std::vector<ExampleList> lists;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) parse_fail(line_no, "invalid JSON object");
    if (!obj.contains("qid") || !obj["qid"].is_string()) {
      parse_fail(line_no, "missing string field 'qid'");
    }
    ExampleList list;
    list.query_id = obj["qid"].get<std::string>();
    if (obj.contains("context")) {
      if (!obj["context"].is_object()) parse_fail(line_no, "'context' must be an object");
      for (const auto& [name, value] : obj["context"].items()) {
        assign_feature(name, value, line_no, list.context_dense, list.context_tokens);
      }
    }
    if (!obj.contains("items") || !obj["items"].is_array() || obj["items"].empty()) {
      parse_fail(line_no, "missing non-empty array 'items'");
    }
    for (const auto& item : obj["items"]) {
      if (!item.is_object()) parse_fail(line_no, "items must be objects");
      double label = 0.0;
      if (item.contains("label")) {
        if (!item["label"].is_number()) parse_fail(line_no, "item label must be a number");
        label = item["label"].get<double>();
        if (label < 0.0) parse_fail(line_no, "item label must be >= 0");
      }
      double weight = 1.0;
      if (item.contains("weight")) {
        if (!item["weight"].is_number()) parse_fail(line_no, "item weight must be a number");
        weight = item["weight"].get<double>();
        if (weight <= 0.0) parse_fail(line_no, "item weight must be > 0");
      }
      ItemFeatures feat;
      if (item.contains("features")) {
        if (!item["features"].is_object()) parse_fail(line_no, "'features' must be an object");
        for (const auto& [name, value] : item["features"].items()) {
          assign_feature(name, value, line_no, feat.dense, feat.tokens);
        }
      }
      list.push_item(std::move(feat), label, weight);
    }
    lists.push_back(std::move(list));
  }
  return lists;
}

std::vector<ExampleList> read_lists(const std::string& path, size_t libsvm_width) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file '" + path + "'");
  // Sniff the first non-blank line to pick the format.
  std::string first_line;
  std::streampos start = in.tellg();
  while (std::getline(in, first_line)) {
    auto pos = first_line.find_first_not_of(" \t\r");
    if (pos != std::string::npos) {
      in.seekg(start);
      if (first_line[pos] == '{') return parse_jsonl(in);
      break;
    }
    start = in.tellg();
  }
  in.clear();
  in.seekg(0);
  auto records = parse_libsvm(in);
  size_t width = libsvm_width;
  if (width == 0) {
    for (const auto& rec : records) {
      if (!rec.dense_features.empty()) {
        width = std::max(width, static_cast<size_t>(rec.dense_features.rbegin()->first));
      }
    }
  }
  std::vector<ExampleList> lists;
  for (auto& [qid, group] : group_by_qid(records)) {
    lists.push_back(list_from_records(qid, group, width));
  }
  return lists;
}

std::vector<ExampleList> pad_all(std::vector<ExampleList> lists, size_t list_size,
                                 const Rng& rng, TruncatePolicy policy) {
  for (size_t i = 0; i < lists.size(); ++i) {
    lists[i] = pad_to_list_size(std::move(lists[i]), list_size, rng.fork("pad", i), policy);
  }
  return lists;
}

BatchIterator::BatchIterator(const std::vector<ExampleList>& lists, size_t batch_size,
                             bool shuffle, Rng key, uint64_t start_batch)
    : lists_(&lists),
      batch_size_(batch_size),
      shuffle_(shuffle),
      key_(key),
      cursor_(start_batch),
      cached_epoch_(~0ULL) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (lists.empty()) throw DomainError("batch_iterator: empty dataset");
  batches_per_epoch_ = (lists.size() + batch_size - 1) / batch_size;
}

void BatchIterator::load_epoch(uint64_t epoch) {
  order_.resize(lists_->size());
  std::iota(order_.begin(), order_.end(), 0);
  if (shuffle_) {
    Rng epoch_rng = key_.fork("shuffle_epoch", epoch);
    epoch_rng.shuffle(order_);
  }
  cached_epoch_ = epoch;
}

Batch BatchIterator::next() {
  const uint64_t epoch = cursor_ / batches_per_epoch_;
  const uint64_t index = cursor_ % batches_per_epoch_;
  if (epoch != cached_epoch_) load_epoch(epoch);
  ++cursor_;

  const size_t begin = index * batch_size_;
  const size_t end = std::min(begin + batch_size_, lists_->size());
  Batch batch;
  batch.list_size = (*lists_)[0].size();
  batch.lists.reserve(end - begin);
  for (size_t i = begin; i < end; ++i) batch.lists.push_back(&(*lists_)[order_[i]]);
  return batch;
}

}  // namespace ltr
