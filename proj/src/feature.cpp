#include "ltr/feature.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "ltr/errors.hpp"

namespace ltr {

size_t Vocabulary::lookup(const std::string& token) const {
  if (auto it = token_to_index.find(token); it != token_to_index.end()) return it->second;
  return tokens.size() + fnv1a64(token) % oov_buckets;
}

Vocabulary build_vocab(const std::vector<std::string>& token_stream, size_t min_frequency,
                       size_t oov_buckets, std::string id) {
  if (min_frequency < 1) throw ConfigError("build_vocab: min_frequency must be >= 1");
  if (oov_buckets < 1) throw ConfigError("build_vocab: oov_buckets must be >= 1");
  std::map<std::string, size_t> freq;
  for (const auto& tok : token_stream) ++freq[tok];

  std::vector<std::pair<std::string, size_t>> entries;
  for (auto& [tok, count] : freq) {
    if (count >= min_frequency) entries.emplace_back(tok, count);
  }
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary vocab;
  vocab.id = std::move(id);
  vocab.oov_buckets = oov_buckets;
  vocab.min_frequency = min_frequency;
  for (auto& [tok, count] : entries) {
    vocab.token_to_index[tok] = vocab.tokens.size();
    vocab.tokens.push_back(tok);
  }
  return vocab;
}

Vocabulary load_vocab_file(const std::string& path, size_t oov_buckets, std::string id) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary file '" + path + "'");
  Vocabulary vocab;
  vocab.id = std::move(id);
  vocab.oov_buckets = oov_buckets;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (vocab.token_to_index.count(line)) {
      throw ParseError("vocabulary file '" + path + "': duplicate token '" + line + "'");
    }
    vocab.token_to_index[line] = vocab.tokens.size();
    vocab.tokens.push_back(line);
  }
  return vocab;
}

void write_vocab_file(const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocabulary file '" + path + "'");
  for (const auto& tok : vocab.tokens) out << tok << "\n";
}

EmbeddingTable init_embedding_table(const Vocabulary& vocab, size_t embedding_dim, Rng rng) {
  if (embedding_dim < 1) throw ConfigError("embedding_dim must be >= 1");
  const double bound = 1.0 / std::sqrt(static_cast<double>(embedding_dim));
  EmbeddingTable table;
  table.vocabulary_id = vocab.id;
  table.rows = random_matrix(vocab.total_rows(), embedding_dim, -bound, bound, rng);
  return table;
}

std::vector<double> embed_lookup(const std::vector<std::string>& tokens,
                                 const Vocabulary& vocab, const EmbeddingTable& table) {
  std::vector<double> out(table.rows.cols, 0.0);
  if (tokens.empty()) return out;
  for (const auto& tok : tokens) {
    const double* row = table.rows.row(vocab.lookup(tok));
    for (size_t d = 0; d < out.size(); ++d) out[d] += row[d];
  }
  const double inv = 1.0 / static_cast<double>(tokens.size());
  for (double& v : out) v *= inv;
  return out;
}

void embed_backward(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                    std::span<const double> upstream_grad, size_t embedding_dim,
                    RowGrads& out) {
  if (tokens.empty()) return;
  const double inv = 1.0 / static_cast<double>(tokens.size());
  for (const auto& tok : tokens) {
    auto& row = out[vocab.lookup(tok)];
    if (row.empty()) row.assign(embedding_dim, 0.0);
    for (size_t d = 0; d < embedding_dim; ++d) row[d] += upstream_grad[d] * inv;
  }
}

size_t context_width(std::span<const FeatureSpec> specs) {
  size_t w = 0;
  for (const auto& s : specs) {
    if (s.scope == FeatureScope::kContext) w += s.encoded_width();
  }
  return w;
}

size_t per_item_width(std::span<const FeatureSpec> specs) {
  size_t w = 0;
  for (const auto& s : specs) {
    if (s.scope == FeatureScope::kPerItem) w += s.encoded_width();
  }
  return w;
}

namespace {

// Writes one feature's encoding into dst[offset, offset + spec width).
void encode_one(const FeatureSpec& spec,
                const std::map<std::string, std::vector<double>>& dense,
                const std::map<std::string, std::vector<std::string>>& tokens,
                const std::map<std::string, Vocabulary>& vocabs,
                const std::map<std::string, EmbeddingTable>& tables, double* dst) {
  if (spec.categorical) {
    auto vit = vocabs.find(spec.vocabulary_id);
    auto tit = tables.find(spec.vocabulary_id);
    if (vit == vocabs.end() || tit == tables.end()) {
      throw ConfigError("feature '" + spec.name + "' references unknown vocabulary '" +
                        spec.vocabulary_id + "'");
    }
    static const std::vector<std::string> kNoTokens;
    auto found = tokens.find(spec.name);
    const auto& toks = found != tokens.end() ? found->second : kNoTokens;
    auto vec = embed_lookup(toks, vit->second, tit->second);
    std::copy(vec.begin(), vec.end(), dst);
    return;
  }
  auto found = dense.find(spec.name);
  if (found == dense.end()) return;  // missing dense -> zeros
  if (found->second.size() != spec.width) {
    throw DimensionError("feature '" + spec.name + "': declared width " +
                         std::to_string(spec.width) + " but value has " +
                         std::to_string(found->second.size()) + " entries");
  }
  std::copy(found->second.begin(), found->second.end(), dst);
}

}  // namespace

EncodedBatch encode_listwise(const Batch& batch, std::span<const FeatureSpec> specs,
                             const std::map<std::string, Vocabulary>& vocabs,
                             const std::map<std::string, EmbeddingTable>& tables) {
  EncodedBatch out;
  out.batch_size = batch.batch_size();
  out.list_size = batch.list_size;
  out.context = Matrix(out.batch_size, context_width(specs));
  out.per_item = Matrix(out.batch_size * out.list_size, per_item_width(specs));
  out.mask.assign(out.batch_size * out.list_size, 0);

  for (size_t b = 0; b < out.batch_size; ++b) {
    const ExampleList& list = *batch.lists[b];
    if (list.size() != out.list_size) {
      throw DimensionError("encode_listwise: list " + list.query_id + " has " +
                           std::to_string(list.size()) + " slots, batch expects " +
                           std::to_string(out.list_size));
    }
    size_t offset = 0;
    for (const auto& spec : specs) {
      if (spec.scope != FeatureScope::kContext) continue;
      encode_one(spec, list.context_dense, list.context_tokens, vocabs, tables,
                 out.context.row(b) + offset);
      offset += spec.encoded_width();
    }
    for (size_t i = 0; i < out.list_size; ++i) {
      const size_t slot = b * out.list_size + i;
      out.mask[slot] = list.mask[i];
      if (!list.mask[i]) continue;  // padded slots stay zero
      offset = 0;
      for (const auto& spec : specs) {
        if (spec.scope != FeatureScope::kPerItem) continue;
        encode_one(spec, list.items[i].dense, list.items[i].tokens, vocabs, tables,
                   out.per_item.row(slot) + offset);
        offset += spec.encoded_width();
      }
    }
  }
  return out;
}

std::vector<FeatureSpec> infer_feature_specs(std::span<const ExampleList> lists,
                                             size_t embedding_dim) {
  std::map<std::pair<int, std::string>, FeatureSpec> found;  // (scope order, name)
  auto add_dense = [&](FeatureScope scope, const std::string& name, size_t width) {
    auto key = std::make_pair(scope == FeatureScope::kContext ? 0 : 1, name);
    if (found.count(key)) return;
    FeatureSpec spec;
    spec.name = name;
    spec.scope = scope;
    spec.width = width;
    found[key] = spec;
  };
  auto add_categorical = [&](FeatureScope scope, const std::string& name) {
    auto key = std::make_pair(scope == FeatureScope::kContext ? 0 : 1, name);
    if (found.count(key)) return;
    FeatureSpec spec;
    spec.name = name;
    spec.scope = scope;
    spec.categorical = true;
    spec.vocabulary_id = name;
    spec.embedding_dim = embedding_dim;
    found[key] = spec;
  };

  for (const auto& list : lists) {
    for (const auto& [name, v] : list.context_dense) {
      add_dense(FeatureScope::kContext, name, v.size());
    }
    for (const auto& [name, v] : list.context_tokens) {
      add_categorical(FeatureScope::kContext, name);
    }
    for (size_t i = 0; i < list.size(); ++i) {
      if (!list.mask[i]) continue;
      for (const auto& [name, v] : list.items[i].dense) {
        add_dense(FeatureScope::kPerItem, name, v.size());
      }
      for (const auto& [name, v] : list.items[i].tokens) {
        add_categorical(FeatureScope::kPerItem, name);
      }
    }
  }
  std::vector<FeatureSpec> specs;
  for (auto& [key, spec] : found) specs.push_back(std::move(spec));
  return specs;
}

}  // namespace ltr
