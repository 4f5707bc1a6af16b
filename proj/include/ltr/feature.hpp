#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "ltr/data.hpp"
#include "ltr/matrix.hpp"
#include "ltr/rng.hpp"

namespace ltr {

enum class FeatureScope { kContext, kPerItem };

/// Declaration of one input feature: dense numeric of a fixed width, or
/// categorical tokens embedded through a vocabulary. Two specs naming the
/// same vocabulary_id share one embedding table.
struct FeatureSpec {
  std::string name;
  FeatureScope scope = FeatureScope::kPerItem;
  bool categorical = false;
  size_t width = 1;            // dense width
  std::string vocabulary_id;   // categorical only
  size_t embedding_dim = 0;    // categorical only

  size_t encoded_width() const { return categorical ? embedding_dim : width; }
};

/// Token -> dense index map with hashed OOV buckets occupying
/// [size, size + oov_buckets).
struct Vocabulary {
  std::string id;
  std::vector<std::string> tokens;  // index = position
  std::map<std::string, size_t> token_to_index;
  size_t oov_buckets = 1;
  size_t min_frequency = 1;

  size_t size() const { return tokens.size(); }
  size_t total_rows() const { return tokens.size() + oov_buckets; }

  /// In-vocab tokens map to their index; anything else hashes (FNV-1a 64)
  /// into an OOV bucket, deterministically across runs and platforms.
  size_t lookup(const std::string& token) const;
};

/// Tokens with frequency >= min_frequency, indexed by descending frequency
/// with lexicographic tie-break.
Vocabulary build_vocab(const std::vector<std::string>& token_stream, size_t min_frequency,
                       size_t oov_buckets, std::string id);

/// Text file, one token per line, index = line number.
Vocabulary load_vocab_file(const std::string& path, size_t oov_buckets, std::string id);
void write_vocab_file(const Vocabulary& vocab, const std::string& path);

struct EmbeddingTable {
  std::string vocabulary_id;
  Matrix rows;  // total_rows x embedding_dim
};

/// Rows initialized uniformly in [-1/sqrt(dim), +1/sqrt(dim)] under `rng`.
EmbeddingTable init_embedding_table(const Vocabulary& vocab, size_t embedding_dim, Rng rng);

/// Mean of the rows selected by `tokens`; the empty token list gives zeros.
std::vector<double> embed_lookup(const std::vector<std::string>& tokens,
                                 const Vocabulary& vocab, const EmbeddingTable& table);

/// Sparse row gradients of one embedding table.
using RowGrads = std::map<size_t, std::vector<double>>;

/// Adjoint of embed_lookup: each contributing row receives
/// upstream / token_count, accumulated into `out`.
void embed_backward(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                    std::span<const double> upstream_grad, size_t embedding_dim,
                    RowGrads& out);

/// Dense encodings of one batch: 2-D context rows and flattened per-item rows.
struct EncodedBatch {
  Matrix context;               // batch_size x context_width
  Matrix per_item;              // (batch_size * list_size) x per_item_width
  std::vector<uint8_t> mask;    // batch_size * list_size
  size_t batch_size = 0;
  size_t list_size = 0;
};

size_t context_width(std::span<const FeatureSpec> specs);
size_t per_item_width(std::span<const FeatureSpec> specs);

/// Concatenation order follows spec declaration order. Missing dense features
/// encode as zeros, missing categorical ones as the empty token list; padded
/// slots are zero rows. Unknown vocabulary ids raise ConfigError.
EncodedBatch encode_listwise(const Batch& batch, std::span<const FeatureSpec> specs,
                             const std::map<std::string, Vocabulary>& vocabs,
                             const std::map<std::string, EmbeddingTable>& tables);

/// Derives specs from data when the config does not declare them: dense
/// widths from the first occurrence, categorical features with
/// `embedding_dim` each. Deterministic: specs come out sorted by scope then
/// name.
std::vector<FeatureSpec> infer_feature_specs(std::span<const ExampleList> lists,
                                             size_t embedding_dim);

}  // namespace ltr
