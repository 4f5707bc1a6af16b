#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ltr/config.hpp"
#include "ltr/errors.hpp"
#include "ltr/model.hpp"

// Checkpoint container: magic "LTRF", u32 format version, u64 payload size,
// u32 CRC32C of the payload, then the payload: global step, config JSON,
// vocabularies, and a manifest of named f64 arrays (params + Adagrad
// accumulators), everything little-endian.

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

namespace ltr {

namespace {

constexpr char kMagic[4] = {'L', 'T', 'R', 'F'};
constexpr uint32_t kFormatVersion = 1;

// CRC32C (Castagnoli), reflected polynomial 0x82F63B78.
uint32_t crc32c(const uint8_t* data, size_t size) {
  static const auto table = [] {
    std::array<uint32_t, 256> t{};
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t crc = i;
      for (int k = 0; k < 8; ++k) {
        crc = (crc >> 1) ^ (0x82F63B78u & (~(crc & 1u) + 1u));
      }
      t[i] = crc;
    }
    return t;
  }();
  uint32_t crc = 0xFFFFFFFFu;
  for (size_t i = 0; i < size; ++i) {
    crc = (crc >> 8) ^ table[(crc ^ data[i]) & 0xFFu];
  }
  return crc ^ 0xFFFFFFFFu;
}

class Writer {
 public:
  void u32(uint32_t v) { raw(&v, sizeof v); }
  void u64(uint64_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void str(const std::string& s) {
    u64(s.size());
    raw(s.data(), s.size());
  }
  void doubles(const std::vector<double>& v) {
    raw(v.data(), v.size() * sizeof(double));
  }
  void array(const std::string& name, size_t rows, size_t cols,
             const std::vector<double>& values) {
    str(name);
    u64(rows);
    u64(cols);
    doubles(values);
  }
  const std::vector<uint8_t>& bytes() const { return bytes_; }

 private:
  void raw(const void* p, size_t n) {
    const auto* b = static_cast<const uint8_t*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  std::vector<uint8_t> bytes_;
};

class Reader {
 public:
  Reader(const uint8_t* data, size_t size) : data_(data), size_(size) {}

  uint32_t u32() { return get<uint32_t>(); }
  uint64_t u64() { return get<uint64_t>(); }
  std::string str() {
    const uint64_t n = u64();
    need(n);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }
  std::vector<double> doubles(size_t count) {
    need(count * sizeof(double));
    std::vector<double> v(count);
    std::memcpy(v.data(), data_ + pos_, count * sizeof(double));
    pos_ += count * sizeof(double);
    return v;
  }
  bool done() const { return pos_ == size_; }

 private:
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void need(size_t n) {
    if (pos_ + n > size_) throw IoError("truncated checkpoint payload");
  }
  const uint8_t* data_;
  size_t size_;
  size_t pos_ = 0;
};

struct NamedArray {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> values;
};

void write_params(Writer& out, const ModelParams& params, const std::string& prefix,
                  size_t& count) {
  for (size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    out.array(prefix + "layer" + std::to_string(l) + "/weight", layer.weight.rows,
              layer.weight.cols, layer.weight.data);
    out.array(prefix + "layer" + std::to_string(l) + "/bias", 1, layer.bias.size(),
              layer.bias);
    count += 2;
  }
  for (const auto& [id, table] : params.tables) {
    out.array(prefix + "embedding/" + id, table.rows.rows, table.rows.cols, table.rows.data);
    ++count;
  }
}

void restore_params(ModelParams& params, const std::map<std::string, NamedArray>& arrays,
                    const std::string& prefix) {
  auto fetch = [&](const std::string& name, size_t rows, size_t cols) -> const NamedArray& {
    auto it = arrays.find(name);
    if (it == arrays.end()) throw IoError("checkpoint missing array '" + name + "'");
    if (it->second.rows != rows || it->second.cols != cols) {
      throw IoError("checkpoint shape mismatch for array '" + name + "': stored " +
                    std::to_string(it->second.rows) + "x" + std::to_string(it->second.cols) +
                    ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
    }
    return it->second;
  };
  for (size_t l = 0; l < params.layers.size(); ++l) {
    auto& layer = params.layers[l];
    const std::string base = prefix + "layer" + std::to_string(l);
    layer.weight.data = fetch(base + "/weight", layer.weight.rows, layer.weight.cols).values;
    layer.bias = fetch(base + "/bias", 1, layer.bias.size()).values;
  }
  for (auto& [id, table] : params.tables) {
    table.rows.data =
        fetch(prefix + "embedding/" + id, table.rows.rows, table.rows.cols).values;
  }
}

}  // namespace

void Model::save_checkpoint(const std::string& path) const {
  Writer payload;
  payload.u64(global_step_);
  payload.str(ranking_config_to_json(config_).dump());

  payload.u64(vocabs_.size());
  for (const auto& [id, vocab] : vocabs_) {
    payload.str(id);
    payload.u64(vocab.oov_buckets);
    payload.u64(vocab.min_frequency);
    payload.u64(vocab.tokens.size());
    for (const auto& tok : vocab.tokens) payload.str(tok);
  }

  Writer arrays;
  size_t array_count = 0;
  write_params(arrays, params_, "", array_count);
  write_params(arrays, accum_, "accum/", array_count);
  payload.u64(array_count);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");
  const auto& body = payload.bytes();
  const auto& tail = arrays.bytes();
  const uint64_t payload_size = body.size() + tail.size();

  std::vector<uint8_t> joined;
  joined.reserve(payload_size);
  joined.insert(joined.end(), body.begin(), body.end());
  joined.insert(joined.end(), tail.begin(), tail.end());
  const uint32_t crc = crc32c(joined.data(), joined.size());

  out.write(kMagic, 4);
  out.write(reinterpret_cast<const char*>(&kFormatVersion), sizeof kFormatVersion);
  out.write(reinterpret_cast<const char*>(&payload_size), sizeof payload_size);
  out.write(reinterpret_cast<const char*>(&crc), sizeof crc);
  out.write(reinterpret_cast<const char*>(joined.data()),
            static_cast<std::streamsize>(joined.size()));
  if (!out) throw IoError("short write for checkpoint '" + path + "'");
}

Model Model::load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  char magic[4];
  uint32_t version = 0, stored_crc = 0;
  uint64_t payload_size = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&payload_size), sizeof payload_size);
  in.read(reinterpret_cast<char*>(&stored_crc), sizeof stored_crc);
  if (!in) throw IoError("truncated checkpoint header in '" + path + "'");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError("'" + path + "' is not a checkpoint file (bad magic)");
  }
  if (version != kFormatVersion) {
    throw IoError("unsupported checkpoint format version " + std::to_string(version) +
                  " (expected " + std::to_string(kFormatVersion) + ")");
  }
  std::vector<uint8_t> payload(payload_size);
  in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload_size));
  if (static_cast<uint64_t>(in.gcount()) != payload_size) {
    throw IoError("truncated checkpoint payload in '" + path + "'");
  }
  if (crc32c(payload.data(), payload.size()) != stored_crc) {
    throw IoError("checkpoint checksum mismatch in '" + path + "'");
  }

  Reader reader(payload.data(), payload.size());
  const uint64_t global_step = reader.u64();
  RankingConfig config = ranking_config_from_json_text(reader.str());

  std::map<std::string, Vocabulary> vocabs;
  const uint64_t vocab_count = reader.u64();
  for (uint64_t v = 0; v < vocab_count; ++v) {
    Vocabulary vocab;
    vocab.id = reader.str();
    vocab.oov_buckets = reader.u64();
    vocab.min_frequency = reader.u64();
    const uint64_t token_count = reader.u64();
    for (uint64_t t = 0; t < token_count; ++t) {
      std::string tok = reader.str();
      vocab.token_to_index[tok] = vocab.tokens.size();
      vocab.tokens.push_back(std::move(tok));
    }
    vocabs[vocab.id] = std::move(vocab);
  }

  const uint64_t array_count = reader.u64();
  std::map<std::string, NamedArray> arrays;
  for (uint64_t a = 0; a < array_count; ++a) {
    std::string name = reader.str();
    NamedArray arr;
    arr.rows = reader.u64();
    arr.cols = reader.u64();
    arr.values = reader.doubles(arr.rows * arr.cols);
    arrays[std::move(name)] = std::move(arr);
  }
  if (!reader.done()) throw IoError("trailing bytes in checkpoint '" + path + "'");

  Model model = Model::build(std::move(config), std::move(vocabs));
  restore_params(model.params_, arrays, "");
  restore_params(model.accum_, arrays, "accum/");
  model.global_step_ = global_step;
  return model;
}

}  // namespace ltr
