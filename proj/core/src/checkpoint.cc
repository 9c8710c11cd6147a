// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dereverb/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "dereverb/error.h"

namespace dereverb {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'D', 'R', 'V', 'C', 'K', 'P', 'T', '\0'};
constexpr uint32_t kConfigFields = 9;
constexpr const char* kMomentPrefix[2] = {"adam.m/", "adam.v/"};

using Kind = CheckpointError::Kind;

class Writer {
 public:
  template <typename V>
  void Put(V v) {
    const auto* p = reinterpret_cast<const uint8_t*>(&v);
    out_.insert(out_.end(), p, p + sizeof(V));
  }
  void PutBytes(const void* data, size_t n) {
    const auto* p = static_cast<const uint8_t*>(data);
    out_.insert(out_.end(), p, p + n);
  }
  std::vector<uint8_t> Take() { return std::move(out_); }

 private:
  std::vector<uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<uint8_t>& in) : in_(in) {}

  template <typename V>
  V Get(const char* what) {
    V v;
    GetBytes(&v, sizeof(V), what);
    return v;
  }
  void GetBytes(void* dst, size_t n, const char* what) {
    if (n > in_.size() - pos_) {
      throw CheckpointError(Kind::kTruncated,
                            std::string("checkpoint truncated while reading ") +
                                what);
    }
    std::memcpy(dst, in_.data() + pos_, n);
    pos_ += n;
  }
  size_t remaining() const { return in_.size() - pos_; }

 private:
  const std::vector<uint8_t>& in_;
  size_t pos_ = 0;
};

size_t DTypeSize(DType d) { return d == DType::kFloat32 ? 4 : 8; }

std::vector<int64_t> ConfigFields(const ModelConfig& c) {
  return {static_cast<int64_t>(c.variant), c.context,      c.bins,
          c.conv_filters,                  c.conv_freq_kernel, c.conv_freq_stride,
          c.hidden,                        c.ff_hidden,    c.ff_context};
}

template <typename T>
CheckpointRecord MakeRecord(const std::string& name, const Shape& shape,
                            const T* values) {
  CheckpointRecord r;
  r.name = name;
  r.dtype = std::is_same_v<T, float> ? DType::kFloat32 : DType::kFloat64;
  r.shape = shape;
  const size_t n = static_cast<size_t>(NumElements(shape)) * sizeof(T);
  r.bytes.resize(n);
  if (n > 0) std::memcpy(r.bytes.data(), values, n);
  return r;
}

void CheckRecordsAgainstLayout(const Checkpoint& ckpt) {
  const auto layout = ParameterLayout(ckpt.config);
  const size_t p = layout.size();
  const auto& recs = ckpt.records;
  if (recs.size() != p && recs.size() != 3 * p) {
    throw CheckpointError(
        Kind::kShape, "checkpoint holds " + std::to_string(recs.size()) +
                          " records; config " + DescribeConfig(ckpt.config) +
                          " expects " + std::to_string(p) + " parameter tensors");
  }
  for (size_t k = 0; k < recs.size(); ++k) {
    const auto& [name, shape] = layout[k % p];
    const std::string expect_name =
        k < p ? name : std::string(kMomentPrefix[k / p - 1]) + name;
    if (recs[k].name != expect_name || recs[k].shape != shape) {
      throw CheckpointError(
          Kind::kShape, "checkpoint record " + std::to_string(k) + " is '" +
                            recs[k].name + "' " + ShapeString(recs[k].shape) +
                            ", expected '" + expect_name + "' " +
                            ShapeString(shape));
    }
  }
}

}  // namespace

template <typename T>
std::vector<T> CheckpointRecord::Values() const {
  const size_t n = static_cast<size_t>(NumElements(shape));
  std::vector<T> out(n);
  if (dtype == DType::kFloat32) {
    std::vector<float> raw(n);
    if (n > 0) std::memcpy(raw.data(), bytes.data(), n * sizeof(float));
    for (size_t i = 0; i < n; ++i) out[i] = static_cast<T>(raw[i]);
  } else {
    std::vector<double> raw(n);
    if (n > 0) std::memcpy(raw.data(), bytes.data(), n * sizeof(double));
    for (size_t i = 0; i < n; ++i) out[i] = static_cast<T>(raw[i]);
  }
  return out;
}

template std::vector<float> CheckpointRecord::Values<float>() const;
template std::vector<double> CheckpointRecord::Values<double>() const;

bool Checkpoint::has_optimizer_state() const {
  return records.size() == 3 * ParameterLayout(config).size();
}

std::vector<uint8_t> SerializeCheckpoint(const Checkpoint& ckpt) {
  Writer w;
  w.PutBytes(kMagic, sizeof(kMagic));
  w.Put<uint32_t>(ckpt.version);
  w.Put<uint32_t>(kConfigFields * sizeof(int64_t));
  for (int64_t v : ConfigFields(ckpt.config)) w.Put<int64_t>(v);
  w.Put<int64_t>(ckpt.meta.epoch);
  w.Put<double>(ckpt.meta.val_loss);
  w.Put<uint64_t>(ckpt.meta.seed);
  w.Put<int64_t>(ckpt.meta.optimizer_step);
  w.Put<int64_t>(ckpt.meta.best_epoch);
  w.Put<double>(ckpt.meta.best_val_loss);
  const auto& s = ckpt.stats;
  w.Put<int64_t>(s.bins());
  for (const auto* vec : {&s.input_mean, &s.input_std, &s.target_mean,
                          &s.target_std}) {
    if (static_cast<int64_t>(vec->size()) != s.bins()) {
      throw ContractError("checkpoint: inconsistent NormStats lengths");
    }
    w.PutBytes(vec->data(), vec->size() * sizeof(double));
  }
  w.Put<uint64_t>(ckpt.records.size());
  for (const auto& r : ckpt.records) {
    w.Put<uint32_t>(static_cast<uint32_t>(r.name.size()));
    w.PutBytes(r.name.data(), r.name.size());
    w.Put<uint8_t>(static_cast<uint8_t>(r.dtype));
    w.Put<uint32_t>(static_cast<uint32_t>(r.shape.size()));
    for (int64_t d : r.shape) w.Put<int64_t>(d);
    w.PutBytes(r.bytes.data(), r.bytes.size());
  }
  return w.Take();
}

Checkpoint ParseCheckpoint(const std::vector<uint8_t>& bytes,
                           const std::optional<ModelConfig>& expected) {
  Reader r(bytes);
  char magic[8];
  if (bytes.size() < sizeof(magic)) {
    throw CheckpointError(Kind::kTruncated, "checkpoint shorter than its magic");
  }
  r.GetBytes(magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw CheckpointError(Kind::kBadMagic, "not a dereverb checkpoint");
  }
  Checkpoint ckpt;
  ckpt.version = r.Get<uint32_t>("version");
  if (ckpt.version != kCheckpointVersion) {
    throw CheckpointError(Kind::kVersion,
                          "checkpoint version " + std::to_string(ckpt.version) +
                              ", this build reads version " +
                              std::to_string(kCheckpointVersion));
  }
  const auto config_bytes = r.Get<uint32_t>("config size");
  if (config_bytes != kConfigFields * sizeof(int64_t)) {
    throw CheckpointError(Kind::kConfig, "unexpected config block size " +
                                             std::to_string(config_bytes));
  }
  int64_t f[kConfigFields];
  for (auto& v : f) v = r.Get<int64_t>("config");
  if (f[0] < 0 || f[0] > static_cast<int64_t>(Variant::kWu2016)) {
    throw CheckpointError(Kind::kConfig,
                          "unknown variant id " + std::to_string(f[0]));
  }
  ModelConfig& c = ckpt.config;
  c.variant = static_cast<Variant>(f[0]);
  c.context = f[1];
  c.bins = f[2];
  c.conv_filters = f[3];
  c.conv_freq_kernel = f[4];
  c.conv_freq_stride = f[5];
  c.hidden = f[6];
  c.ff_hidden = f[7];
  c.ff_context = f[8];
  try {
    c.Validate();
  } catch (const ContractError& e) {
    throw CheckpointError(Kind::kConfig, e.what());
  }
  if (expected && !(*expected == c)) {
    throw CheckpointError(Kind::kConfig,
                          "checkpoint config " + DescribeConfig(c) +
                              " does not match requested " +
                              DescribeConfig(*expected));
  }

  ckpt.meta.epoch = r.Get<int64_t>("metadata");
  ckpt.meta.val_loss = r.Get<double>("metadata");
  ckpt.meta.seed = r.Get<uint64_t>("metadata");
  ckpt.meta.optimizer_step = r.Get<int64_t>("metadata");
  ckpt.meta.best_epoch = r.Get<int64_t>("metadata");
  ckpt.meta.best_val_loss = r.Get<double>("metadata");

  const auto bins = r.Get<int64_t>("stats size");
  if (bins != 0 && bins != c.bins) {
    throw CheckpointError(Kind::kShape, "stats cover " + std::to_string(bins) +
                                            " bins, config has " +
                                            std::to_string(c.bins));
  }
  for (auto* vec : {&ckpt.stats.input_mean, &ckpt.stats.input_std,
                    &ckpt.stats.target_mean, &ckpt.stats.target_std}) {
    vec->resize(static_cast<size_t>(bins));
    r.GetBytes(vec->data(), vec->size() * sizeof(double), "stats");
  }

  const auto count = r.Get<uint64_t>("record count");
  if (count > r.remaining()) {
    throw CheckpointError(Kind::kTruncated, "record count exceeds file size");
  }
  for (uint64_t k = 0; k < count; ++k) {
    CheckpointRecord rec;
    const auto name_len = r.Get<uint32_t>("record name");
    if (name_len > r.remaining()) {
      throw CheckpointError(Kind::kTruncated,
                            "checkpoint truncated while reading record name");
    }
    rec.name.resize(name_len);
    r.GetBytes(rec.name.data(), name_len, "record name");
    const auto dtype = r.Get<uint8_t>("record dtype");
    if (dtype > 1) {
      throw CheckpointError(Kind::kShape, "record '" + rec.name +
                                              "' has unknown dtype " +
                                              std::to_string(dtype));
    }
    rec.dtype = static_cast<DType>(dtype);
    const auto rank = r.Get<uint32_t>("record rank");
    if (rank > 8) {
      throw CheckpointError(Kind::kShape, "record '" + rec.name +
                                              "' has rank " +
                                              std::to_string(rank));
    }
    uint64_t n = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      const auto dim = r.Get<int64_t>("record shape");
      if (dim < 0) {
        throw CheckpointError(Kind::kShape,
                              "record '" + rec.name + "' has a negative dim");
      }
      rec.shape.push_back(dim);
      n *= static_cast<uint64_t>(dim);
      if (n > r.remaining()) {
        throw CheckpointError(Kind::kTruncated,
                              "checkpoint truncated inside record '" +
                                  rec.name + "'");
      }
    }
    const uint64_t nbytes = n * DTypeSize(rec.dtype);
    if (nbytes > r.remaining()) {
      throw CheckpointError(Kind::kTruncated,
                            "checkpoint truncated inside record '" + rec.name +
                                "'");
    }
    rec.bytes.resize(nbytes);
    r.GetBytes(rec.bytes.data(), nbytes, "record data");
    ckpt.records.push_back(std::move(rec));
  }
  if (r.remaining() != 0) {
    throw CheckpointError(Kind::kTruncated,
                          std::to_string(r.remaining()) +
                              " unexpected trailing bytes in checkpoint");
  }
  CheckRecordsAgainstLayout(ckpt);
  return ckpt;
}

void SaveCheckpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = SerializeCheckpoint(ckpt);
  // Write to a sibling file and rename so an interrupted save never leaves a
  // half-written checkpoint behind.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint LoadCheckpoint(const std::filesystem::path& path,
                          const std::optional<ModelConfig>& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return ParseCheckpoint(bytes, expected);
}

template <typename T>
Checkpoint MakeCheckpoint(const DereverbModel<T>& model, const NormStats& stats,
                          const TrainingMeta& meta,
                          const nn::Adam<T>* optimizer) {
  Checkpoint ckpt;
  ckpt.config = model.config();
  ckpt.meta = meta;
  ckpt.stats = stats;
  const auto& params = model.parameters();
  for (const auto& p : params) {
    ckpt.records.push_back(MakeRecord(p.name, p.tensor.shape(), p.tensor.ptr()));
  }
  if (optimizer != nullptr) {
    const nn::Adam<T>& opt = *optimizer;
    if (opt.params().size() != params.size()) {
      throw ContractError("checkpoint: optimizer does not cover the model");
    }
    ckpt.meta.optimizer_step = opt.step_count();
    for (int which = 0; which < 2; ++which) {
      const auto& moments = which == 0 ? opt.first_moments()
                                       : opt.second_moments();
      for (size_t k = 0; k < params.size(); ++k) {
        ckpt.records.push_back(
            MakeRecord(std::string(kMomentPrefix[which]) + params[k].name,
                       params[k].tensor.shape(), moments[k].data()));
      }
    }
  }
  CheckRecordsAgainstLayout(ckpt);
  return ckpt;
}

template <typename T>
DereverbModel<T> ModelFromCheckpoint(const Checkpoint& ckpt) {
  CheckRecordsAgainstLayout(ckpt);
  Rng rng(0);
  auto model = DereverbModel<T>::Build(ckpt.config, rng);
  const auto& params = model.parameters();
  for (size_t k = 0; k < params.size(); ++k) {
    const auto values = ckpt.records[k].Values<T>();
    Tensor<T> t = params[k].tensor;
    std::copy(values.begin(), values.end(), t.data().begin());
  }
  return model;
}

template <typename T>
void RestoreOptimizer(const Checkpoint& ckpt, nn::Adam<T>& optimizer) {
  if (!ckpt.has_optimizer_state()) {
    throw CheckpointError(Kind::kShape, "checkpoint has no optimizer state");
  }
  const size_t p = ckpt.records.size() / 3;
  if (optimizer.params().size() != p) {
    throw CheckpointError(Kind::kShape,
                          "optimizer covers " +
                              std::to_string(optimizer.params().size()) +
                              " tensors, checkpoint " + std::to_string(p));
  }
  for (size_t k = 0; k < p; ++k) {
    optimizer.first_moments()[k] = ckpt.records[p + k].Values<T>();
    optimizer.second_moments()[k] = ckpt.records[2 * p + k].Values<T>();
  }
  optimizer.set_step_count(ckpt.meta.optimizer_step);
}

#define DEREVERB_INSTANTIATE_CKPT(T)                                          \
  template Checkpoint MakeCheckpoint(const DereverbModel<T>&,                \
                                     const NormStats&, const TrainingMeta&,  \
                                     const nn::Adam<T>*);                     \
  template DereverbModel<T> ModelFromCheckpoint<T>(const Checkpoint&);        \
  template void RestoreOptimizer(const Checkpoint&, nn::Adam<T>&);

DEREVERB_INSTANTIATE_CKPT(float)
DEREVERB_INSTANTIATE_CKPT(double)

#undef DEREVERB_INSTANTIATE_CKPT

}  // namespace dereverb
