#include "gm/checkpoint.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace gm {

namespace {

constexpr char kMagic[4] = {'G', 'M', 'C', 'K'};
constexpr uint32_t kVersion = 1;
constexpr int64_t kMaxRank = 8;
constexpr int64_t kMaxElements = int64_t(1) << 31;

void put_u32(std::string& buf, uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& buf, uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(char((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& buf, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(buf, bits);
}

// Cursor over the loaded bytes; every read is bounds-checked so a short file
// reports exactly where it ran out.
struct Reader {
  const std::string& buf;
  const std::string& path;
  size_t pos = 0;

  void need(size_t n, const char* what) {
    if (buf.size() - pos < n)
      raise(ErrorKind::Truncated, path + ": file ends inside " + what);
  }
  uint32_t u32(const char* what) {
    need(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(buf[pos + size_t(i)])) << (8 * i);
    pos += 4;
    return v;
  }
  uint64_t u64(const char* what) {
    need(8, what);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(uint8_t(buf[pos + size_t(i)])) << (8 * i);
    pos += 8;
    return v;
  }
  float f32(const char* what) {
    uint32_t bits = u32(what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string str(const char* what) {
    uint32_t len = u32(what);
    need(len, what);
    std::string s = buf.substr(pos, len);
    pos += len;
    return s;
  }
};

std::string format_double(double v) {
  char tmp[64];
  std::snprintf(tmp, sizeof tmp, "%.17g", v);
  return tmp;
}

int64_t meta_int(const Checkpoint& ck, const std::string& key) {
  const std::string* s = ck.find_meta(key);
  if (!s) raise(ErrorKind::InvalidArgument, "checkpoint metadata missing " + key);
  size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(*s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s->size())
    raise(ErrorKind::InvalidArgument, "checkpoint metadata " + key + " is not an integer: " + *s);
  return v;
}

double meta_double(const Checkpoint& ck, const std::string& key) {
  const std::string* s = ck.find_meta(key);
  if (!s) raise(ErrorKind::InvalidArgument, "checkpoint metadata missing " + key);
  size_t used = 0;
  double v = 0;
  try {
    v = std::stod(*s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s->size())
    raise(ErrorKind::InvalidArgument, "checkpoint metadata " + key + " is not a number: " + *s);
  return v;
}

}  // namespace

const std::string* Checkpoint::find_meta(const std::string& key) const {
  for (const auto& kv : metadata)
    if (kv.first == key) return &kv.second;
  return nullptr;
}

const Tensor<float>* Checkpoint::find_tensor(const std::string& name) const {
  for (const auto& e : tensors)
    if (e.name == name) return &e.tensor;
  return nullptr;
}

void Checkpoint::set_meta(const std::string& key, const std::string& value) {
  for (auto& kv : metadata)
    if (kv.first == key) {
      kv.second = value;
      return;
    }
  metadata.emplace_back(key, value);
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::string buf;
  buf.append(kMagic, 4);
  put_u32(buf, kVersion);
  put_u32(buf, uint32_t(ck.metadata.size()));
  for (const auto& kv : ck.metadata) {
    put_u32(buf, uint32_t(kv.first.size()));
    buf.append(kv.first);
    put_u32(buf, uint32_t(kv.second.size()));
    buf.append(kv.second);
  }
  put_u32(buf, uint32_t(ck.tensors.size()));
  for (const auto& e : ck.tensors) {
    put_u32(buf, uint32_t(e.name.size()));
    buf.append(e.name);
    put_u32(buf, uint32_t(e.tensor.rank()));
    for (int64_t d : e.tensor.shape) put_u64(buf, uint64_t(d));
    for (float v : e.tensor.data) put_f32(buf, v);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorKind::IoError, "cannot open for writing: " + path);
  out.write(buf.data(), std::streamsize(buf.size()));
  if (!out) raise(ErrorKind::IoError, "short write: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::IoError, "cannot open: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 4) raise(ErrorKind::Truncated, path + ": shorter than its own magic");
  if (std::memcmp(buf.data(), kMagic, 4) != 0)
    raise(ErrorKind::BadMagic, path + ": not a GMCK checkpoint file");
  Reader r{buf, path};
  r.pos = 4;
  uint32_t version = r.u32("version");
  if (version != kVersion)
    raise(ErrorKind::BadMagic, path + ": unsupported GMCK version " + std::to_string(version));

  Checkpoint ck;
  uint32_t n_meta = r.u32("metadata count");
  for (uint32_t i = 0; i < n_meta; ++i) {
    std::string key = r.str("metadata key");
    std::string val = r.str("metadata value");
    ck.metadata.emplace_back(std::move(key), std::move(val));
  }
  uint32_t n_tensors = r.u32("tensor count");
  for (uint32_t i = 0; i < n_tensors; ++i) {
    Checkpoint::Entry e;
    e.name = r.str("tensor name");
    uint32_t rank = r.u32("tensor rank");
    if (rank > kMaxRank)
      raise(ErrorKind::SizeMismatch,
            path + ": tensor " + e.name + " declares rank " + std::to_string(rank));
    Shape shape;
    int64_t numel = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      uint64_t dim = r.u64("tensor dims");
      if (dim == 0 || dim > uint64_t(kMaxElements) || numel > kMaxElements / int64_t(dim))
        raise(ErrorKind::SizeMismatch,
              path + ": tensor " + e.name + " declares an implausible extent");
      shape.push_back(int64_t(dim));
      numel *= int64_t(dim);
    }
    r.need(size_t(numel) * 4, "tensor data");
    e.tensor = Tensor<float>(shape);
    for (int64_t j = 0; j < numel; ++j) {
      float v = r.f32("tensor data");
      if (!std::isfinite(v))
        raise(ErrorKind::NonFinite, path + ": non-finite value in tensor " + e.name);
      e.tensor.data[size_t(j)] = v;
    }
    ck.tensors.push_back(std::move(e));
  }
  if (r.pos != buf.size())
    raise(ErrorKind::SizeMismatch, path + ": " + std::to_string(buf.size() - r.pos) +
                                       " trailing bytes after the last tensor");
  return ck;
}

Checkpoint make_checkpoint(const ModelConfig& cfg, const ModelParams<float>& params,
                           const std::vector<std::pair<std::string, std::string>>& extra) {
  cfg.validate();
  Checkpoint ck;
  ck.metadata.emplace_back("model.patch_size", std::to_string(cfg.patch_size));
  ck.metadata.emplace_back("model.bands", std::to_string(cfg.bands));
  ck.metadata.emplace_back("model.classes", std::to_string(cfg.classes));
  ck.metadata.emplace_back("model.feature_dim", std::to_string(cfg.feature_dim));
  ck.metadata.emplace_back("model.state_dim", std::to_string(cfg.state_dim));
  ck.metadata.emplace_back("model.spectral_tokens", std::to_string(cfg.spectral_tokens));
  ck.metadata.emplace_back("model.spectral_group", std::to_string(cfg.spectral_group));
  ck.metadata.emplace_back("model.top_tokens", std::to_string(cfg.top_tokens));
  ck.metadata.emplace_back("model.lambda", format_double(cfg.lambda));
  for (const auto& kv : extra) ck.set_meta(kv.first, kv.second);
  params.for_each([&](const char* path, const Tensor<float>& t) {
    ck.tensors.push_back({path, t});
  });
  return ck;
}

ModelConfig config_from_checkpoint(const Checkpoint& ck) {
  ModelConfig cfg;
  cfg.patch_size = meta_int(ck, "model.patch_size");
  cfg.bands = meta_int(ck, "model.bands");
  cfg.classes = meta_int(ck, "model.classes");
  cfg.feature_dim = meta_int(ck, "model.feature_dim");
  cfg.state_dim = meta_int(ck, "model.state_dim");
  cfg.spectral_tokens = meta_int(ck, "model.spectral_tokens");
  cfg.spectral_group = meta_int(ck, "model.spectral_group");
  cfg.top_tokens = meta_int(ck, "model.top_tokens");
  cfg.lambda = meta_double(ck, "model.lambda");
  cfg.validate();
  return cfg;
}

ModelParams<float> params_from_checkpoint(const Checkpoint& ck) {
  ModelConfig cfg = config_from_checkpoint(ck);
  ModelParams<float> p = ModelParams<float>::shaped(cfg);
  p.for_each([&](const char* path, Tensor<float>& t) {
    const Tensor<float>* stored = ck.find_tensor(path);
    if (!stored) raise(ErrorKind::SizeMismatch, std::string("checkpoint lacks tensor ") + path);
    if (stored->shape != t.shape)
      raise(ErrorKind::SizeMismatch, std::string("checkpoint tensor ") + path + " has shape " +
                                         shape_str(stored->shape) + ", model expects " +
                                         shape_str(t.shape));
    t = *stored;
  });
  return p;
}

}  // namespace gm
