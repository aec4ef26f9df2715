#include "paircon/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace paircon::nn {

namespace {

constexpr char kMagic[8] = {'P', 'A', 'I', 'R', 'C', 'O', 'N', '1'};
enum : uint8_t { kDtypeF32 = 0, kDtypeF64 = 1, kDtypeU64 = 2 };

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64le(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <typename T>
void put_payload(std::string& out, const T* data, size_t n) {
  static_assert(sizeof(T) == 4 || sizeof(T) == 8);
  for (size_t i = 0; i < n; ++i) {
    uint64_t bits = 0;
    std::memcpy(&bits, &data[i], sizeof(T));
    for (size_t b = 0; b < sizeof(T); ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
  }
}

class Reader {
 public:
  Reader(const std::string& buf, const std::string& path) : buf_(buf), path_(path) {}

  uint32_t u32() {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(byte()) << (8 * i);
    return v;
  }
  uint64_t u64() {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(byte()) << (8 * i);
    return v;
  }
  std::string str(size_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  template <typename T>
  void payload(T* data, size_t n) {
    static_assert(sizeof(T) == 4 || sizeof(T) == 8);
    need(n * sizeof(T));
    for (size_t i = 0; i < n; ++i) {
      uint64_t bits = 0;
      for (size_t b = 0; b < sizeof(T); ++b)
        bits |= static_cast<uint64_t>(byte()) << (8 * b);
      std::memcpy(&data[i], &bits, sizeof(T));
    }
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  uint8_t byte() {
    need(1);
    return static_cast<uint8_t>(buf_[pos_++]);
  }
  void need(size_t n) {
    if (pos_ + n > buf_.size()) throw std::runtime_error("truncated checkpoint: " + path_);
  }
  const std::string& buf_;
  std::string path_;
  size_t pos_ = 0;
};

void put_entry_header(std::string& out, const std::string& name, uint8_t dtype,
                      const std::vector<int64_t>& shape) {
  put_u32(out, static_cast<uint32_t>(name.size()));
  out.append(name);
  out.push_back(static_cast<char>(dtype));
  put_u32(out, static_cast<uint32_t>(shape.size()));
  for (int64_t d : shape) put_u64le(out, static_cast<uint64_t>(d));
}

}  // namespace

void TensorStore::put_f32(const std::string& name, core::Tensor<float> t) {
  f32_[name] = std::move(t);
}
void TensorStore::put_f64(const std::string& name, core::Tensor<double> t) {
  f64_[name] = std::move(t);
}
void TensorStore::put_u64(const std::string& name, std::vector<uint64_t> v) {
  u64_[name] = std::move(v);
}

bool TensorStore::contains(const std::string& name) const {
  return f32_.count(name) || f64_.count(name) || u64_.count(name);
}

const core::Tensor<float>& TensorStore::f32(const std::string& name) const {
  auto it = f32_.find(name);
  if (it == f32_.end()) throw std::out_of_range("checkpoint: no f32 tensor named " + name);
  return it->second;
}
const core::Tensor<double>& TensorStore::f64(const std::string& name) const {
  auto it = f64_.find(name);
  if (it == f64_.end()) throw std::out_of_range("checkpoint: no f64 tensor named " + name);
  return it->second;
}
const std::vector<uint64_t>& TensorStore::u64(const std::string& name) const {
  auto it = u64_.find(name);
  if (it == u64_.end()) throw std::out_of_range("checkpoint: no u64 tensor named " + name);
  return it->second;
}

std::vector<std::string> TensorStore::names() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : f32_) out.push_back(k);
  for (const auto& [k, v] : f64_) out.push_back(k);
  for (const auto& [k, v] : u64_) out.push_back(k);
  std::sort(out.begin(), out.end());
  return out;
}

void TensorStore::save(const std::string& path) const {
  std::string out(kMagic, sizeof(kMagic));
  put_u64le(out, size());
  // One pass per dtype; maps iterate in name order, and names are unique
  // across dtypes by construction of the writers below.
  for (const auto& [name, t] : f32_) {
    put_entry_header(out, name, kDtypeF32, t.shape());
    put_payload(out, t.data(), static_cast<size_t>(t.size()));
  }
  for (const auto& [name, t] : f64_) {
    put_entry_header(out, name, kDtypeF64, t.shape());
    put_payload(out, t.data(), static_cast<size_t>(t.size()));
  }
  for (const auto& [name, v] : u64_) {
    put_entry_header(out, name, kDtypeU64, {static_cast<int64_t>(v.size())});
    put_payload(out, v.data(), v.size());
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write checkpoint: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("short write on checkpoint: " + path);
}

TensorStore TensorStore::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  if (buf.size() < sizeof(kMagic) || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);

  Reader r(buf, path);
  r.str(sizeof(kMagic));
  const uint64_t count = r.u64();
  TensorStore store;
  for (uint64_t e = 0; e < count; ++e) {
    const uint32_t name_len = r.u32();
    const std::string name = r.str(name_len);
    if (store.contains(name)) throw std::runtime_error("duplicate checkpoint entry: " + name);
    const auto dtype = static_cast<uint8_t>(r.str(1)[0]);
    const uint32_t ndim = r.u32();
    std::vector<int64_t> shape(ndim);
    for (auto& d : shape) d = static_cast<int64_t>(r.u64());
    const auto n = static_cast<size_t>(core::Tensor<float>::count(shape));
    switch (dtype) {
      case kDtypeF32: {
        core::Tensor<float> t(shape);
        r.payload(t.data(), n);
        store.put_f32(name, std::move(t));
        break;
      }
      case kDtypeF64: {
        core::Tensor<double> t(shape);
        r.payload(t.data(), n);
        store.put_f64(name, std::move(t));
        break;
      }
      case kDtypeU64: {
        std::vector<uint64_t> v(n);
        r.payload(v.data(), n);
        store.put_u64(name, std::move(v));
        break;
      }
      default:
        throw std::runtime_error("unknown dtype in checkpoint: " + path);
    }
  }
  if (!r.done()) throw std::runtime_error("trailing bytes in checkpoint: " + path);
  return store;
}

void store_params(TensorStore& store, const std::vector<ParamRef<float>>& params,
                  const std::vector<BufferRef<float>>& buffers) {
  for (const auto& p : params) store.put_f32(p.name, *p.value);
  for (const auto& b : buffers) store.put_f32(b.name, *b.value);
}

void load_params(const TensorStore& store, const std::vector<ParamRef<float>>& params,
                 const std::vector<BufferRef<float>>& buffers) {
  auto assign = [&](const std::string& name, core::Tensor<float>* dst) {
    const auto& src = store.f32(name);
    if (!src.same_shape(*dst))
      throw std::runtime_error("checkpoint shape mismatch for " + name);
    *dst = src;
  };
  for (const auto& p : params) assign(p.name, p.value);
  for (const auto& b : buffers) assign(b.name, b.value);
}

}  // namespace paircon::nn
