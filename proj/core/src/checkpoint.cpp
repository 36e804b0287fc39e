#include "bodylift/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "bodylift/error.hpp"

namespace bodylift {

namespace {

constexpr char kMagic[4] = {'P', 'L', 'D', 'A'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <class T>
  void little(T v) {
    static_assert(std::is_unsigned_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(std::uint8_t(v >> (8 * i)));
  }
  void u32(std::uint32_t v) { little(v); }
  void u64(std::uint64_t v) { little(v); }
  void f64(double v) { little(std::bit_cast<std::uint64_t>(v)); }
  void f64s(std::span<const double> values) {
    for (double v : values) f64(v);
  }
  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  void need(std::size_t n) const {
    if (size_ - pos_ < n) throw CheckpointError("checkpoint truncated");
  }
  template <class T>
  T little() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= T(data_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }
  std::uint32_t u32() { return little<std::uint32_t>(); }
  std::uint64_t u64() { return little<std::uint64_t>(); }
  double f64() { return std::bit_cast<double>(little<std::uint64_t>()); }
  std::vector<double> f64s(std::uint64_t count) {
    if (count > (size_ - pos_) / 8) throw CheckpointError("checkpoint truncated");
    std::vector<double> v(count);
    for (auto& x : v) x = f64();
    return v;
  }
  void expect(const char* magic, std::size_t n) {
    need(n);
    if (std::memcmp(data_ + pos_, magic, n) != 0) throw CheckpointError("checkpoint magic mismatch");
    pos_ += n;
  }
  std::size_t remaining() const { return size_ - pos_; }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(const std::uint8_t* data, std::size_t n) {
  return static_cast<std::uint32_t>(crc32(crc32(0L, Z_NULL, 0), data, static_cast<uInt>(n)));
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const net::ModelParams& model, const NormStats& stats) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.u32(std::uint32_t(model.spec.joints));
  w.u32(std::uint32_t(model.spec.width));
  w.f64(model.spec.dropout);
  w.u32(static_cast<std::uint32_t>(model.spec.joint_set));
  w.u32(static_cast<std::uint32_t>(model.spec.variant));
  const auto tensors = model.state_tensors();
  w.u32(std::uint32_t(tensors.size()));
  for (const auto* t : tensors) {
    w.u32(std::uint32_t(t->rank()));
    for (auto d : t->shape()) w.u64(d);
    w.f64s(t->data());
  }
  for (const auto* v : {&stats.mean2d, &stats.std2d, &stats.mean3d, &stats.std3d}) {
    w.u64(v->size());
    w.f64s(*v);
  }
  auto& buf = w.buffer();
  const std::uint32_t crc = crc_of(buf.data(), buf.size());
  w.u32(crc);
  return std::move(buf);
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8) throw CheckpointError("checkpoint truncated");
  Reader header(bytes.data(), bytes.size());
  header.expect(kMagic, 4);
  const std::uint32_t version = header.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::size_t body = bytes.size() - 4;
  Reader tail(bytes.data() + body, 4);
  if (tail.u32() != crc_of(bytes.data(), body)) throw CheckpointError("checkpoint CRC mismatch");

  Reader r(bytes.data(), body);
  r.expect(kMagic, 4);
  r.u32();
  net::ModelSpec spec;
  spec.joints = r.u32();
  spec.width = r.u32();
  spec.dropout = r.f64();
  const auto joint_set = r.u32();
  if (joint_set != 0 && joint_set != 16 && joint_set != 17) throw CheckpointError("unknown joint-set id");
  spec.joint_set = static_cast<JointSet>(joint_set);
  const auto variant = r.u32();
  if (variant != 1 && variant != 2) throw CheckpointError("unknown model variant");
  spec.variant = static_cast<net::Variant>(variant);

  Checkpoint ck;
  try {
    Rng rng = make_rng(0);
    ck.model = net::build_model(spec, rng);
  } catch (const Error& e) {
    throw CheckpointError(std::string("checkpoint header is inconsistent: ") + e.what());
  }
  auto targets = ck.model.state_tensors();
  if (r.u32() != targets.size()) throw CheckpointError("checkpoint tensor count does not match model layout");
  for (auto* t : targets) {
    const auto rank = r.u32();
    Shape shape;
    for (std::uint32_t k = 0; k < rank; ++k) shape.push_back(r.u64());
    if (shape != t->shape()) throw CheckpointError("checkpoint tensor shape does not match model layout");
    *t = Tensor(shape, r.f64s(element_count(shape)));
  }
  for (auto* v : {&ck.stats.mean2d, &ck.stats.std2d, &ck.stats.mean3d, &ck.stats.std3d}) {
    *v = r.f64s(r.u64());
  }
  if (ck.stats.mean2d.size() != spec.input2d() || ck.stats.std2d.size() != spec.input2d() ||
      ck.stats.mean3d.size() != spec.input3d() || ck.stats.std3d.size() != spec.input3d()) {
    throw CheckpointError("checkpoint normalization statistics do not match joint count");
  }
  if (r.remaining() != 0) throw CheckpointError("checkpoint has trailing bytes");
  return ck;
}

void save_checkpoint(const net::ModelParams& model, const NormStats& stats, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(model, stats);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw CheckpointError("write failed for checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return deserialize_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

}  // namespace bodylift
