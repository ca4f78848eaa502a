#include "memetrn/numerics/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include "memetrn/errors.hpp"
#include "memetrn/numerics/rng.hpp"

namespace memetrn {
namespace {

constexpr char kMagic[8] = {'M', 'T', 'R', 'N', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes.insert(bytes.end(), s.begin(), s.end());
  }
  std::vector<unsigned char> bytes;

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
  }
};

class Reader {
 public:
  explicit Reader(const std::vector<unsigned char>& b) : bytes_(b) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  double f64() { return std::bit_cast<double>(le(8)); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  void raw(char* out, std::size_t n) {
    need(n);
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw ParseError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  const std::vector<unsigned char>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<unsigned char> encode_checkpoint(const ParameterStore& params, const std::string& metadata) {
  Writer w;
  w.bytes.insert(w.bytes.end(), std::begin(kMagic), std::end(kMagic));
  w.u32(kCheckpointVersion);
  w.u64(Rng::hash(metadata));
  w.str(metadata);
  const auto all = params.all();
  w.u32(static_cast<std::uint32_t>(all.size()));
  for (const Parameter* p : all) {
    w.str(p->name);
    w.u32(static_cast<std::uint32_t>(p->value.rank()));
    for (std::size_t d : p->value.shape()) w.u64(d);
    for (double v : p->value.data()) w.f64(v);
  }
  return std::move(w.bytes);
}

Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes) {
  Reader r(bytes);
  char magic[8];
  r.raw(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) throw ParseError("not a memetrn checkpoint (bad magic)");
  Checkpoint ck;
  ck.version = r.u32();
  if (ck.version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(ck.version));
  }
  ck.config_hash = r.u64();
  ck.metadata = r.str();
  if (Rng::hash(ck.metadata) != ck.config_hash) throw IntegrityError("checkpoint config hash mismatch");
  const std::uint32_t count = r.u32();
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str();
    if (!seen.insert(name).second) throw IntegrityError("checkpoint: duplicate parameter " + name);
    const std::uint32_t rank = r.u32();
    Shape shape(rank);
    for (auto& d : shape) d = r.u64();
    Tensor t(shape);
    for (double& v : t.data()) v = r.f64();
    ck.entries.emplace_back(std::move(name), std::move(t));
  }
  if (!r.done()) throw ParseError("checkpoint has trailing bytes");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& params, const std::string& metadata) {
  const auto bytes = encode_checkpoint(params, metadata);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

void load_parameters(const Checkpoint& ckpt, ParameterStore& params) {
  if (ckpt.entries.size() != params.size()) {
    throw IntegrityError("checkpoint holds " + std::to_string(ckpt.entries.size()) + " parameters, model has " +
                         std::to_string(params.size()));
  }
  for (const auto& [name, value] : ckpt.entries) {
    Parameter& p = params.at(name);
    if (p.value.shape() != value.shape()) {
      throw DimensionError("checkpoint parameter " + name + ": " + shape_string(value.shape()) + " vs model " +
                           shape_string(p.value.shape()));
    }
    p.value = value;
  }
}

}  // namespace memetrn
