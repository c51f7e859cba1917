#include "btf/numeric/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <zlib.h>

#include "btf/common/error.hpp"

namespace btf::numeric {

static_assert(std::endian::native == std::endian::little, "checkpoint io assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'B', 'T', 'F', 'C', 'K', 'P', 'T', '\0'};

template <typename V>
void put(std::string& out, V v) {
  char buf[sizeof(V)];
  std::memcpy(buf, &v, sizeof(V));
  out.append(buf, sizeof(V));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}
  template <typename V>
  V get() {
    need(sizeof(V));
    V v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(V));
    pos_ += sizeof(V);
    return v;
  }
  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw ParseError(0, "checkpoint: truncated archive");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t checksum(std::string_view bytes) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

}  // namespace

template <typename T>
std::string encode_checkpoint(const ParamList<T>& params) {
  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    const auto& shape = p.tensor.shape();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
    for (auto d : shape) put<std::uint64_t>(out, d);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(sizeof(T)));
    out.append(reinterpret_cast<const char*>(p.tensor.data()), p.tensor.numel() * sizeof(T));
  }
  put<std::uint32_t>(out, checksum(out));
  return out;
}

std::vector<CheckpointRecord> decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof kMagic + 12 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw ParseError(0, "checkpoint: bad magic");
  }
  const std::string_view body(bytes.data(), bytes.size() - 4);
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + body.size(), 4);
  if (stored != checksum(body)) throw ParseError(0, "checkpoint: checksum mismatch");
  Reader r(body);
  r.take(sizeof kMagic);
  if (const auto v = r.get<std::uint32_t>(); v != kCheckpointVersion) {
    throw ParseError(0, "checkpoint: unsupported version " + std::to_string(v));
  }
  const auto count = r.get<std::uint32_t>();
  std::vector<CheckpointRecord> records;
  for (std::uint32_t k = 0; k < count; ++k) {
    CheckpointRecord rec;
    rec.name = std::string(r.take(r.get<std::uint32_t>()));
    const auto rank = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < rank; ++i) rec.shape.push_back(static_cast<std::size_t>(r.get<std::uint64_t>()));
    rec.dtype = r.get<std::uint8_t>();
    const std::size_t n = numel_of(rec.shape);
    rec.values.resize(n);
    if (rec.dtype == 4) {
      for (auto& v : rec.values) v = r.get<float>();
    } else if (rec.dtype == 8) {
      for (auto& v : rec.values) v = r.get<double>();
    } else {
      throw ParseError(0, "checkpoint: unknown dtype tag " + std::to_string(rec.dtype));
    }
    records.push_back(std::move(rec));
  }
  if (r.pos() != body.size()) throw ParseError(0, "checkpoint: trailing bytes");
  return records;
}

template <typename T>
void save_checkpoint(const ParamList<T>& params, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  const auto bytes = encode_checkpoint(params);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write failed on '" + path.string() + "'");
}

std::vector<CheckpointRecord> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << is.rdbuf();
  return decode_checkpoint(ss.str());
}

template <typename T>
void assign_records(ParamList<T>& params, const std::vector<CheckpointRecord>& records) {
  std::unordered_map<std::string, const CheckpointRecord*> by_name;
  for (const auto& r : records) by_name[r.name] = &r;
  for (auto& p : params) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw LookupError("checkpoint: no record named '" + p.name + "'");
    const auto& rec = *it->second;
    if (rec.shape != p.tensor.shape()) {
      throw ShapeError("checkpoint: '" + p.name + "' has shape " + shape_str(rec.shape) +
                       ", model expects " + shape_str(p.tensor.shape()));
    }
    for (std::size_t i = 0; i < rec.values.size(); ++i) p.tensor[i] = static_cast<T>(rec.values[i]);
  }
}

template <typename T>
void load_checkpoint(ParamList<T>& params, const std::filesystem::path& path) {
  assign_records(params, read_checkpoint(path));
}

#define BTF_INSTANTIATE(T)                                                                 \
  template std::string encode_checkpoint(const ParamList<T>&);                            \
  template void save_checkpoint(const ParamList<T>&, const std::filesystem::path&);       \
  template void load_checkpoint(ParamList<T>&, const std::filesystem::path&);             \
  template void assign_records(ParamList<T>&, const std::vector<CheckpointRecord>&);

BTF_INSTANTIATE(float)
BTF_INSTANTIATE(double)

#undef BTF_INSTANTIATE

}  // namespace btf::numeric
