#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "slt/data.hpp"
#include "slt/error.hpp"

namespace slt {

namespace {

constexpr char kMagic[4] = {'S', 'L', 'T', 'S'};
constexpr std::uint16_t kVersion = 1;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_ids(std::vector<std::uint8_t>& out, const std::vector<std::size_t>& ids, const char* what) {
  if (ids.size() > 0xffff) throw ContractError(std::string("save_sample: too many ") + what);
  put_u16(out, static_cast<std::uint16_t>(ids.size()));
  for (auto id : ids) {
    if (id > 0xffff) throw ContractError(std::string("save_sample: ") + what + " id " + std::to_string(id) + " exceeds u16");
    put_u16(out, static_cast<std::uint16_t>(id));
  }
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("sample file truncated while reading ") + what, pos_);
    }
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return bytes_[pos_++];
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    const std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_sample(const SampleRecord& record) {
  const auto& f = record.frames;
  if (!f.defined() || f.rank() != 4) throw ContractError("save_sample: frames must be [T, C, H, W]");
  if (f.dim(1) != input_channels(record.kind)) {
    throw ContractError("save_sample: " + to_string(record.kind) + " sample needs " +
                        std::to_string(input_channels(record.kind)) + " channels, got " + std::to_string(f.dim(1)));
  }
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u16(out, kVersion);
  out.push_back(static_cast<std::uint8_t>(record.kind));
  for (std::size_t a = 0; a < 4; ++a) {
    if (f.dim(a) > 0xffffffffULL) throw ContractError("save_sample: extent exceeds u32");
    put_u32(out, static_cast<std::uint32_t>(f.dim(a)));
  }
  out.reserve(out.size() + 4 * f.numel() + 4 + 2 * (record.gloss_ids.size() + record.text_ids.size()));
  for (double v : f.data()) {
    const float x = static_cast<float>(v);
    if (static_cast<double>(x) != v && !(std::isnan(v) && std::isnan(x))) {
      throw ContractError("save_sample: value " + std::to_string(v) + " is not representable as float32");
    }
    put_u32(out, std::bit_cast<std::uint32_t>(x));
  }
  put_ids(out, record.gloss_ids, "gloss");
  put_ids(out, record.text_ids, "text");
  return out;
}

void save_sample(const SampleRecord& record, const std::string& path) {
  const auto bytes = encode_sample(record);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write sample " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path);
}

SampleRecord decode_sample(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  in.need(4, "magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad magic, expected \"SLTS\"", 0);
  for (int i = 0; i < 4; ++i) in.u8("magic");
  const std::size_t version_at = in.pos();
  const auto version = in.u16("version");
  if (version != kVersion) throw FormatError("unsupported sample version " + std::to_string(version), version_at);
  const std::size_t kind_at = in.pos();
  const auto kind = in.u8("kind");
  if (kind > 1) throw FormatError("unknown sample kind " + std::to_string(kind), kind_at);

  SampleRecord rec;
  rec.kind = static_cast<InputKind>(kind);
  const std::size_t shape_at = in.pos();
  Shape shape(4);
  for (auto& e : shape) e = in.u32("shape");
  for (auto e : shape) {
    if (e == 0) throw FormatError("zero extent in shape " + shape_str(shape), shape_at);
  }
  if (shape[1] != input_channels(rec.kind)) {
    throw FormatError(to_string(rec.kind) + " sample declares " + std::to_string(shape[1]) + " channels", shape_at);
  }
  // Checked in 128 bits so a hostile header cannot overflow the size.
  const unsigned __int128 numel = static_cast<unsigned __int128>(shape[0]) * shape[1] * shape[2] * shape[3];
  if (numel * 4 > in.remaining()) {
    throw FormatError("payload of shape " + shape_str(shape) + " exceeds the " + std::to_string(in.remaining()) +
                          " remaining bytes",
                      in.pos());
  }
  std::vector<double> values(static_cast<std::size_t>(numel));
  for (auto& v : values) v = static_cast<double>(std::bit_cast<float>(in.u32("payload")));
  rec.frames = Tensor::from(shape, std::move(values));

  auto ids = [&](const char* what) {
    const auto n = in.u16(what);
    std::vector<std::size_t> out(n);
    for (auto& id : out) id = in.u16(what);
    return out;
  };
  rec.gloss_ids = ids("gloss ids");
  rec.text_ids = ids("text ids");
  if (in.remaining() != 0) throw FormatError(std::to_string(in.remaining()) + " trailing bytes", in.pos());
  rec.sentence_kind = Grammar::kind_of(rec.gloss_ids);
  return rec;
}

SampleRecord load_sample(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read sample " + path);
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_sample(bytes);
}

}  // namespace slt
