#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "bcareid/checkpoint.hpp"
#include "bcareid/errors.hpp"

namespace bcareid {

namespace {

constexpr char kMagic[8] = {'B', 'C', 'A', 'C', 'K', 'P', 'T', '\0'};

enum : std::uint8_t { kReals = 1, kInts = 2, kText = 3 };

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  void u8(std::uint8_t v) { out.push_back(v); }
  void uint(std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes(b) {}
  std::uint64_t uint(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes[pos + i]) << (8 * i);
    pos += static_cast<std::size_t>(n);
    return v;
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = bytes.subspan(pos, n);
    pos += n;
    return s;
  }
  void need(std::size_t n) const {
    if (bytes.size() - pos < n) throw CheckpointError("checkpoint truncated");
  }
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

}  // namespace

const std::vector<double>& KvContainer::reals(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end() || !std::holds_alternative<std::vector<double>>(it->second))
    throw CheckpointError("missing real array '" + key + "'");
  return std::get<std::vector<double>>(it->second);
}

const std::vector<std::int64_t>& KvContainer::ints(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end() || !std::holds_alternative<std::vector<std::int64_t>>(it->second))
    throw CheckpointError("missing integer array '" + key + "'");
  return std::get<std::vector<std::int64_t>>(it->second);
}

const std::string& KvContainer::text(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end() || !std::holds_alternative<std::string>(it->second))
    throw CheckpointError("missing text entry '" + key + "'");
  return std::get<std::string>(it->second);
}

std::vector<std::uint8_t> KvContainer::serialize() const {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.uint(kCheckpointVersion, 4);
  w.uint(entries_.size(), 4);
  for (const auto& [key, value] : entries_) {
    w.uint(key.size(), 2);
    w.raw(key.data(), key.size());
    if (const auto* r = std::get_if<std::vector<double>>(&value)) {
      w.u8(kReals);
      w.uint(r->size(), 8);
      for (double v : *r) w.uint(std::bit_cast<std::uint64_t>(v), 8);
    } else if (const auto* n = std::get_if<std::vector<std::int64_t>>(&value)) {
      w.u8(kInts);
      w.uint(n->size(), 8);
      for (auto v : *n) w.uint(static_cast<std::uint64_t>(v), 8);
    } else {
      const auto& s = std::get<std::string>(value);
      w.u8(kText);
      w.uint(s.size(), 8);
      w.raw(s.data(), s.size());
    }
  }
  w.uint(fnv1a(w.out), 8);
  return std::move(w.out);
}

KvContainer KvContainer::deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof kMagic + 16) throw CheckpointError("checkpoint truncated");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw CheckpointError("not a checkpoint (bad magic)");
  const auto body = bytes.first(bytes.size() - 8);
  Reader trailer(bytes.last(8));
  if (trailer.uint(8) != fnv1a(body)) throw CheckpointError("checkpoint checksum mismatch");

  Reader r(body);
  r.take(sizeof kMagic);
  const auto version = r.uint(4);
  if (version != kCheckpointVersion)
    throw CheckpointError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  const auto count = r.uint(4);
  KvContainer c;
  for (std::uint64_t e = 0; e < count; ++e) {
    const auto key_len = r.uint(2);
    const auto key_bytes = r.take(key_len);
    std::string key(key_bytes.begin(), key_bytes.end());
    const auto type = r.uint(1);
    const auto n = r.uint(8);
    if (type == kReals || type == kInts) {
      if (n > (r.bytes.size() - r.pos) / 8) throw CheckpointError("checkpoint truncated");
      if (type == kReals) {
        std::vector<double> v(n);
        for (auto& x : v) x = std::bit_cast<double>(r.uint(8));
        c.put(key, std::move(v));
      } else {
        std::vector<std::int64_t> v(n);
        for (auto& x : v) x = static_cast<std::int64_t>(r.uint(8));
        c.put(key, std::move(v));
      }
    } else if (type == kText) {
      const auto s = r.take(n);
      c.put(key, std::string(s.begin(), s.end()));
    } else {
      throw CheckpointError("unknown entry type in '" + key + "'");
    }
  }
  if (r.pos != body.size()) throw CheckpointError("trailing bytes in checkpoint");
  return c;
}

namespace {

void put_params(KvContainer& c, const std::string& prefix, const EncoderParams& p) {
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const auto& l = p.layers[i];
    const std::string k = prefix + "." + std::to_string(i);
    c.put(k + ".weight", std::vector<double>(l.weight.data(), l.weight.data() + l.weight.size()));
    c.put(k + ".bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size()));
  }
}

EncoderParams get_params(const KvContainer& c, const std::string& prefix,
                         const std::vector<std::int64_t>& dims, double slope) {
  EncoderParams p;
  p.leaky_slope = slope;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const std::string k = prefix + "." + std::to_string(i);
    const auto& w = c.reals(k + ".weight");
    const auto& b = c.reals(k + ".bias");
    const auto out = dims[i + 1], in = dims[i];
    if (static_cast<std::int64_t>(w.size()) != out * in || static_cast<std::int64_t>(b.size()) != out)
      throw CheckpointError("array '" + k + "' does not match layer dimensions");
    DenseLayer l{Matrix(out, in), Vector(out)};
    std::copy(w.begin(), w.end(), l.weight.data());
    std::copy(b.begin(), b.end(), l.bias.data());
    p.layers.push_back(std::move(l));
  }
  return p;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  KvContainer c;
  std::vector<std::int64_t> dims;
  if (!ckpt.params.layers.empty()) dims.push_back(ckpt.params.input_dim());
  for (const auto& l : ckpt.params.layers) dims.push_back(l.out_dim());
  c.put("encoder.dims", dims);
  c.put("encoder.leaky_slope", std::vector<double>{ckpt.params.leaky_slope});
  put_params(c, "params", ckpt.params);
  put_params(c, "adam.m", ckpt.adam.first_moment);
  put_params(c, "adam.v", ckpt.adam.second_moment);
  c.put("adam.step", std::vector<std::int64_t>{static_cast<std::int64_t>(ckpt.adam.step)});
  c.put("adam.hyper", std::vector<double>{ckpt.adam.beta1, ckpt.adam.beta2, ckpt.adam.epsilon});
  c.put("epoch", std::vector<std::int64_t>{ckpt.epoch});
  c.put("config", ckpt.config);
  return c.serialize();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  const auto c = KvContainer::deserialize(bytes);
  Checkpoint out;
  const auto& dims = c.ints("encoder.dims");
  if (dims.size() < 2) throw CheckpointError("encoder.dims needs at least two entries");
  const auto& slope = c.reals("encoder.leaky_slope");
  if (slope.size() != 1) throw CheckpointError("encoder.leaky_slope must hold one value");
  out.params = get_params(c, "params", dims, slope[0]);
  out.adam.first_moment = get_params(c, "adam.m", dims, slope[0]);
  out.adam.second_moment = get_params(c, "adam.v", dims, slope[0]);
  const auto& step = c.ints("adam.step");
  const auto& hyper = c.reals("adam.hyper");
  const auto& epoch = c.ints("epoch");
  if (step.size() != 1 || hyper.size() != 3 || epoch.size() != 1)
    throw CheckpointError("malformed optimizer or epoch entry");
  out.adam.step = static_cast<std::uint64_t>(step[0]);
  out.adam.beta1 = hyper[0];
  out.adam.beta2 = hyper[1];
  out.adam.epsilon = hyper[2];
  out.epoch = static_cast<int>(epoch[0]);
  out.config = c.text("config");
  return out;
}

void checkpoint_save(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("write failed for " + path.string());
}

Checkpoint checkpoint_load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace bcareid
