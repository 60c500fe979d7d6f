#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "lclab/tensor.hpp"

namespace lclab {

/// Single-file indexed container for parameter checkpoints: a magic header,
/// a block index (name, kind, shape, offset), then the payloads. Tensor
/// payloads are little-endian float64; byte blocks are opaque.
namespace blockfile {

constexpr char kMagic[8] = {'L', 'C', 'L', 'B', 'L', 'K', '1', '\n'};

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void put_f64(std::string& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_u64(out, bits);
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw std::runtime_error("checkpoint: truncated file");
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  std::uint16_t u16() {
    need(2);
    const auto lo = static_cast<unsigned char>(buf[pos]);
    const auto hi = static_cast<unsigned char>(buf[pos + 1]);
    pos += 2;
    return static_cast<std::uint16_t>(lo | (hi << 8));
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf[pos++]);
  }
  std::string raw(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace detail

enum class BlockKind : std::uint8_t { tensor_f64 = 0, bytes = 1 };

class Writer {
 public:
  void add_tensor(const std::string& name, const Tensor& t) {
    Entry e;
    e.name = name;
    e.kind = BlockKind::tensor_f64;
    for (std::size_t d : t.shape()) e.dims.push_back(d);
    e.offset = payload_.size();
    for (std::size_t i = 0; i < t.numel(); ++i) detail::put_f64(payload_, t[i]);
    e.length = payload_.size() - e.offset;
    entries_.push_back(std::move(e));
  }

  void add_bytes(const std::string& name, const std::string& data) {
    Entry e;
    e.name = name;
    e.kind = BlockKind::bytes;
    e.offset = payload_.size();
    payload_ += data;
    e.length = data.size();
    entries_.push_back(std::move(e));
  }

  std::string serialize() const {
    std::string out(kMagic, sizeof(kMagic));
    detail::put_u64(out, entries_.size());
    for (const auto& e : entries_) {
      detail::put_u16(out, static_cast<std::uint16_t>(e.name.size()));
      out += e.name;
      out.push_back(static_cast<char>(e.kind));
      out.push_back(static_cast<char>(e.dims.size()));
      for (std::uint64_t d : e.dims) detail::put_u64(out, d);
      detail::put_u64(out, e.offset);
      detail::put_u64(out, e.length);
    }
    out += payload_;
    return out;
  }

  void write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    const std::string data = serialize();
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw std::runtime_error("checkpoint: short write to " + path);
  }

 private:
  struct Entry {
    std::string name;
    BlockKind kind = BlockKind::tensor_f64;
    std::vector<std::uint64_t> dims;
    std::uint64_t offset = 0;
    std::uint64_t length = 0;
  };

  std::vector<Entry> entries_;
  std::string payload_;
};

class File {
 public:
  static File parse(const std::string& buf) {
    File f;
    if (buf.size() < sizeof(kMagic) || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
      throw std::runtime_error("checkpoint: bad magic");
    detail::Reader r{buf, sizeof(kMagic)};
    const std::uint64_t count = r.u64();
    struct RawEntry {
      std::string name;
      BlockKind kind;
      std::vector<std::size_t> dims;
      std::uint64_t offset, length;
    };
    std::vector<RawEntry> raw(count);
    for (auto& e : raw) {
      e.name = r.raw(r.u16());
      e.kind = static_cast<BlockKind>(r.u8());
      const std::uint8_t ndim = r.u8();
      for (std::uint8_t i = 0; i < ndim; ++i) e.dims.push_back(static_cast<std::size_t>(r.u64()));
      e.offset = r.u64();
      e.length = r.u64();
    }
    const std::size_t payload_start = r.pos;
    for (auto& e : raw) {
      if (payload_start + e.offset + e.length > buf.size())
        throw std::runtime_error("checkpoint: block '" + e.name + "' outside file");
      Block b;
      b.kind = e.kind;
      b.dims = std::move(e.dims);
      b.data = buf.substr(payload_start + e.offset, e.length);
      f.order_.push_back(e.name);
      f.blocks_.emplace(e.name, std::move(b));
    }
    return f;
  }

  static File read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse(buf);
  }

  bool has(const std::string& name) const { return blocks_.count(name) > 0; }
  const std::vector<std::string>& names() const { return order_; }

  Tensor tensor(const std::string& name) const {
    const Block& b = at(name);
    if (b.kind != BlockKind::tensor_f64)
      throw std::runtime_error("checkpoint: block '" + name + "' is not a tensor");
    std::size_t numel = b.dims.empty() ? 0 : 1;
    for (std::size_t d : b.dims) numel *= d;
    if (b.data.size() != numel * 8)
      throw std::runtime_error("checkpoint: block '" + name + "' payload size mismatch");
    std::vector<double> values(numel);
    for (std::size_t i = 0; i < numel; ++i) {
      std::uint64_t bits = 0;
      for (int k = 0; k < 8; ++k)
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(b.data[i * 8 + k]))
                << (8 * k);
      std::memcpy(&values[i], &bits, 8);
    }
    return Tensor::from(b.dims, std::move(values));
  }

  std::string bytes(const std::string& name) const {
    const Block& b = at(name);
    if (b.kind != BlockKind::bytes)
      throw std::runtime_error("checkpoint: block '" + name + "' is not a byte block");
    return b.data;
  }

 private:
  struct Block {
    BlockKind kind;
    std::vector<std::size_t> dims;
    std::string data;
  };

  const Block& at(const std::string& name) const {
    auto it = blocks_.find(name);
    if (it == blocks_.end()) throw std::runtime_error("checkpoint: missing block '" + name + "'");
    return it->second;
  }

  std::vector<std::string> order_;
  std::map<std::string, Block> blocks_;
};

}  // namespace blockfile

}  // namespace lclab
