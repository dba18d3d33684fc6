#pragma once

// Named-tensor container behind checkpoints: magic "IGT1", a manifest of
// named shapes, raw little-endian 64-bit floats in manifest order, and a
// trailing FNV-1a checksum over everything before it.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "igt/errors.hpp"
#include "igt/tensor.hpp"

namespace igt {

inline std::uint64_t fnv1a64(std::span<const unsigned char> bytes,
                             std::uint64_t seed = 14695981039346656037ull) {
  std::uint64_t h = seed;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file for hashing: " + path);
  std::uint64_t h = 14695981039346656037ull;
  char buf[65536];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    h = fnv1a64({reinterpret_cast<const unsigned char*>(buf), static_cast<std::size_t>(in.gcount())}, h);
    if (in.eof()) break;
  }
  return h;
}

class NamedTensorFile {
 public:
  struct Entry {
    std::string name;
    Shape shape;
    std::vector<double> values;
  };

  static constexpr char kMagic[4] = {'I', 'G', 'T', '1'};

  void add(const std::string& name, Shape shape, std::span<const double> values) {
    if (shape_numel(shape) != values.size())
      throw DataError("checkpoint entry '" + name + "': shape/value mismatch");
    entries_.push_back({name, std::move(shape), {values.begin(), values.end()}});
  }
  void add_scalar(const std::string& name, double v) { add(name, {1}, std::span<const double>(&v, 1)); }

  const std::vector<Entry>& entries() const { return entries_; }

  const Entry* find(const std::string& name) const {
    for (const Entry& e : entries_)
      if (e.name == name) return &e;
    return nullptr;
  }
  const Entry& require(const std::string& name) const {
    const Entry* e = find(name);
    if (!e) throw DataError("checkpoint is missing entry '" + name + "'");
    return *e;
  }
  double scalar(const std::string& name) const {
    const Entry& e = require(name);
    if (e.values.size() != 1) throw DataError("checkpoint entry '" + name + "' is not a scalar");
    return e.values[0];
  }

  void write(const std::string& path) const {
    std::vector<unsigned char> buf;
    buf.insert(buf.end(), kMagic, kMagic + 4);
    put_u64(buf, entries_.size());
    for (const Entry& e : entries_) {
      if (e.name.size() > 0xffff) throw DataError("checkpoint entry name too long");
      put_u16(buf, static_cast<std::uint16_t>(e.name.size()));
      buf.insert(buf.end(), e.name.begin(), e.name.end());
      buf.push_back(static_cast<unsigned char>(e.shape.size()));
      for (std::size_t d : e.shape) put_u64(buf, d);
    }
    for (const Entry& e : entries_)
      for (double v : e.values) put_u64(buf, std::bit_cast<std::uint64_t>(v));
    const std::uint64_t checksum = fnv1a64(buf);
    put_u64(buf, checksum);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw DataError("short write on checkpoint: " + path);
  }

  static NamedTensorFile read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 20 || std::memcmp(buf.data(), kMagic, 4) != 0)
      throw DataError("not a checkpoint file: " + path);
    const std::uint64_t stored = get_u64(buf, buf.size() - 8);
    const std::uint64_t computed = fnv1a64({buf.data(), buf.size() - 8});
    if (stored != computed) throw DataError("checkpoint checksum mismatch: " + path);

    NamedTensorFile f;
    std::size_t off = 4;
    const std::uint64_t n = get_u64(buf, off);
    off += 8;
    for (std::uint64_t i = 0; i < n; ++i) {
      Entry e;
      const std::uint16_t len = get_u16(buf, off);
      off += 2;
      e.name.assign(reinterpret_cast<const char*>(buf.data() + off), len);
      off += len;
      const unsigned char ndim = buf[off++];
      for (unsigned char d = 0; d < ndim; ++d) {
        e.shape.push_back(get_u64(buf, off));
        off += 8;
      }
      f.entries_.push_back(std::move(e));
    }
    for (Entry& e : f.entries_) {
      const std::size_t count = shape_numel(e.shape);
      e.values.resize(count);
      for (std::size_t i = 0; i < count; ++i) {
        e.values[i] = std::bit_cast<double>(get_u64(buf, off));
        off += 8;
      }
    }
    if (off != buf.size() - 8) throw DataError("checkpoint has trailing bytes: " + path);
    return f;
  }

 private:
  static void put_u16(std::vector<unsigned char>& buf, std::uint16_t v) {
    buf.push_back(static_cast<unsigned char>(v & 0xff));
    buf.push_back(static_cast<unsigned char>(v >> 8));
  }
  static void put_u64(std::vector<unsigned char>& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
  }
  static std::uint16_t get_u16(const std::vector<unsigned char>& buf, std::size_t off) {
    if (off + 2 > buf.size()) throw DataError("truncated checkpoint");
    return static_cast<std::uint16_t>(buf[off] | (buf[off + 1] << 8));
  }
  static std::uint64_t get_u64(const std::vector<unsigned char>& buf, std::size_t off) {
    if (off + 8 > buf.size()) throw DataError("truncated checkpoint");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | buf[off + i];
    return v;
  }

  std::vector<Entry> entries_;
};

}  // namespace igt
