#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "rrl/errors.hpp"
#include "rrl/tensor.hpp"

namespace rrl {

/// Checkpoint file layout (all integers little-endian):
///   magic "RRLC" | u32 version = 1 | u8 element_width (4 or 8) | u32 param_count
///   then per parameter, in order:
///   u32 name_len | name bytes | u32 rank = 4 | u32 dims[4] | raw elements (LE)
/// Elements are IEEE-754 binary32 or binary64 matching element_width. Loading
/// into the other precision converts values; loading into the same precision
/// is bit-exact.

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class ByteReader {
 public:
  ByteReader(std::string data, std::string path)
      : data_(std::move(data)), path_(std::move(path)) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }

  std::uint32_t u32() {
    const unsigned char* p = take(4);
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  }

  std::uint64_t u64() {
    const unsigned char* p = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
  }

  std::string bytes(std::size_t n) {
    const unsigned char* p = take(n);
    return std::string(reinterpret_cast<const char*>(p), n);
  }

  bool exhausted() const { return pos_ == data_.size(); }

 private:
  const unsigned char* take(std::size_t n) {
    if (data_.size() - pos_ < n) {
      throw io_error("checkpoint '" + path_ + "' is truncated");
    }
    const auto* p = reinterpret_cast<const unsigned char*>(data_.data()) + pos_;
    pos_ += n;
    return p;
  }

  std::string data_;
  std::string path_;
  std::size_t pos_ = 0;
};

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open '" + path + "' for reading");
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw io_error("failed reading '" + path + "'");
  return data;
}

inline void write_file_bytes(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open '" + path + "' for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  out.flush();
  if (!out) throw io_error("failed writing '" + path + "'");
}

}  // namespace detail

template <typename T>
using ParamView = std::vector<std::pair<std::string, const Tensor<T>*>>;

template <typename T>
using ParamRefs = std::vector<std::pair<std::string, Tensor<T>*>>;

template <typename T>
void save_checkpoint(const std::string& path, const ParamView<T>& params) {
  static_assert(sizeof(T) == 4 || sizeof(T) == 8);
  std::string out;
  out += "RRLC";
  detail::put_u32(out, 1);
  out.push_back(static_cast<char>(sizeof(T)));
  detail::put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, tensor] : params) {
    detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    detail::put_u32(out, 4);
    detail::put_u32(out, static_cast<std::uint32_t>(tensor->batch()));
    detail::put_u32(out, static_cast<std::uint32_t>(tensor->height()));
    detail::put_u32(out, static_cast<std::uint32_t>(tensor->width()));
    detail::put_u32(out, static_cast<std::uint32_t>(tensor->channels()));
    for (const T v : tensor->data()) {
      if constexpr (sizeof(T) == 4) {
        detail::put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      } else {
        detail::put_u64(out, std::bit_cast<std::uint64_t>(static_cast<double>(v)));
      }
    }
  }
  detail::write_file_bytes(path, out);
}

/// Loads parameters by position; names and dims in the file must match the
/// destination exactly. A file written at the other precision is converted
/// elementwise.
template <typename T>
void load_checkpoint(const std::string& path, const ParamRefs<T>& params) {
  detail::ByteReader r(detail::read_file_bytes(path), path);
  if (r.bytes(4) != "RRLC") throw io_error("'" + path + "' is not a checkpoint (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != 1) {
    throw io_error("'" + path + "' has unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint8_t width = r.u8();
  if (width != 4 && width != 8) {
    throw io_error("'" + path + "' has unsupported element width " + std::to_string(width));
  }
  const std::uint32_t count = r.u32();
  if (count != params.size()) {
    throw io_error("'" + path + "' holds " + std::to_string(count) + " parameters, expected " +
                   std::to_string(params.size()));
  }
  for (const auto& [name, tensor] : params) {
    const std::string file_name = r.bytes(r.u32());
    if (file_name != name) {
      throw io_error("'" + path + "' parameter '" + file_name + "' does not match expected '" +
                     name + "'");
    }
    const std::uint32_t rank = r.u32();
    if (rank != 4) {
      throw io_error("'" + path + "' parameter '" + name + "' has unsupported rank " +
                     std::to_string(rank));
    }
    std::uint32_t dims[4];
    for (auto& d : dims) d = r.u32();
    if (dims[0] != static_cast<std::uint32_t>(tensor->batch()) ||
        dims[1] != static_cast<std::uint32_t>(tensor->height()) ||
        dims[2] != static_cast<std::uint32_t>(tensor->width()) ||
        dims[3] != static_cast<std::uint32_t>(tensor->channels())) {
      throw io_error("'" + path + "' parameter '" + name + "' has mismatched shape");
    }
    for (T& v : tensor->data()) {
      if (width == 4) {
        v = static_cast<T>(std::bit_cast<float>(r.u32()));
      } else {
        v = static_cast<T>(std::bit_cast<double>(r.u64()));
      }
    }
  }
  if (!r.exhausted()) throw io_error("'" + path + "' has trailing bytes after last parameter");
}

}  // namespace rrl
