#pragma once

// Header + payload container used for embedding tables, MLP weights and
// feature tensors:
//
//   <MAGIC> v1\n
//   <key> <value>\n   (any number, in writing order)
//   END\n
//   <little-endian float32 payload>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "actgrid/error.hpp"

namespace actgrid {

struct BlobHeader {
  std::string magic;
  std::vector<std::pair<std::string, std::string>> fields;

  const std::string& get(std::string_view key) const {
    for (const auto& [k, v] : fields) {
      if (k == key) return v;
    }
    throw InputError(magic + ": header missing '" + std::string(key) + "'");
  }

  std::size_t get_size(std::string_view key) const {
    const auto& v = get(key);
    std::size_t used = 0;
    unsigned long long n = 0;
    try {
      n = std::stoull(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != v.size()) throw InputError(magic + ": header field '" + std::string(key) + "' is not an integer");
    return static_cast<std::size_t>(n);
  }
};

namespace detail {

inline std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return ((v & 0xffU) << 24) | ((v & 0xff00U) << 8) | ((v >> 8) & 0xff00U) | (v >> 24);
  }
}

}  // namespace detail

/// Appends `values` as little-endian float32.
inline void write_float32_payload(std::ostream& out, std::span<const double> values) {
  std::vector<char> buf(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = detail::to_little(std::bit_cast<std::uint32_t>(static_cast<float>(values[i])));
    std::memcpy(buf.data() + 4 * i, &bits, 4);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

/// Reads exactly `count` little-endian float32 values and requires EOF after.
inline std::vector<double> read_float32_payload(std::istream& in, std::size_t count, std::string_view what) {
  std::vector<char> buf(count * 4);
  in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != buf.size()) {
    throw InputError(std::string(what) + ": payload truncated (expected " + std::to_string(count) + " float32 values)");
  }
  if (in.peek() != std::char_traits<char>::eof()) throw InputError(std::string(what) + ": trailing bytes after payload");
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = 0;
    std::memcpy(&bits, buf.data() + 4 * i, 4);
    values[i] = static_cast<double>(std::bit_cast<float>(detail::to_little(bits)));
  }
  return values;
}

inline void write_blob(std::ostream& out, const BlobHeader& header, std::span<const double> payload) {
  out << header.magic << " v1\n";
  for (const auto& [k, v] : header.fields) out << k << ' ' << v << '\n';
  out << "byte_order little\n"
      << "dtype float32\n"
      << "END\n";
  write_float32_payload(out, payload);
}

/// Parses the text header up to END. `magic` must match; the payload is left
/// unread in the stream.
inline BlobHeader read_blob_header(std::istream& in, std::string_view magic) {
  BlobHeader h;
  h.magic = std::string(magic);
  std::string line;
  if (!std::getline(in, line) || line != std::string(magic) + " v1") {
    throw InputError("expected header '" + std::string(magic) + " v1'", 1);
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line == "END") {
      if (h.get("byte_order") != "little" || h.get("dtype") != "float32") {
        throw InputError(h.magic + ": only little-endian float32 payloads are supported");
      }
      return h;
    }
    const auto sp = line.find(' ');
    if (sp == std::string::npos || sp == 0) throw InputError(h.magic + ": malformed header entry", line_no);
    h.fields.emplace_back(line.substr(0, sp), line.substr(sp + 1));
  }
  throw InputError(h.magic + ": header not terminated by END");
}

}  // namespace actgrid
