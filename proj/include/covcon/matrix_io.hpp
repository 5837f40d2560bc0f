#pragma once

// Binary layout (little-endian, packed):
//   "CVCN" | version u32 | n u64 | N u64 | family tag u32 | seed u64
//   [p f64, lp_ball only] | n*N f64, column-major

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <ostream>
#include <string>
#include <vector>

#include "covcon/error.hpp"
#include "covcon/sampler.hpp"

namespace covcon {

inline constexpr std::uint32_t kMatrixFormatVersion = 1;
inline constexpr char kMatrixMagic[4] = {'C', 'V', 'C', 'N'};

namespace detail {

template <typename T>
void put_le(std::vector<unsigned char>& out, T value) {
  std::uint64_t bits = 0;
  if constexpr (sizeof(T) == 8)
    bits = std::bit_cast<std::uint64_t>(value);
  else
    bits = std::bit_cast<std::uint32_t>(value);
  for (std::size_t b = 0; b < sizeof(T); ++b) out.push_back(static_cast<unsigned char>(bits >> (8 * b)));
}

template <typename T>
T get_le(const unsigned char* in) {
  std::uint64_t bits = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) bits |= std::uint64_t{in[b]} << (8 * b);
  if constexpr (sizeof(T) == 8)
    return std::bit_cast<T>(bits);
  else
    return std::bit_cast<T>(static_cast<std::uint32_t>(bits));
}

}  // namespace detail

inline std::vector<unsigned char> encode_matrix(const SampleMatrix& a) {
  std::vector<unsigned char> out(kMatrixMagic, kMatrixMagic + 4);
  const auto& spec = a.spec();
  detail::put_le(out, kMatrixFormatVersion);
  detail::put_le(out, static_cast<std::uint64_t>(spec.n));
  detail::put_le(out, static_cast<std::uint64_t>(spec.N));
  detail::put_le(out, static_cast<std::uint32_t>(spec.family.kind));
  detail::put_le(out, spec.seed);
  if (spec.family.kind == FamilyKind::lp_ball) detail::put_le(out, spec.family.p);
  out.reserve(out.size() + 8 * a.entries().size());
  for (double v : a.entries()) detail::put_le(out, v);
  return out;
}

inline SampleMatrix decode_matrix(const std::vector<unsigned char>& bytes) {
  constexpr std::size_t header = 4 + 4 + 8 + 8 + 4 + 8;
  if (bytes.size() < header || std::memcmp(bytes.data(), kMatrixMagic, 4) != 0)
    throw ValidationError("matrix file: missing CVCN header");
  const unsigned char* p = bytes.data() + 4;
  const auto version = detail::get_le<std::uint32_t>(p);
  if (version != kMatrixFormatVersion)
    throw ValidationError("matrix file: unsupported version " + std::to_string(version));
  EnsembleSpec spec;
  spec.n = detail::get_le<std::uint64_t>(p + 4);
  spec.N = detail::get_le<std::uint64_t>(p + 12);
  const auto tag = detail::get_le<std::uint32_t>(p + 20);
  if (tag > static_cast<std::uint32_t>(FamilyKind::rademacher_control))
    throw ValidationError("matrix file: unknown family tag " + std::to_string(tag));
  spec.family.kind = static_cast<FamilyKind>(tag);
  spec.seed = detail::get_le<std::uint64_t>(p + 24);
  std::size_t offset = header;
  if (spec.family.kind == FamilyKind::lp_ball) {
    if (bytes.size() < offset + 8) throw ValidationError("matrix file: truncated lp_ball header");
    spec.family.p = detail::get_le<double>(bytes.data() + offset);
    offset += 8;
  }
  spec.validate();
  if (spec.n != 0 && spec.N > (bytes.size() - offset) / 8 / spec.n)
    throw ValidationError("matrix file: payload shorter than n*N doubles");
  const std::size_t count = spec.n * spec.N;
  if (bytes.size() != offset + 8 * count)
    throw ValidationError("matrix file: payload size does not match n*N doubles");
  std::vector<double> entries(count);
  for (std::size_t i = 0; i < count; ++i)
    entries[i] = detail::get_le<double>(bytes.data() + offset + 8 * i);
  return {spec, std::move(entries)};
}

inline void write_matrix(const std::string& path, const SampleMatrix& a) {
  const auto bytes = encode_matrix(a);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write to '" + path + "' failed");
}

inline SampleMatrix read_matrix(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "' for reading");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (is.bad()) throw IoError("read from '" + path + "' failed");
  return decode_matrix(bytes);
}

/// Debug export: n lines, one comma-separated value per vector.
inline void write_matrix_csv(std::ostream& os, const SampleMatrix& a) {
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) {
      if (c) os << ',';
      os << format_real(a(r, c));
    }
    os << '\n';
  }
}

}  // namespace covcon
