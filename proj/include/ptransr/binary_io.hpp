#pragma once

// Little-endian primitive encoding shared by the PTBL and PTRM formats.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "ptransr/kgdata.hpp"

namespace ptransr::io {

template <typename U>
void WriteUnsigned(std::ostream& out, U value) {
  std::array<char, sizeof(U)> bytes;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFFu);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename U>
U ReadUnsigned(std::istream& in) {
  std::array<unsigned char, sizeof(U)> bytes;
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw Error("unexpected end of file");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

inline void WriteU8(std::ostream& out, std::uint8_t v) { WriteUnsigned(out, v); }
inline void WriteU32(std::ostream& out, std::uint32_t v) { WriteUnsigned(out, v); }
inline void WriteU64(std::ostream& out, std::uint64_t v) { WriteUnsigned(out, v); }
inline void WriteF32(std::ostream& out, float v) { WriteU32(out, std::bit_cast<std::uint32_t>(v)); }
inline void WriteF64(std::ostream& out, double v) { WriteU64(out, std::bit_cast<std::uint64_t>(v)); }

inline std::uint8_t ReadU8(std::istream& in) { return ReadUnsigned<std::uint8_t>(in); }
inline std::uint32_t ReadU32(std::istream& in) { return ReadUnsigned<std::uint32_t>(in); }
inline std::uint64_t ReadU64(std::istream& in) { return ReadUnsigned<std::uint64_t>(in); }
inline float ReadF32(std::istream& in) { return std::bit_cast<float>(ReadU32(in)); }
inline double ReadF64(std::istream& in) { return std::bit_cast<double>(ReadU64(in)); }

inline void WriteMagic(std::ostream& out, std::string_view magic) {
  out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void ExpectMagic(std::istream& in, std::string_view magic) {
  std::string got(magic.size(), '\0');
  in.read(got.data(), static_cast<std::streamsize>(got.size()));
  if (!in || got != magic) throw Error("bad magic: expected " + std::string(magic));
}

}  // namespace ptransr::io
