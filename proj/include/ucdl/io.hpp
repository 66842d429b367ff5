#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ucdl/tensor.hpp"

namespace ucdl::io {

inline constexpr char kMagic[4] = {'U', 'C', 'D', 'L'};
inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::uint32_t kDtypeComplex128 = 1;

/// Binary tensor layout, all integers little-endian:
///   "UCDL" | version u32 | ndim u32 | dims u64 x ndim | dtype u32 | data
/// where data is the row-major array of interleaved (re, im) doubles.
std::vector<std::uint8_t> encode_tensor(const ComplexImage& x);
ComplexImage decode_tensor(const std::vector<std::uint8_t>& bytes);

void write_tensor(const std::filesystem::path& path, const ComplexImage& x);
ComplexImage read_tensor(const std::filesystem::path& path);

/// 8-bit binary PGM (P5).
void write_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               const std::vector<std::uint8_t>& pixels);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace ucdl::io
