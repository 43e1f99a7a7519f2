// SPDX-License-Identifier: Apache-2.0
//
// RTEN v1 raw tensor files. Layout (little-endian):
//   0  "RTEN"
//   4  u8  version (1)
//   5  u8  dtype   (0 = f32, 1 = f64)
//   6  u16 flags   (bit 0: payload is interleaved complex re,im; other bits 0)
//   8  u32 channels
//   12 u32 height
//   16 u32 width
//   20 payload, row-major C x H x W (x2 values when complex)
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fcl/image.hpp"
#include "fcl/spectral/spectral.hpp"

namespace fcl::rten {

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

inline constexpr std::uint16_t kComplexFlag = 1;
inline constexpr std::size_t kHeaderBytes = 20;

struct Header {
    std::uint8_t version = 1;
    DType dtype = DType::f64;
    std::uint16_t flags = 0;
    std::uint32_t channels = 0;
    std::uint32_t height = 0;
    std::uint32_t width = 0;
};

std::vector<std::uint8_t> encode(const ImageD& image, DType dtype);
ImageD decode(const std::vector<std::uint8_t>& bytes, Header* header = nullptr);

std::vector<std::uint8_t> encode_spectra(const std::vector<spectral::Spectrum>& spectra);
std::vector<spectral::Spectrum> decode_spectra(const std::vector<std::uint8_t>& bytes);

void write_image(const std::filesystem::path& path, const ImageD& image, DType dtype = DType::f64);
ImageD read_image(const std::filesystem::path& path, Header* header = nullptr);
void write_spectra(const std::filesystem::path& path, const std::vector<spectral::Spectrum>& spectra);
std::vector<spectral::Spectrum> read_spectra(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace fcl::rten
