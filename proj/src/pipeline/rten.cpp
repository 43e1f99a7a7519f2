// SPDX-License-Identifier: Apache-2.0
#include "fcl/rten.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "fcl/error.hpp"

namespace fcl::rten {

static_assert(std::endian::native == std::endian::little, "RTEN I/O assumes a little-endian host");

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T get(const std::vector<std::uint8_t>& in, std::size_t offset) {
    T value;
    std::memcpy(&value, in.data() + offset, sizeof(T));
    return value;
}

void put_header(std::vector<std::uint8_t>& out, const Header& h) {
    out.insert(out.end(), {'R', 'T', 'E', 'N'});
    put<std::uint8_t>(out, h.version);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(h.dtype));
    put<std::uint16_t>(out, h.flags);
    put<std::uint32_t>(out, h.channels);
    put<std::uint32_t>(out, h.height);
    put<std::uint32_t>(out, h.width);
}

Header parse_header(const std::vector<std::uint8_t>& in) {
    if (in.size() < 4 || std::memcmp(in.data(), "RTEN", 4) != 0) throw FormatError("bad RTEN magic", 0);
    if (in.size() < kHeaderBytes) throw FormatError("truncated RTEN header", in.size());
    Header h;
    h.version = in[4];
    if (h.version != 1) throw FormatError("unsupported RTEN version " + std::to_string(h.version), 4);
    if (in[5] > 1) throw FormatError("unknown RTEN dtype " + std::to_string(in[5]), 5);
    h.dtype = static_cast<DType>(in[5]);
    h.flags = get<std::uint16_t>(in, 6);
    if ((h.flags & ~kComplexFlag) != 0) throw FormatError("reserved RTEN flag bits set", 6);
    h.channels = get<std::uint32_t>(in, 8);
    h.height = get<std::uint32_t>(in, 12);
    h.width = get<std::uint32_t>(in, 16);
    const std::size_t values = static_cast<std::size_t>(h.channels) * h.height * h.width *
                               ((h.flags & kComplexFlag) ? 2 : 1);
    const std::size_t bytes = values * (h.dtype == DType::f32 ? 4 : 8);
    if (in.size() < kHeaderBytes + bytes) {
        throw FormatError("truncated RTEN payload: need " + std::to_string(bytes) + " bytes", in.size());
    }
    if (in.size() > kHeaderBytes + bytes) throw FormatError("trailing bytes after RTEN payload", kHeaderBytes + bytes);
    return h;
}

std::vector<double> read_values(const std::vector<std::uint8_t>& in, const Header& h, std::size_t count) {
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        if (h.dtype == DType::f32) {
            out[i] = get<float>(in, kHeaderBytes + 4 * i);
        } else {
            out[i] = get<double>(in, kHeaderBytes + 8 * i);
        }
    }
    return out;
}

}  // namespace

std::vector<std::uint8_t> encode(const ImageD& image, DType dtype) {
    std::vector<std::uint8_t> out;
    out.reserve(kHeaderBytes + image.size() * 8);
    put_header(out, Header{1, dtype, 0, static_cast<std::uint32_t>(image.channels()),
                           static_cast<std::uint32_t>(image.height()), static_cast<std::uint32_t>(image.width())});
    for (double v : image.data()) {
        if (dtype == DType::f32) {
            put<float>(out, static_cast<float>(v));
        } else {
            put<double>(out, v);
        }
    }
    return out;
}

ImageD decode(const std::vector<std::uint8_t>& bytes, Header* header) {
    const Header h = parse_header(bytes);
    if (h.flags & kComplexFlag) throw FormatError("RTEN file holds complex data, expected real", 6);
    if (header) *header = h;
    auto values = read_values(bytes, h, static_cast<std::size_t>(h.channels) * h.height * h.width);
    try {
        return ImageD(h.channels, h.height, h.width, std::move(values));
    } catch (const SizeError& e) {
        throw FormatError(std::string("RTEN dimensions rejected: ") + e.what(), 8);
    }
}

std::vector<std::uint8_t> encode_spectra(const std::vector<spectral::Spectrum>& spectra) {
    if (spectra.empty()) throw SizeError("no spectra to encode");
    std::vector<std::uint8_t> out;
    put_header(out, Header{1, DType::f64, kComplexFlag, static_cast<std::uint32_t>(spectra.size()),
                           static_cast<std::uint32_t>(spectra[0].height()),
                           static_cast<std::uint32_t>(spectra[0].width())});
    for (const auto& s : spectra) {
        for (const auto& z : s.data()) {
            put<double>(out, z.real());
            put<double>(out, z.imag());
        }
    }
    return out;
}

std::vector<spectral::Spectrum> decode_spectra(const std::vector<std::uint8_t>& bytes) {
    const Header h = parse_header(bytes);
    if (!(h.flags & kComplexFlag)) throw FormatError("RTEN file holds real data, expected complex", 6);
    const std::size_t plane = static_cast<std::size_t>(h.height) * h.width;
    auto values = read_values(bytes, h, 2 * plane * h.channels);
    std::vector<spectral::Spectrum> out;
    for (std::size_t c = 0; c < h.channels; ++c) {
        spectral::Spectrum s(h.height, h.width);
        for (std::size_t i = 0; i < plane; ++i) s.data()[i] = {values[2 * (c * plane + i)], values[2 * (c * plane + i) + 1]};
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string(), 0);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("short write to " + path.string());
}

void write_image(const std::filesystem::path& path, const ImageD& image, DType dtype) {
    write_file(path, encode(image, dtype));
}

ImageD read_image(const std::filesystem::path& path, Header* header) {
    try {
        return decode(read_file(path), header);
    } catch (const FormatError& e) {
        throw e.in_file(path.string());
    }
}

void write_spectra(const std::filesystem::path& path, const std::vector<spectral::Spectrum>& spectra) {
    write_file(path, encode_spectra(spectra));
}

std::vector<spectral::Spectrum> read_spectra(const std::filesystem::path& path) {
    try {
        return decode_spectra(read_file(path));
    } catch (const FormatError& e) {
        throw e.in_file(path.string());
    }
}

}  // namespace fcl::rten
