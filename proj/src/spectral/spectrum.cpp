// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <string>

#include "fcl/error.hpp"
#include "fcl/spectral/spectral.hpp"

namespace fcl::spectral {

namespace {

int wrap_index(int u, std::size_t n) {
    const int half = static_cast<int>(n / 2);
    const int len = static_cast<int>(n);
    int shifted = (u + half) % len;
    if (shifted < 0) shifted += len;
    return shifted - half;
}

void check_bandwidth(int band, std::size_t side, const char* what) {
    if (band <= 0 || band % 2 != 0) {
        throw ParameterError(std::string(what) + " must be a positive even number, got " +
                             std::to_string(band));
    }
    if (static_cast<std::size_t>(band) > side) {
        throw ParameterError(std::string(what) + " " + std::to_string(band) +
                             " exceeds the image side " + std::to_string(side));
    }
}

}  // namespace

Spectrum::Spectrum(std::size_t height, std::size_t width)
    : height_(height), width_(width), data_(height * width) {
    if (height == 0 || width == 0 || height % 2 != 0 || width % 2 != 0) {
        throw SizeError("spectrum dimensions must be positive and even, got " +
                        std::to_string(height) + "x" + std::to_string(width));
    }
}

int Spectrum::wrap_u(int u) const noexcept { return wrap_index(u, height_); }
int Spectrum::wrap_v(int v) const noexcept { return wrap_index(v, width_); }

double Spectrum::energy() const noexcept {
    double total = 0.0;
    for (const auto& z : data_) total += std::norm(z);
    return total;
}

void FilterSpec::validate(std::size_t height, std::size_t width) const {
    const std::size_t side = std::min(height, width);
    if (shape == FilterShape::square) {
        const double rounded = std::round(size);
        if (rounded != size) throw ParameterError("square filter bandwidth must be an integer");
        check_bandwidth(static_cast<int>(rounded), side, "square filter bandwidth");
    } else {
        if (!(size > 0.0) || size > static_cast<double>(side) / 2.0) {
            throw ParameterError("circular filter radius must lie in (0, " +
                                 std::to_string(side / 2) + "], got " + std::to_string(size));
        }
    }
}

double filter_weight(const FilterSpec& filter, int u, int v, std::size_t height, std::size_t width) {
    double low = 0.0;
    if (filter.shape == FilterShape::circular) {
        low = (static_cast<double>(u) * u + static_cast<double>(v) * v <= filter.size * filter.size)
                  ? 1.0
                  : 0.0;
    } else {
        const int half = static_cast<int>(filter.size) / 2;
        auto in_band = [half](int a, int b) { return a >= -half && a < half && b >= -half && b < half; };
        // Real-part closure: average the band with its conjugate reflection on the grid.
        const int ru = wrap_index(-u, height);
        const int rv = wrap_index(-v, width);
        low = 0.5 * ((in_band(u, v) ? 1.0 : 0.0) + (in_band(ru, rv) ? 1.0 : 0.0));
    }
    return filter.mode == FilterMode::low_pass ? low : 1.0 - low;
}

Spectrum dft2_plane(std::span<const double> plane, std::size_t height, std::size_t width) {
    Spectrum spectrum(height, width);
    std::vector<cplx> buf(plane.begin(), plane.end());
    fft2_standard(buf, height, width, false);
    for (std::size_t r = 0; r < height; ++r) {
        for (std::size_t c = 0; c < width; ++c) {
            spectrum.at(wrap_index(static_cast<int>(r), height), wrap_index(static_cast<int>(c), width)) =
                buf[r * width + c];
        }
    }
    return spectrum;
}

std::vector<Spectrum> dft2(const ImageD& image) {
    std::vector<Spectrum> out;
    out.reserve(image.channels());
    for (std::size_t c = 0; c < image.channels(); ++c) {
        out.push_back(dft2_plane(image.plane(c), image.height(), image.width()));
    }
    return out;
}

namespace {

std::vector<double> inverse_plane(const Spectrum& spectrum, double& imag_energy) {
    const std::size_t h = spectrum.height();
    const std::size_t w = spectrum.width();
    std::vector<cplx> buf(h * w);
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            buf[r * w + c] = spectrum.at(wrap_index(static_cast<int>(r), h), wrap_index(static_cast<int>(c), w));
        }
    }
    fft2_standard(buf, h, w, true);
    const double scale = 1.0 / static_cast<double>(h * w);
    std::vector<double> real(h * w);
    for (std::size_t i = 0; i < buf.size(); ++i) {
        real[i] = buf[i].real() * scale;
        const double im = buf[i].imag() * scale;
        imag_energy += im * im;
    }
    return real;
}

}  // namespace

ImageD idft2(const Spectrum& spectrum, double* imag_energy) {
    double residual = 0.0;
    auto plane = inverse_plane(spectrum, residual);
    if (imag_energy) *imag_energy = residual;
    return ImageD(1, spectrum.height(), spectrum.width(), std::move(plane));
}

ImageD idft2(const std::vector<Spectrum>& spectra, double* imag_energy) {
    if (spectra.empty()) throw SizeError("idft2 needs at least one spectrum");
    const std::size_t h = spectra.front().height();
    const std::size_t w = spectra.front().width();
    ImageD out(spectra.size(), h, w);
    double residual = 0.0;
    for (std::size_t c = 0; c < spectra.size(); ++c) {
        if (spectra[c].height() != h || spectra[c].width() != w) {
            throw SizeError("idft2: channel spectra differ in size");
        }
        auto plane = inverse_plane(spectra[c], residual);
        std::copy(plane.begin(), plane.end(), out.plane(c).begin());
    }
    if (imag_energy) *imag_energy = residual;
    return out;
}

void symmetrize_nyquist(Spectrum& spectrum) {
    const Spectrum source = spectrum;
    const int umin = spectrum.u_min();
    const int vmin = spectrum.v_min();
    auto mirror = [&](int u, int v) { return std::conj(source.at(spectrum.wrap_u(-u), spectrum.wrap_v(-v))); };
    for (int v = vmin; v <= spectrum.v_max(); ++v) {
        spectrum.at(umin, v) = 0.5 * (source.at(umin, v) + mirror(umin, v));
    }
    for (int u = umin; u <= spectrum.u_max(); ++u) {
        spectrum.at(u, vmin) = 0.5 * (source.at(u, vmin) + mirror(u, vmin));
    }
}

Spectrum crop_spectrum(const Spectrum& spectrum, int band_h, int band_w, NyquistMode nyquist) {
    check_bandwidth(band_h, spectrum.height(), "crop bandwidth");
    check_bandwidth(band_w, spectrum.width(), "crop bandwidth");
    Spectrum out(static_cast<std::size_t>(band_h), static_cast<std::size_t>(band_w));
    const double scale = static_cast<double>(band_h) * band_w /
                         (static_cast<double>(spectrum.height()) * spectrum.width());
    for (int u = out.u_min(); u <= out.u_max(); ++u) {
        for (int v = out.v_min(); v <= out.v_max(); ++v) out.at(u, v) = scale * spectrum.at(u, v);
    }
    if (nyquist == NyquistMode::symmetrize) symmetrize_nyquist(out);
    return out;
}

Spectrum crop_spectrum(const Spectrum& spectrum, int bandwidth, NyquistMode nyquist) {
    return crop_spectrum(spectrum, bandwidth, bandwidth, nyquist);
}

ImageD low_freq_crop(const ImageD& image, int bandwidth) {
    check_bandwidth(bandwidth, std::min(image.height(), image.width()), "crop bandwidth");
    if (static_cast<std::size_t>(bandwidth) == image.height() &&
        static_cast<std::size_t>(bandwidth) == image.width()) {
        return image;
    }
    std::vector<Spectrum> cropped;
    cropped.reserve(image.channels());
    for (const auto& s : dft2(image)) cropped.push_back(crop_spectrum(s, bandwidth));
    return idft2(cropped);
}

ImageD apply_filter(const ImageD& image, const FilterSpec& filter) {
    filter.validate(image.height(), image.width());
    std::vector<Spectrum> spectra = dft2(image);
    for (auto& s : spectra) {
        for (int u = s.u_min(); u <= s.u_max(); ++u) {
            for (int v = s.v_min(); v <= s.v_max(); ++v) {
                s.at(u, v) *= filter_weight(filter, u, v, image.height(), image.width());
            }
        }
    }
    return idft2(spectra);
}

}  // namespace fcl::spectral
