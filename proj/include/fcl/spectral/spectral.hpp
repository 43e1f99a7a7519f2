// SPDX-License-Identifier: Apache-2.0
//
// Frequency-domain image machinery: centered 2-D DFT, low-frequency
// cropping, circular/square filters, pixel-space down-sampling and the
// two-step (filter then decimate) low-frequency down-sampling path.
//
// Conventions
//   * spatial index x in [0, H), frequency index u in [-H/2, H/2); the
//     spectrum is stored with u = -H/2 in row 0 (zero frequency at H/2).
//   * forward DFT unnormalized, inverse carries 1/(H*W).
//   * all operations act per channel and never clamp pixel values.
#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <functional>
#include <variant>
#include <vector>

#include "fcl/image.hpp"
#include "fcl/spectral/fft.hpp"

namespace fcl::spectral {

/// Complex frequency map of one channel in centered layout.
class Spectrum {
public:
    Spectrum() = default;
    Spectrum(std::size_t height, std::size_t width);

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }

    int u_min() const noexcept { return -static_cast<int>(height_ / 2); }
    int u_max() const noexcept { return static_cast<int>(height_ / 2) - 1; }
    int v_min() const noexcept { return -static_cast<int>(width_ / 2); }
    int v_max() const noexcept { return static_cast<int>(width_ / 2) - 1; }

    cplx& at(int u, int v) { return data_[index(u, v)]; }
    const cplx& at(int u, int v) const { return data_[index(u, v)]; }

    /// Wraps a signed frequency onto this grid's row range.
    int wrap_u(int u) const noexcept;
    int wrap_v(int v) const noexcept;

    std::vector<cplx>& data() noexcept { return data_; }
    const std::vector<cplx>& data() const noexcept { return data_; }

    double energy() const noexcept;

private:
    std::size_t index(int u, int v) const noexcept {
        return static_cast<std::size_t>(u + static_cast<int>(height_ / 2)) * width_ +
               static_cast<std::size_t>(v + static_cast<int>(width_ / 2));
    }

    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<cplx> data_;
};

enum class FilterShape { square, circular };
enum class FilterMode { low_pass, high_pass };

/// Square filters are parameterized by an even bandwidth B in bins, circular
/// filters by a radius r in bins.
struct FilterSpec {
    FilterShape shape = FilterShape::square;
    FilterMode mode = FilterMode::low_pass;
    double size = 0.0;

    static FilterSpec square(int bandwidth, FilterMode mode = FilterMode::low_pass) {
        return {FilterShape::square, mode, static_cast<double>(bandwidth)};
    }
    static FilterSpec circular(double radius, FilterMode mode = FilterMode::low_pass) {
        return {FilterShape::circular, mode, radius};
    }

    /// Throws ParameterError unless valid for an H x W image.
    void validate(std::size_t height, std::size_t width) const;
};

/// Pass weight of bin (u, v). Circular masks are binary. Square low-pass uses
/// the real-part closure of the band [-B/2, B/2-1]^2: interior bins weigh 1,
/// the unmirrored +-B/2 edges 1/2. High-pass is 1 - low-pass.
double filter_weight(const FilterSpec& filter, int u, int v, std::size_t height, std::size_t width);

enum class NyquistMode {
    symmetrize,  ///< -B/2 row/column averaged with its conjugate reflection
    raw,         ///< plain scaled copy of the central block
};

// ---------------------------------------------------------------------------
// Transforms

std::vector<Spectrum> dft2(const ImageD& image);
Spectrum dft2_plane(std::span<const double> plane, std::size_t height, std::size_t width);

/// Single-channel inverse. Returns the real part; the discarded imaginary
/// energy (sum of squares) is written to `imag_energy` when given.
ImageD idft2(const Spectrum& spectrum, double* imag_energy = nullptr);

/// Stacks per-channel inverses into one image.
ImageD idft2(const std::vector<Spectrum>& spectra, double* imag_energy = nullptr);

Spectrum crop_spectrum(const Spectrum& spectrum, int bandwidth,
                       NyquistMode nyquist = NyquistMode::symmetrize);
Spectrum crop_spectrum(const Spectrum& spectrum, int band_h, int band_w,
                       NyquistMode nyquist = NyquistMode::symmetrize);

/// In-place conjugate averaging of the -H/2 row and -W/2 column.
void symmetrize_nyquist(Spectrum& spectrum);

/// idft2 . crop_spectrum . dft2 per channel; output is C x B x B.
ImageD low_freq_crop(const ImageD& image, int bandwidth);

ImageD apply_filter(const ImageD& image, const FilterSpec& filter);

// ---------------------------------------------------------------------------
// Pixel-space resampling

enum class DownsampleMethod { nearest, bilinear, box };

/// Integer ratios use a k x k constant kernel per output pixel:
///   nearest  - top-left sample of the block
///   box      - uniform block mean
///   bilinear - align_corners=false bilinear weights
/// Non-integer ratios up-sample by m (nearest replication) and then reduce
/// by an integer k with out/in = m/k.
ImageD downsample(const ImageD& image, std::size_t out_side, DownsampleMethod method);

/// Keeps every k-th sample starting at index 0 on both axes.
ImageD decimate(const ImageD& image, std::size_t k_rows, std::size_t k_cols);

/// Nearest-neighbour replication by an integer factor.
ImageD upsample_nearest(const ImageD& image, std::size_t factor);

struct ExactPath {};
struct WindowedSincPath {
    int lobes = 3;
};
using LowFreqPath = std::variant<ExactPath, WindowedSincPath>;

/// Two-step low-frequency down-sampling. ExactPath filters with the square
/// low-pass B and decimates by H/B (integer ratios only). WindowedSincPath
/// resamples each axis with a Lanczos kernel stretched by H/B, sampling at
/// the same positions (x' * H/B) with reflect-101 borders.
ImageD efficient_lowfreq_downsample(const ImageD& image, int bandwidth, const LowFreqPath& path);

/// One axis of the windowed-sinc resampler; exposed for the pipeline's float path.
std::vector<double> lanczos_weights(std::size_t in_size, std::size_t out_size, int lobes,
                                    std::vector<int>& tap_index, std::size_t& taps_per_output);

// ---------------------------------------------------------------------------
// Kernels

/// Spatial kernel of the square low-pass filter:
///   k(x, y) = 1/(H W) * sum_{u,v in [-B/2, B/2-1]} cos(2 pi (u x / H + v y / W))
/// indexed by offset (x, y) in [0, H) x [0, W), i.e. circularly wrapped.
ImageD lowpass_kernel(std::size_t height, std::size_t width, int bandwidth);

/// out[x, y] = sum_{s,t} kernel[(x - s) mod H, (y - t) mod W] * image[s, t], per channel.
ImageD circular_convolve(const ImageD& image, const ImageD& kernel);

/// sin(2 pi g x) sin(2 pi g y) / (4 pi^2 g^2 x y), with the removable zeros
/// at x = 0 or y = 0 filled by their limits (so sinc2d(g, 0, 0) = 1).
double sinc2d(double gamma, double x, double y);

// ---------------------------------------------------------------------------
// Linear-operator probing

/// Complex coefficients alpha(u, v, u', v') mapping input spectrum bins to
/// output spectrum bins of a linear image operator. Columns are stored
/// contiguously.
class FreqDependencyMatrix {
public:
    FreqDependencyMatrix(std::size_t in_h, std::size_t in_w, std::size_t out_h, std::size_t out_w);

    std::size_t in_height() const noexcept { return in_h_; }
    std::size_t in_width() const noexcept { return in_w_; }
    std::size_t out_height() const noexcept { return out_h_; }
    std::size_t out_width() const noexcept { return out_w_; }
    std::size_t rows() const noexcept { return out_h_ * out_w_; }
    std::size_t cols() const noexcept { return in_h_ * in_w_; }

    cplx& at(int u, int v, int u_in, int v_in);
    const cplx& at(int u, int v, int u_in, int v_in) const;

    std::span<cplx> column(int u_in, int v_in);
    std::span<const cplx> column(int u_in, int v_in) const;

    double column_norm(int u_in, int v_in) const;

private:
    std::size_t col_index(int u_in, int v_in) const;
    std::size_t row_index(int u, int v) const;

    std::size_t in_h_, in_w_, out_h_, out_w_;
    std::vector<cplx> data_;
};

using ImageOperator = std::function<ImageD(const ImageD&)>;

struct LinearizeOptions {
    int additivity_checks = 3;
    std::uint64_t seed = 7;
    double tolerance = 1e-9;
};

/// Probes `op` with the real and imaginary parts of every frequency basis
/// image on an H x W single-channel grid. Throws OracleError if the
/// additivity/homogeneity spot checks fail.
FreqDependencyMatrix linearize(const ImageOperator& op, std::size_t height, std::size_t width,
                               const LinearizeOptions& options = {});

}  // namespace fcl::spectral
