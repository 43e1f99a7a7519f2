// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "fcl/error.hpp"
#include "fcl/spectral/spectral.hpp"

namespace fcl::spectral {

FreqDependencyMatrix::FreqDependencyMatrix(std::size_t in_h, std::size_t in_w, std::size_t out_h,
                                           std::size_t out_w)
    : in_h_(in_h), in_w_(in_w), out_h_(out_h), out_w_(out_w), data_(in_h * in_w * out_h * out_w) {
    if (in_h % 2 || in_w % 2 || out_h % 2 || out_w % 2 || !in_h || !in_w || !out_h || !out_w) {
        throw SizeError("dependency matrix grids must be positive and even");
    }
}

std::size_t FreqDependencyMatrix::col_index(int u_in, int v_in) const {
    return static_cast<std::size_t>(u_in + static_cast<int>(in_h_ / 2)) * in_w_ +
           static_cast<std::size_t>(v_in + static_cast<int>(in_w_ / 2));
}

std::size_t FreqDependencyMatrix::row_index(int u, int v) const {
    return static_cast<std::size_t>(u + static_cast<int>(out_h_ / 2)) * out_w_ +
           static_cast<std::size_t>(v + static_cast<int>(out_w_ / 2));
}

cplx& FreqDependencyMatrix::at(int u, int v, int u_in, int v_in) {
    return data_[col_index(u_in, v_in) * rows() + row_index(u, v)];
}

const cplx& FreqDependencyMatrix::at(int u, int v, int u_in, int v_in) const {
    return data_[col_index(u_in, v_in) * rows() + row_index(u, v)];
}

std::span<cplx> FreqDependencyMatrix::column(int u_in, int v_in) {
    return {data_.data() + col_index(u_in, v_in) * rows(), rows()};
}

std::span<const cplx> FreqDependencyMatrix::column(int u_in, int v_in) const {
    return {data_.data() + col_index(u_in, v_in) * rows(), rows()};
}

double FreqDependencyMatrix::column_norm(int u_in, int v_in) const {
    double total = 0.0;
    for (const auto& z : column(u_in, v_in)) total += std::norm(z);
    return std::sqrt(total);
}

namespace {

ImageD call_checked(const ImageOperator& op, const ImageD& input) {
    ImageD out = op(input);
    if (out.channels() != 1) throw OracleError("linearize: operator must map one channel to one channel");
    return out;
}

double max_abs_diff(const ImageD& a, const ImageD& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
    return worst;
}

double max_abs(const ImageD& a) {
    double worst = 0.0;
    for (double x : a.data()) worst = std::max(worst, std::abs(x));
    return worst;
}

void check_linearity(const ImageOperator& op, std::size_t height, std::size_t width,
                     const LinearizeOptions& options) {
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < options.additivity_checks; ++trial) {
        ImageD a(1, height, width);
        ImageD b(1, height, width);
        for (auto& x : a.data()) x = normal(rng);
        for (auto& x : b.data()) x = normal(rng);
        const double s = normal(rng);
        ImageD mix(1, height, width);
        for (std::size_t i = 0; i < mix.data().size(); ++i) mix.data()[i] = a.data()[i] + s * b.data()[i];

        const ImageD fa = call_checked(op, a);
        const ImageD fb = call_checked(op, b);
        const ImageD fm = call_checked(op, mix);
        if (!fa.same_shape(fb) || !fa.same_shape(fm)) throw OracleError("linearize: operator output shape varies");
        ImageD expect(1, fa.height(), fa.width());
        for (std::size_t i = 0; i < expect.data().size(); ++i) {
            expect.data()[i] = fa.data()[i] + s * fb.data()[i];
        }
        const double scale = std::max({1.0, max_abs(fa), max_abs(fb)});
        const double err = max_abs_diff(fm, expect);
        if (err > options.tolerance * scale) {
            throw OracleError("linearize: operator is not linear (trial " + std::to_string(trial) +
                              ", deviation " + std::to_string(err) + ")");
        }
    }
}

}  // namespace

FreqDependencyMatrix linearize(const ImageOperator& op, std::size_t height, std::size_t width,
                               const LinearizeOptions& options) {
    if (height == 0 || width == 0 || height % 2 || width % 2) {
        throw SizeError("linearize: grid must be positive and even");
    }
    check_linearity(op, height, width, options);

    const ImageD probe_out = call_checked(op, ImageD(1, height, width));
    FreqDependencyMatrix matrix(height, width, probe_out.height(), probe_out.width());
    const double inv_n = 1.0 / static_cast<double>(height * width);
    ImageD cos_img(1, height, width);
    ImageD sin_img(1, height, width);
    const int hh = static_cast<int>(height / 2);
    const int hw = static_cast<int>(width / 2);
    for (int u_in = -hh; u_in < hh; ++u_in) {
        for (int v_in = -hw; v_in < hw; ++v_in) {
            for (std::size_t x = 0; x < height; ++x) {
                for (std::size_t y = 0; y < width; ++y) {
                    const double a = 2.0 * std::numbers::pi *
                                     (static_cast<double>(u_in) * x / static_cast<double>(height) +
                                      static_cast<double>(v_in) * y / static_cast<double>(width));
                    cos_img(0, x, y) = std::cos(a);
                    sin_img(0, x, y) = std::sin(a);
                }
            }
            const ImageD rc = call_checked(op, cos_img);
            const ImageD rs = call_checked(op, sin_img);
            if (!rc.same_shape(probe_out) || !rs.same_shape(probe_out)) {
                throw OracleError("linearize: operator output shape varies");
            }
            const Spectrum sc = dft2_plane(rc.plane(0), rc.height(), rc.width());
            const Spectrum ss = dft2_plane(rs.plane(0), rs.height(), rs.width());
            auto col = matrix.column(u_in, v_in);
            for (std::size_t i = 0; i < col.size(); ++i) {
                col[i] = (sc.data()[i] + cplx(0.0, 1.0) * ss.data()[i]) * inv_n;
            }
        }
    }
    return matrix;
}

}  // namespace fcl::spectral
