// SPDX-License-Identifier: Apache-2.0
#include "fcl/model/network.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fcl/error.hpp"
#include "fcl/model/digest.hpp"
#include "fcl/rng.hpp"

namespace fcl::model {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapM = Eigen::Map<const RowMat<T>>;
template <typename T>
using Arr = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
template <typename T>
using CArr = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;

constexpr double kNormEps = 1e-5;

// Fixed-order sum over 16 interleaved lanes. Eigen's reductions peel the
// unaligned head, so their summation order (and the rounding) would depend on
// buffer addresses; runs must be bitwise reproducible.
template <typename T, typename F>
T lane_sum(std::size_t m, F&& term) {
    constexpr std::size_t kLanes = 16;
    T acc[kLanes] = {};
    std::size_t q = 0;
    for (; q + kLanes <= m; q += kLanes)
        for (std::size_t j = 0; j < kLanes; ++j) acc[j] += term(q + j);
    for (std::size_t j = 0; q < m; ++q, ++j) acc[j] += term(q);
    for (std::size_t w = kLanes / 2; w > 0; w /= 2)
        for (std::size_t j = 0; j < w; ++j) acc[j] += acc[j + w];
    return acc[0];
}

// Normal draw truncated to two standard deviations (rejection).
double truncated_normal(Rng& rng, double std) {
    for (;;) {
        const double u1 = std::max(uniform01(rng), 1e-300), u2 = uniform01(rng);
        const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2 * std::numbers::pi * u2);
        if (std::abs(z) <= 2.0) return z * std;
    }
}

std::string activation_name(Activation a) { return a == Activation::relu ? "relu" : "identity"; }

}  // namespace

// ---------------------------------------------------------------- spec

void NetworkSpec::validate() const {
    if (in_channels == 0) throw SpecError("network needs at least one input channel");
    if (classes < 2) throw SpecError("network needs at least two classes");
    if (kernel == 0 || kernel % 2 == 0) throw SpecError("kernel size must be odd");
    if (!widths.empty() && convs_per_stage == 0) throw SpecError("stages need at least one convolution");
    for (std::size_t w : widths) {
        if (w == 0) throw SpecError("stage width must be positive");
        if (groups > 0 && w % groups != 0) {
            throw SpecError("stage width " + std::to_string(w) + " is not divisible by " + std::to_string(groups) +
                            " normalization groups");
        }
    }
    if (mean.size() != in_channels || stddev.size() != in_channels) {
        throw SpecError("normalization constants must have one entry per input channel");
    }
    for (double s : stddev)
        if (!(s > 0.0)) throw SpecError("normalization std must be positive");
    if (!(init_std > 0.0)) throw SpecError("init std must be positive");
}

NetworkSpec desk_spec(std::size_t classes, std::size_t in_channels) {
    NetworkSpec s;
    s.classes = classes;
    s.in_channels = in_channels;
    s.mean.assign(in_channels, 0.5);
    s.stddev.assign(in_channels, 0.25);
    s.validate();
    return s;
}

nlohmann::json to_json(const NetworkSpec& s) {
    return {{"name", s.name},         {"in_channels", s.in_channels},
            {"widths", s.widths},     {"convs_per_stage", s.convs_per_stage},
            {"kernel", s.kernel},     {"groups", s.groups},
            {"activation", activation_name(s.activation)},
            {"classes", s.classes},   {"mean", s.mean},
            {"stddev", s.stddev},     {"init_std", s.init_std}};
}

NetworkSpec spec_from_json(const nlohmann::json& j) {
    NetworkSpec s;
    try {
        s.name = j.value("name", s.name);
        s.in_channels = j.value("in_channels", s.in_channels);
        s.widths = j.value("widths", s.widths);
        s.convs_per_stage = j.value("convs_per_stage", s.convs_per_stage);
        s.kernel = j.value("kernel", s.kernel);
        s.groups = j.value("groups", s.groups);
        const std::string act = j.value("activation", std::string("relu"));
        if (act == "relu") {
            s.activation = Activation::relu;
        } else if (act == "identity") {
            s.activation = Activation::identity;
        } else {
            throw SpecError("unknown activation '" + act + "'");
        }
        s.classes = j.value("classes", s.classes);
        s.mean = j.value("mean", std::vector<double>(s.in_channels, 0.5));
        s.stddev = j.value("stddev", std::vector<double>(s.in_channels, 0.25));
        s.init_std = j.value("init_std", s.init_std);
    } catch (const nlohmann::json::exception& e) {
        throw SpecError(std::string("malformed network spec: ") + e.what());
    }
    s.validate();
    return s;
}

std::string spec_hash(const NetworkSpec& spec) {
    const std::string text = to_json(spec).dump();
    return Sha256().update(text.data(), text.size()).finish_hex();
}

std::vector<LayerCost> flops_breakdown(const NetworkSpec& spec, std::size_t side) {
    spec.validate();
    if (side < 8 || side % 2) throw ParameterError("input side must be even and at least 8, got " + std::to_string(side));
    std::vector<LayerCost> out;
    std::size_t c = spec.in_channels, s = side;
    const double k2 = static_cast<double>(spec.kernel * spec.kernel);
    for (std::size_t st = 0; st < spec.widths.size(); ++st) {
        for (std::size_t j = 0; j < spec.convs_per_stage; ++j) {
            const std::size_t stride = (st > 0 && j == 0) ? 2 : 1;
            s = conv_out(s, stride);
            const std::size_t w = spec.widths[st];
            out.push_back({"conv" + std::to_string(st + 1) + "." + std::to_string(j + 1),
                           static_cast<double>(c) * w * k2 * static_cast<double>(s * s)});
            c = w;
        }
    }
    out.push_back({"head", static_cast<double>(c * spec.classes)});
    return out;
}

double flops(const NetworkSpec& spec, std::size_t side) {
    double total = 0.0;
    for (const auto& l : flops_breakdown(spec, side)) total += l.macs;
    return total;
}

std::size_t parameter_count(const NetworkSpec& spec) {
    spec.validate();
    std::size_t total = 0, c = spec.in_channels;
    for (std::size_t w : spec.widths) {
        for (std::size_t j = 0; j < spec.convs_per_stage; ++j) {
            total += c * w * spec.kernel * spec.kernel;
            total += spec.groups > 0 ? 2 * w : w;  // GroupNorm affine, or conv bias
            c = w;
        }
    }
    return total + c * spec.classes + spec.classes;
}

// ---------------------------------------------------------------- network

template <typename T>
Network<T>::Network(NetworkSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    spec_.validate();
    std::size_t off = 0, c = spec_.in_channels;
    const std::size_t k2 = spec_.kernel * spec_.kernel;
    auto add = [&](std::string name, std::size_t n, bool decay) {
        blocks_.push_back({std::move(name), off, n, decay});
        off += n;
    };
    for (std::size_t st = 0; st < spec_.widths.size(); ++st) {
        for (std::size_t j = 0; j < spec_.convs_per_stage; ++j) {
            const std::string tag = std::to_string(st + 1) + "." + std::to_string(j + 1);
            const std::size_t w = spec_.widths[st];
            add("conv" + tag + ".weight", c * w * k2, true);
            if (spec_.groups > 0) {
                add("norm" + tag + ".gamma", w, false);
                add("norm" + tag + ".beta", w, false);
            } else {
                add("conv" + tag + ".bias", w, false);
            }
            c = w;
        }
    }
    add("head.weight", c * spec_.classes, true);
    add("head.bias", spec_.classes, false);

    params_.assign(off, T{0});
    Rng rng(derive_seed(seed, {0x696e6974ULL}));  // "init"
    for (const auto& b : blocks_) {
        const bool gamma = b.name.ends_with(".gamma");
        for (std::size_t i = 0; i < b.size; ++i) {
            params_[b.offset + i] = b.decay ? static_cast<T>(truncated_normal(rng, spec_.init_std)) : T(gamma ? 1 : 0);
        }
    }
    build();
}

template <typename T>
void Network<T>::assign(NetworkSpec spec, std::vector<ParamBlock> blocks, std::vector<T> params) {
    spec_ = std::move(spec);
    blocks_ = std::move(blocks);
    params_ = std::move(params);
    if (params_.size() != parameter_count(spec_)) throw SpecError("parameter vector does not match the network spec");
    build();
}

template <typename T>
void Network<T>::build() {
    layers_.clear();
    grads_.assign(params_.size(), T{0});
    layers_.push_back({Layer::normalize});
    std::size_t bi = 0, c = spec_.in_channels;
    for (std::size_t st = 0; st < spec_.widths.size(); ++st) {
        for (std::size_t j = 0; j < spec_.convs_per_stage; ++j) {
            const std::size_t w = spec_.widths[st];
            Layer conv{Layer::conv, c, w, (st > 0 && j == 0) ? std::size_t{2} : std::size_t{1}};
            conv.w = blocks_[bi++].offset;
            if (spec_.groups > 0) {
                layers_.push_back(conv);
                Layer gn{Layer::groupnorm, w, w};
                gn.w = blocks_[bi++].offset;
                gn.b = blocks_[bi++].offset;
                layers_.push_back(gn);
            } else {
                conv.b = blocks_[bi++].offset;
                layers_.push_back(conv);
            }
            if (spec_.activation == Activation::relu) layers_.push_back({Layer::relu, w, w});
            c = w;
        }
    }
    layers_.push_back({Layer::pool, c, c});
    Layer head{Layer::linear, c, spec_.classes};
    head.w = blocks_[bi++].offset;
    head.b = blocks_[bi++].offset;
    layers_.push_back(head);
}

namespace {

// Output columns [lo, hi) whose input column ox*stride + kx - pad is inside the image.
inline void valid_range(std::ptrdiff_t kx, std::ptrdiff_t pad, std::size_t stride, std::size_t side, std::size_t oside,
                        std::size_t& lo, std::size_t& hi) {
    const auto st = static_cast<std::ptrdiff_t>(stride);
    const std::ptrdiff_t first = pad - kx;  // smallest ox*stride allowed
    const std::ptrdiff_t l = first <= 0 ? 0 : (first + st - 1) / st;
    const std::ptrdiff_t last = static_cast<std::ptrdiff_t>(side) - 1 + pad - kx;
    const std::ptrdiff_t h = last < 0 ? 0 : last / st + 1;
    lo = static_cast<std::size_t>(std::min<std::ptrdiff_t>(l, static_cast<std::ptrdiff_t>(oside)));
    hi = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(h, static_cast<std::ptrdiff_t>(lo), static_cast<std::ptrdiff_t>(oside)));
}

template <typename T>
void im2col(const T* x, std::size_t c, std::size_t side, std::size_t k, std::size_t stride, std::size_t oside, T* col) {
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
    const std::size_t p = oside * oside;
    const auto s = static_cast<std::ptrdiff_t>(side);
    for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx) {
                T* row = col + ((ci * k + ky) * k + kx) * p;
                const T* plane = x + ci * side * side;
                std::size_t lo, hi;
                valid_range(static_cast<std::ptrdiff_t>(kx), pad, stride, side, oside, lo, hi);
                const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(kx) - pad;
                for (std::size_t oy = 0; oy < oside; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - pad;
                    T* r = row + oy * oside;
                    if (iy < 0 || iy >= s) {
                        std::fill(r, r + oside, T{0});
                        continue;
                    }
                    const T* src = plane + iy * s + shift;
                    std::fill(r, r + lo, T{0});
                    if (stride == 1) {
                        std::copy(src + lo, src + hi, r + lo);
                    } else {
                        for (std::size_t ox = lo; ox < hi; ++ox) r[ox] = src[ox * stride];
                    }
                    std::fill(r + hi, r + oside, T{0});
                }
            }
}

template <typename T>
void col2im(const T* col, std::size_t c, std::size_t side, std::size_t k, std::size_t stride, std::size_t oside, T* dx) {
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
    const std::size_t p = oside * oside;
    const auto s = static_cast<std::ptrdiff_t>(side);
    for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx) {
                const T* row = col + ((ci * k + ky) * k + kx) * p;
                T* plane = dx + ci * side * side;
                std::size_t lo, hi;
                valid_range(static_cast<std::ptrdiff_t>(kx), pad, stride, side, oside, lo, hi);
                const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(kx) - pad;
                for (std::size_t oy = 0; oy < oside; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - pad;
                    if (iy < 0 || iy >= s) continue;
                    const T* r = row + oy * oside;
                    T* dst = plane + iy * s + shift;
                    if (stride == 1) {
                        for (std::size_t ox = lo; ox < hi; ++ox) dst[ox] += r[ox];
                    } else {
                        for (std::size_t ox = lo; ox < hi; ++ox) dst[ox * stride] += r[ox];
                    }
                }
            }
}

}  // namespace

template <typename T>
std::vector<T> Network<T>::forward(const T* inputs, std::size_t n, std::size_t side, bool keep) {
    if (!keep) return run(inputs, n, side, nullptr, nullptr);
    acts_.assign(layers_.size(), {});
    aux_.assign(layers_.size(), {});
    auto out = run(inputs, n, side, &acts_, &aux_);
    n_ = n;
    side_ = side;
    return out;
}

template <typename T>
std::vector<T> Network<T>::run(const T* inputs, std::size_t n, std::size_t side, std::vector<std::vector<T>>* acts,
                               std::vector<std::vector<T>>* aux) const {
    if (side < 8 || side % 2) throw SpecError("input side must be even and at least 8, got " + std::to_string(side));
    if (n == 0) throw SpecError("empty input batch");
    const bool keep = acts != nullptr;
    const std::size_t k = spec_.kernel, k2 = k * k;
    std::vector<T> cur(inputs, inputs + n * spec_.in_channels * side * side);
    std::size_t c = spec_.in_channels, s = side;
    std::vector<T> col;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
        const Layer& L = layers_[li];
        std::vector<T> next;
        switch (L.kind) {
            case Layer::normalize: {
                next.resize(cur.size());
                const std::size_t plane = s * s;
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t ci = 0; ci < c; ++ci) {
                        const T m = static_cast<T>(spec_.mean[ci]);
                        const T inv = static_cast<T>(1.0 / spec_.stddev[ci]);
                        const T* src = cur.data() + (i * c + ci) * plane;
                        T* dst = next.data() + (i * c + ci) * plane;
                        for (std::size_t q = 0; q < plane; ++q) dst[q] = (src[q] - m) * inv;
                    }
                break;
            }
            case Layer::conv: {
                const std::size_t os = conv_out(s, L.stride), p = os * os, kk = L.cin * k2;
                next.assign(n * L.cout * p, T{0});
                col.resize(kk * p);
                CMapM<T> W(params_.data() + L.w, L.cout, kk);
                for (std::size_t i = 0; i < n; ++i) {
                    im2col(cur.data() + i * L.cin * s * s, L.cin, s, k, L.stride, os, col.data());
                    MapM<T> out(next.data() + i * L.cout * p, L.cout, p);
                    out.noalias() = W * CMapM<T>(col.data(), kk, p);
                    if (L.b != SIZE_MAX)
                        for (std::size_t o = 0; o < L.cout; ++o) out.row(o).array() += params_[L.b + o];
                }
                s = os;
                c = L.cout;
                break;
            }
            case Layer::groupnorm: {
                const std::size_t g = spec_.groups, cg = c / g, plane = s * s, m = cg * plane;
                next.resize(cur.size());
                std::vector<T> stats(n * g * 2);
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t gi = 0; gi < g; ++gi) {
                        const T* x = cur.data() + (i * c + gi * cg) * plane;
                        const T mu = lane_sum<T>(m, [x](std::size_t q) { return x[q]; }) / static_cast<T>(m);
                        const T var = lane_sum<T>(m, [x, mu](std::size_t q) { return (x[q] - mu) * (x[q] - mu); }) /
                                      static_cast<T>(m);
                        const T inv = T{1} / std::sqrt(var + static_cast<T>(kNormEps));
                        stats[(i * g + gi) * 2] = mu;
                        stats[(i * g + gi) * 2 + 1] = inv;
                        T* y = next.data() + (i * c + gi * cg) * plane;
                        for (std::size_t cc = 0; cc < cg; ++cc) {
                            const T ga = params_[L.w + gi * cg + cc] * inv, be = params_[L.b + gi * cg + cc];
                            Arr<T>(y + cc * plane, static_cast<Eigen::Index>(plane)) =
                                (CArr<T>(x + cc * plane, static_cast<Eigen::Index>(plane)) - mu) * ga + be;
                        }
                    }
                if (keep) (*aux)[li] = std::move(stats);
                break;
            }
            case Layer::relu: {
                next.resize(cur.size());
                for (std::size_t q = 0; q < cur.size(); ++q) next[q] = cur[q] > T{0} ? cur[q] : T{0};
                break;
            }
            case Layer::pool: {
                const std::size_t plane = s * s;
                next.resize(n * c);
                for (std::size_t i = 0; i < n * c; ++i) {
                    T acc{0};
                    const T* x = cur.data() + i * plane;
                    for (std::size_t q = 0; q < plane; ++q) acc += x[q];
                    next[i] = acc / static_cast<T>(plane);
                }
                s = 1;
                break;
            }
            case Layer::linear: {
                next.resize(n * L.cout);
                CMapM<T> W(params_.data() + L.w, L.cout, L.cin);
                MapM<T> out(next.data(), n, L.cout);
                out.noalias() = CMapM<T>(cur.data(), n, L.cin) * W.transpose();
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t o = 0; o < L.cout; ++o) out(i, o) += params_[L.b + o];
                c = L.cout;
                break;
            }
        }
        if (keep) (*acts)[li] = std::move(cur);
        cur = std::move(next);
    }
    return cur;
}

template <typename T>
std::vector<bool> Network<T>::relu_pattern(const T* inputs, std::size_t n, std::size_t side) const {
    std::vector<std::vector<T>> acts(layers_.size()), aux(layers_.size());
    run(inputs, n, side, &acts, &aux);
    std::vector<bool> out;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
        if (layers_[li].kind != Layer::relu) continue;
        for (T v : acts[li]) out.push_back(v > T{0});
    }
    return out;
}

template <typename T>
void Network<T>::backward(const std::vector<T>& dlogits) {
    if (acts_.empty()) throw Error("backward without a kept forward pass");
    const std::size_t n = n_, k = spec_.kernel, k2 = k * k;
    if (dlogits.size() != n * spec_.classes) throw SizeError("logit gradient has the wrong size");
    std::fill(grads_.begin(), grads_.end(), T{0});

    // spatial side at the input of every layer
    std::vector<std::size_t> sides(layers_.size());
    {
        std::size_t s = side_;
        for (std::size_t li = 0; li < layers_.size(); ++li) {
            sides[li] = s;
            if (layers_[li].kind == Layer::conv) s = conv_out(s, layers_[li].stride);
            if (layers_[li].kind == Layer::pool) s = 1;
        }
    }

    std::vector<T> dy = dlogits, col, dcol;
    for (std::size_t li = layers_.size(); li-- > 1;) {  // the input normalization needs no gradient
        const Layer& L = layers_[li];
        const std::vector<T>& x = acts_[li];
        const std::size_t s = sides[li];
        std::vector<T> dx;
        switch (L.kind) {
            case Layer::normalize:
                break;
            case Layer::conv: {
                const std::size_t os = conv_out(s, L.stride), p = os * os, kk = L.cin * k2;
                const bool need_dx = li > 1;
                col.resize(kk * p);
                if (need_dx) {
                    dx.assign(x.size(), T{0});
                    dcol.resize(kk * p);
                }
                CMapM<T> W(params_.data() + L.w, L.cout, kk);
                MapM<T> dW(grads_.data() + L.w, L.cout, kk);
                for (std::size_t i = 0; i < n; ++i) {
                    im2col(x.data() + i * L.cin * s * s, L.cin, s, k, L.stride, os, col.data());
                    CMapM<T> g(dy.data() + i * L.cout * p, L.cout, p);
                    dW.noalias() += g * CMapM<T>(col.data(), kk, p).transpose();
                    if (L.b != SIZE_MAX)
                        for (std::size_t o = 0; o < L.cout; ++o) {
                            const T* gp = dy.data() + (i * L.cout + o) * p;
                            grads_[L.b + o] += lane_sum<T>(p, [gp](std::size_t q) { return gp[q]; });
                        }
                    if (need_dx) {
                        MapM<T>(dcol.data(), kk, p).noalias() = W.transpose() * g;
                        col2im(dcol.data(), L.cin, s, k, L.stride, os, dx.data() + i * L.cin * s * s);
                    }
                }
                break;
            }
            case Layer::groupnorm: {
                const std::size_t c = L.cin, g = spec_.groups, cg = c / g, plane = s * s, m = cg * plane;
                const std::vector<T>& stats = aux_[li];
                dx.resize(x.size());
                std::vector<T> dxhat(m), xhat(m);
                const auto P = static_cast<Eigen::Index>(plane);
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t gi = 0; gi < g; ++gi) {
                        const T mu = stats[(i * g + gi) * 2], inv = stats[(i * g + gi) * 2 + 1];
                        const std::size_t base = (i * c + gi * cg) * plane;
                        for (std::size_t cc = 0; cc < cg; ++cc) {
                            const std::size_t ch = gi * cg + cc, off = cc * plane;
                            const CArr<T> xs(x.data() + base + off, P), d(dy.data() + base + off, P);
                            Arr<T> xh(xhat.data() + off, P), dh(dxhat.data() + off, P);
                            xh = (xs - mu) * inv;
                            dh = d * params_[L.w + ch];
                            const T* dp = dy.data() + base + off;
                            const T* hp = xhat.data() + off;
                            grads_[L.w + ch] += lane_sum<T>(plane, [dp, hp](std::size_t q) { return dp[q] * hp[q]; });
                            grads_[L.b + ch] += lane_sum<T>(plane, [dp](std::size_t q) { return dp[q]; });
                        }
                        const auto M = static_cast<Eigen::Index>(m);
                        const T* dp = dxhat.data();
                        const T* hp = xhat.data();
                        const T md = lane_sum<T>(m, [dp](std::size_t q) { return dp[q]; }) / static_cast<T>(m);
                        const T mdx = lane_sum<T>(m, [dp, hp](std::size_t q) { return dp[q] * hp[q]; }) / static_cast<T>(m);
                        const CArr<T> dh(dxhat.data(), M), xh(xhat.data(), M);
                        Arr<T>(dx.data() + base, M) = inv * (dh - md - xh * mdx);
                    }
                break;
            }
            case Layer::relu: {
                dx.resize(x.size());
                for (std::size_t q = 0; q < x.size(); ++q) dx[q] = x[q] > T{0} ? dy[q] : T{0};
                break;
            }
            case Layer::pool: {
                const std::size_t c = L.cin, plane = s * s;
                dx.resize(n * c * plane);
                const T scale = T{1} / static_cast<T>(plane);
                for (std::size_t i = 0; i < n * c; ++i) std::fill_n(dx.data() + i * plane, plane, dy[i] * scale);
                break;
            }
            case Layer::linear: {
                CMapM<T> X(x.data(), n, L.cin);
                CMapM<T> G(dy.data(), n, L.cout);
                MapM<T>(grads_.data() + L.w, L.cout, L.cin).noalias() += G.transpose() * X;
                for (std::size_t o = 0; o < L.cout; ++o) {
                    T acc{0};
                    for (std::size_t i = 0; i < n; ++i) acc += dy[i * L.cout + o];
                    grads_[L.b + o] += acc;
                }
                dx.resize(n * L.cin);
                MapM<T>(dx.data(), n, L.cin).noalias() = G * CMapM<T>(params_.data() + L.w, L.cout, L.cin);
                break;
            }
        }
        dy = std::move(dx);
    }
}

template <typename T>
T cross_entropy(const std::vector<T>& logits, std::size_t n, std::size_t classes, const int* labels, const float* soft,
                double smoothing, std::vector<T>* dlogits) {
    if (logits.size() != n * classes) throw SizeError("logits do not match batch and class count");
    if (!(smoothing >= 0.0 && smoothing < 1.0)) throw ParameterError("label smoothing must lie in [0, 1)");
    if (dlogits) dlogits->resize(logits.size());
    double total = 0.0;
    std::vector<double> p(classes), q(classes);
    for (std::size_t i = 0; i < n; ++i) {
        const T* z = logits.data() + i * classes;
        double zmax = z[0];
        for (std::size_t j = 1; j < classes; ++j) zmax = std::max<double>(zmax, z[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < classes; ++j) sum += std::exp(static_cast<double>(z[j]) - zmax);
        const double lse = zmax + std::log(sum);
        for (std::size_t j = 0; j < classes; ++j) {
            const double y = soft ? static_cast<double>(soft[i * classes + j]) : (labels[i] == static_cast<int>(j) ? 1.0 : 0.0);
            q[j] = (1.0 - smoothing) * y + smoothing / static_cast<double>(classes);
            p[j] = std::exp(static_cast<double>(z[j]) - lse);
            total -= q[j] * (static_cast<double>(z[j]) - lse);
        }
        if (dlogits)
            for (std::size_t j = 0; j < classes; ++j)
                (*dlogits)[i * classes + j] = static_cast<T>((p[j] - q[j]) / static_cast<double>(n));
    }
    return static_cast<T>(total / static_cast<double>(n));
}

template <typename T>
std::vector<int> argmax_rows(const std::vector<T>& logits, std::size_t n, std::size_t classes) {
    std::vector<int> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const T* z = logits.data() + i * classes;
        out[i] = static_cast<int>(std::max_element(z, z + classes) - z);
    }
    return out;
}

template class Network<float>;
template class Network<double>;
template float cross_entropy(const std::vector<float>&, std::size_t, std::size_t, const int*, const float*, double,
                             std::vector<float>*);
template double cross_entropy(const std::vector<double>&, std::size_t, std::size_t, const int*, const float*, double,
                              std::vector<double>*);
template std::vector<int> argmax_rows(const std::vector<float>&, std::size_t, std::size_t);
template std::vector<int> argmax_rows(const std::vector<double>&, std::size_t, std::size_t);

}  // namespace fcl::model
