// SPDX-License-Identifier: Apache-2.0
//
// Size-agnostic convolutional classifier: per-channel input normalization,
// stages of 3x3 convolutions (stride 2 on entry to every stage but the
// first), GroupNorm, ReLU, global average pooling and a linear head.
// Parameters and gradients live in one flat vector each.
#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

namespace fcl::model {

enum class Activation { relu, identity };

struct NetworkSpec {
    std::string name = "desk";
    std::size_t in_channels = 3;
    std::vector<std::size_t> widths{32, 64, 128};
    std::size_t convs_per_stage = 2;
    std::size_t kernel = 3;
    std::size_t groups = 8;  // GroupNorm groups per layer; 0 disables normalization (convs then carry a bias)
    Activation activation = Activation::relu;
    std::size_t classes = 10;
    std::vector<double> mean{0.5, 0.5, 0.5};
    std::vector<double> stddev{0.25, 0.25, 0.25};
    double init_std = 0.02;

    /// Throws SpecError on inconsistent layer arithmetic.
    void validate() const;
    bool operator==(const NetworkSpec&) const = default;
};

/// The desk network: widths 32/64/128, two convs per stage.
NetworkSpec desk_spec(std::size_t classes = 10, std::size_t in_channels = 3);

nlohmann::json to_json(const NetworkSpec& spec);
NetworkSpec spec_from_json(const nlohmann::json& j);
/// Hex SHA-256 of the canonical JSON form.
std::string spec_hash(const NetworkSpec& spec);

/// Output side of a stride-s "same" convolution.
inline std::size_t conv_out(std::size_t side, std::size_t stride) { return (side + stride - 1) / stride; }

struct LayerCost {
    std::string name;
    double macs = 0.0;
};

/// Multiply-accumulates per sample, per layer (convolutions and the head;
/// normalization, activation and pooling are not counted).
std::vector<LayerCost> flops_breakdown(const NetworkSpec& spec, std::size_t side);
double flops(const NetworkSpec& spec, std::size_t side);

/// Closed-form parameter count.
std::size_t parameter_count(const NetworkSpec& spec);

struct ParamBlock {
    std::string name;
    std::size_t offset = 0;
    std::size_t size = 0;
    bool decay = false;  // weight decay applies (conv and head weights only)
};

struct LayerOp {
    enum Kind { normalize, conv, groupnorm, relu, pool, linear } kind;
    std::size_t cin = 0, cout = 0, stride = 1;
    std::size_t w = 0, b = SIZE_MAX;  // parameter offsets
};

template <typename T>
class Network {
public:
    Network() = default;
    Network(NetworkSpec spec, std::uint64_t seed);

    const NetworkSpec& spec() const noexcept { return spec_; }
    std::vector<T>& params() noexcept { return params_; }
    const std::vector<T>& params() const noexcept { return params_; }
    std::vector<T>& grads() noexcept { return grads_; }
    const std::vector<T>& grads() const noexcept { return grads_; }
    const std::vector<ParamBlock>& blocks() const noexcept { return blocks_; }
    std::size_t size() const noexcept { return params_.size(); }

    /// Logits (n x classes, row-major) for n samples of shape C x side x side.
    /// With `keep` the activations are kept for a following backward().
    std::vector<T> forward(const T* inputs, std::size_t n, std::size_t side, bool keep = true);
    /// Inference only; safe to call concurrently on a shared network.
    std::vector<T> infer(const T* inputs, std::size_t n, std::size_t side) const {
        return run(inputs, n, side, nullptr, nullptr);
    }

    /// Gradient of the loss w.r.t. the parameters of the last kept forward,
    /// written (not accumulated) into grads().
    void backward(const std::vector<T>& dlogits);

    /// Sign of every ReLU input (the piece of the piecewise-smooth map the
    /// inputs fall on). Finite differences are only meaningful within a piece.
    std::vector<bool> relu_pattern(const T* inputs, std::size_t n, std::size_t side) const;

    template <typename U>
    Network<U> cast() const {
        Network<U> out;
        out.assign(spec_, blocks_, std::vector<U>(params_.begin(), params_.end()));
        return out;
    }

    /// Used by cast() and checkpoint loading.
    void assign(NetworkSpec spec, std::vector<ParamBlock> blocks, std::vector<T> params);

private:
    using Layer = LayerOp;
    void build();
    std::vector<T> run(const T* inputs, std::size_t n, std::size_t side, std::vector<std::vector<T>>* acts,
                       std::vector<std::vector<T>>* aux) const;

    NetworkSpec spec_;
    std::vector<ParamBlock> blocks_;
    std::vector<T> params_;
    std::vector<T> grads_;
    std::vector<Layer> layers_;

    // kept activations
    std::size_t n_ = 0, side_ = 0;
    std::vector<std::vector<T>> acts_;  // input to each op
    std::vector<std::vector<T>> aux_;   // per-op extras (GroupNorm statistics)
};

/// Mean softmax cross-entropy against targets (1 - eps) * y + eps / K, where
/// y is one-hot from `labels` or the rows of `soft` when given. Writes the
/// gradient w.r.t. the logits into `dlogits` when non-null.
template <typename T>
T cross_entropy(const std::vector<T>& logits, std::size_t n, std::size_t classes, const int* labels,
                const float* soft, double smoothing, std::vector<T>* dlogits);

/// Index of the largest logit per row (lowest index on ties).
template <typename T>
std::vector<int> argmax_rows(const std::vector<T>& logits, std::size_t n, std::size_t classes);

}  // namespace fcl::model
