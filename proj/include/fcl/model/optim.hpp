// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "fcl/model/network.hpp"

namespace fcl::model {

enum class OptimizerKind { sgd, adamw };

OptimizerKind optimizer_from_name(const std::string& name);
std::string optimizer_name(OptimizerKind kind);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adamw;
    double momentum = 0.9;  // sgd
    double beta1 = 0.9;     // adamw
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.05;  // decoupled for adamw, L2 for sgd; weights only

    void validate() const;
};

nlohmann::json to_json(const OptimizerConfig& cfg);
OptimizerConfig optimizer_from_json(const nlohmann::json& j);

/// Optimizer moments for one network. `first` is the momentum buffer (sgd)
/// or the first moment (adamw); `second` is empty for sgd.
template <typename T>
struct Optimizer {
    OptimizerConfig cfg;
    std::vector<T> first;
    std::vector<T> second;
    std::uint64_t steps = 0;

    Optimizer() = default;
    Optimizer(OptimizerConfig config, std::size_t size);

    /// One update of net.params() from net.grads().
    void step(Network<T>& net, double lr);
};

}  // namespace fcl::model
