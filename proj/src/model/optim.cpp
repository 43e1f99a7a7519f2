// SPDX-License-Identifier: Apache-2.0
#include "fcl/model/optim.hpp"

#include <cmath>

#include "fcl/error.hpp"

namespace fcl::model {

OptimizerKind optimizer_from_name(const std::string& name) {
    if (name == "sgd") return OptimizerKind::sgd;
    if (name == "adamw") return OptimizerKind::adamw;
    throw ParameterError("unknown optimizer '" + name + "' (expected sgd or adamw)");
}

std::string optimizer_name(OptimizerKind kind) { return kind == OptimizerKind::sgd ? "sgd" : "adamw"; }

void OptimizerConfig::validate() const {
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ParameterError("momentum must lie in [0, 1)");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ParameterError("betas must lie in [0, 1)");
    if (!(eps > 0.0)) throw ParameterError("optimizer eps must be positive");
    if (!(weight_decay >= 0.0)) throw ParameterError("weight decay must be non-negative");
}

nlohmann::json to_json(const OptimizerConfig& c) {
    return {{"kind", optimizer_name(c.kind)}, {"momentum", c.momentum}, {"beta1", c.beta1},
            {"beta2", c.beta2},               {"eps", c.eps},           {"weight_decay", c.weight_decay}};
}

OptimizerConfig optimizer_from_json(const nlohmann::json& j) {
    OptimizerConfig c;
    c.kind = optimizer_from_name(j.value("kind", std::string("adamw")));
    c.momentum = j.value("momentum", c.momentum);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.eps = j.value("eps", c.eps);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.validate();
    return c;
}

template <typename T>
Optimizer<T>::Optimizer(OptimizerConfig config, std::size_t size) : cfg(config) {
    cfg.validate();
    first.assign(size, T{0});
    if (cfg.kind == OptimizerKind::adamw) second.assign(size, T{0});
}

template <typename T>
void Optimizer<T>::step(Network<T>& net, double lr) {
    auto& p = net.params();
    const auto& g = net.grads();
    if (first.size() != p.size()) throw SizeError("optimizer state does not match the network");
    ++steps;
    const T lr_t = static_cast<T>(lr);
    if (cfg.kind == OptimizerKind::sgd) {
        const T mu = static_cast<T>(cfg.momentum);
        for (const auto& b : net.blocks()) {
            const T wd = b.decay ? static_cast<T>(cfg.weight_decay) : T{0};
            for (std::size_t i = b.offset; i < b.offset + b.size; ++i) {
                first[i] = mu * first[i] + g[i] + wd * p[i];
                p[i] -= lr_t * first[i];
            }
        }
        return;
    }
    const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2), eps = static_cast<T>(cfg.eps);
    const T c1 = static_cast<T>(1.0 / (1.0 - std::pow(cfg.beta1, static_cast<double>(steps))));
    const T c2 = static_cast<T>(1.0 / (1.0 - std::pow(cfg.beta2, static_cast<double>(steps))));
    for (const auto& b : net.blocks()) {
        const T wd = b.decay ? static_cast<T>(cfg.weight_decay) : T{0};
        for (std::size_t i = b.offset; i < b.offset + b.size; ++i) {
            first[i] = b1 * first[i] + (T{1} - b1) * g[i];
            second[i] = b2 * second[i] + (T{1} - b2) * g[i] * g[i];
            const T update = (first[i] * c1) / (std::sqrt(second[i] * c2) + eps) + wd * p[i];
            p[i] -= lr_t * update;
        }
    }
}

template struct Optimizer<float>;
template struct Optimizer<double>;

}  // namespace fcl::model
