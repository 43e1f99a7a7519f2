// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>

namespace fcl::model {

/// Incremental SHA-256 (OpenSSL EVP).
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    Sha256& update(const void* data, std::size_t size);
    template <typename T>
    Sha256& update_value(const T& v) {
        return update(&v, sizeof(T));
    }
    std::array<std::uint8_t, 32> finish();
    std::string finish_hex();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::string to_hex(const std::uint8_t* data, std::size_t size);

}  // namespace fcl::model
