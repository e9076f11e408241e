// Copyright Contributors to the nlfv Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "nlfv/tensor.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace nlfv {

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

/// Checkpoint container. On disk:
///
///   NLFV1\n
///   config <single-line JSON>\n
///   tensors <count>\n
///   <name> <rank> <dim>...\n          (one line per tensor, manifest order)
///   data\n
///   <little-endian float32 blobs in manifest order>
struct Checkpoint {
    nlohmann::json config;
    std::vector<NamedTensor> tensors;

    const Tensor& at(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(const std::string& bytes, const std::string& source = "<memory>");

} // namespace nlfv
