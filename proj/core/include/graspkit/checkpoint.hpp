#pragma once

#include <string>

#include "graspkit/tensor.hpp"

namespace gk {

/// Binary parameter container: a magic tag, a JSON header listing format
/// version, config hash, and (name, shape) per parameter, then the payloads
/// concatenated as little-endian 64-bit floats in header order.
inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const NamedParams& params,
                     const std::string& config_hash);

/// Loads every parameter as a fresh tensor. When out_config_hash is non-null
/// the stored hash is written through.
NamedParams load_checkpoint(const std::string& path, std::string* out_config_hash = nullptr);

/// Loads into existing parameters; every name must be present with an exact
/// shape match, and the stored config hash must equal expected_config_hash
/// (pass empty to skip the hash check).
void load_checkpoint_into(const std::string& path, NamedParams& params,
                          const std::string& expected_config_hash);

}  // namespace gk
