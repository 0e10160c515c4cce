// Copyright 2026 The visrssi Authors
// SPDX-License-Identifier: Apache-2.0
//
// Flat binary parameter files:
//
//   magic   8 bytes  "VRSSIPRM"
//   version u32      (currently 1)
//   count   u64      number of records
//   record  name_len u32, name bytes, rank u32, dims u64[rank], values f64[prod(dims)]
//
// All integers and doubles are little-endian.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "visrssi/autodiff.hpp"

namespace visrssi {

inline constexpr char kParamMagic[8] = {'V', 'R', 'S', 'S', 'I', 'P', 'R', 'M'};
inline constexpr std::uint32_t kParamFormatVersion = 1;

std::vector<std::uint8_t> encode_parameters(const ParameterSet& params);

/// Copies stored values into `params`, matching records by name. Every
/// parameter must be present with an identical shape; throws FormatError.
void decode_parameters(const std::vector<std::uint8_t>& bytes, ParameterSet& params);

void save_parameters(const std::filesystem::path& path, const ParameterSet& params);
void load_parameters(const std::filesystem::path& path, ParameterSet& params);

}  // namespace visrssi
