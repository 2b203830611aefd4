#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "nldiff/control_model.hpp"
#include "nldiff/hjb_solver.hpp"

namespace nldiff {

/// FNV-1a over bytes; stable across platforms, used for input fingerprints.
std::uint64_t fnv1a64(std::string_view bytes);

std::string to_hex(std::uint64_t value);

/// Fingerprint of a control spec: f grid, coefficient expressions (in their
/// canonical printed form) and declared condition flags.
std::string spec_digest(const ControlSpec& spec);

/// Fingerprint of a grid: bounds, node count, horizon, dt policy, boundary.
std::string grid_digest(const GridSpec& grid);

} // namespace nldiff
