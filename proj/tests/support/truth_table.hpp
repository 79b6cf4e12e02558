#pragma once

#include <string>
#include <vector>

#include "miniperm/profile.hpp"
#include "miniperm/types.hpp"

namespace miniperm::testing {

struct Cell {
  GrantValue host = GrantValue::Unset;
  GrantValue os = GrantValue::Granted;
  bool enforced = false;
  bool background = false;

  std::string label() const;
};

/// All 24 combinations, host grant varying slowest.
std::vector<Cell> all_cells();

/// Hand-written release rule for a direct call with no interaction and no
/// leak rules: a scoped API needs both layers, an unscoped background API
/// needs only the OS permission, anything else releases nothing.
inline bool oracle_release(const Cell& c) {
  if (c.os != GrantValue::Granted) return false;
  if (c.enforced) return c.host == GrantValue::Granted;
  return c.background;
}

/// Single-API Location profile shaped by the cell's scope and background bits.
HostProfile cell_profile(bool enforced, bool background);

/// Drives a World into the cell and reports whether call_api released data.
bool simulate_release(const Cell& c);

}  // namespace miniperm::testing
