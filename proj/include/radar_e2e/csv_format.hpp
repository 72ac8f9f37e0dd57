#pragma once

#include <cstdio>
#include <string>

namespace radar_e2e::detail {

// Round-trippable decimal for CSV/checkpoint text.
inline std::string fmt_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// dB columns are written with 4 decimals.
inline std::string fmt_fixed4(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace radar_e2e::detail
