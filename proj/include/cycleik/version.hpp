#pragma once

namespace cycleik {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace cycleik
