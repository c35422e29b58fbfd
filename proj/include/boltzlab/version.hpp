#pragma once

namespace boltzlab {
inline constexpr const char* kVersion = "0.2.0";
}
