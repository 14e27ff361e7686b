#pragma once

namespace repsim {
inline constexpr const char* kVersion = "0.1.0";
}
