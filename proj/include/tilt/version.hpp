#pragma once

namespace tilt {

inline constexpr const char* version_string = "tilt 0.1.0";

}  // namespace tilt
