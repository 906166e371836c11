#pragma once

namespace trajmatch {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace trajmatch
