#pragma once

namespace serlab {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace serlab
