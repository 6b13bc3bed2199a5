#pragma once

namespace gridstudy {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace gridstudy
