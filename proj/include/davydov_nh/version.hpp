#pragma once

namespace davydov_nh {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace davydov_nh
