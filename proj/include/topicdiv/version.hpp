#pragma once

namespace topicdiv {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace topicdiv
