#pragma once

namespace viable {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace viable
