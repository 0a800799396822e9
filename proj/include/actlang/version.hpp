#pragma once

namespace actlang {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace actlang
