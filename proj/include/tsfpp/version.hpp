#pragma once

namespace tsfpp {
inline constexpr const char* kVersion = "1.0.0";
}
