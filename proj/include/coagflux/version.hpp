#pragma once

namespace coagflux {
inline constexpr const char* kVersion = "0.1.0";
}
