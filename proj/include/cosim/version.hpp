#pragma once

namespace cosim {
inline constexpr const char* kVersion = "1.0.0";
}
