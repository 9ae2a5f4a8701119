#pragma once

namespace tempoden {

inline constexpr const char* kVersion = "0.1.0";

} // namespace tempoden
