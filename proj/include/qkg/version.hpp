#pragma once

namespace qkg {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace qkg
