#pragma once

namespace pupilpipe {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace pupilpipe
