#pragma once

namespace frm {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace frm
