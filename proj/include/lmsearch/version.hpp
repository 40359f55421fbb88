#pragma once

namespace lmsearch {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace lmsearch
