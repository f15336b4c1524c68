#pragma once

namespace stonag {

inline constexpr const char* version_tag = "stonag-0.1.0";

}
