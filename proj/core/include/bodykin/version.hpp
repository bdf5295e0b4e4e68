#pragma once

#define BODYKIN_VERSION_MAJOR 0
#define BODYKIN_VERSION_MINOR 1
#define BODYKIN_VERSION_PATCH 0
#define BODYKIN_VERSION_STRING "0.1.0"

namespace bodykin {

inline const char* version() { return BODYKIN_VERSION_STRING; }

}  // namespace bodykin
