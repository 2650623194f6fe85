#include "stereoref/version.hpp"

#ifndef STEREOREF_VERSION
#define STEREOREF_VERSION "0.0.0"
#endif

namespace stereoref {

const char* version() { return STEREOREF_VERSION; }

}  // namespace stereoref
