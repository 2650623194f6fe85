#pragma once

namespace stereoref {

// Library version, "major.minor.patch".
const char* version();

}  // namespace stereoref
