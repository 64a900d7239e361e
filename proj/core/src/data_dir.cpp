#include "hapticforge/data_dir.hpp"

#include <cstdlib>

#ifndef HAPTICFORGE_DEFAULT_DATA_DIR
#define HAPTICFORGE_DEFAULT_DATA_DIR "data"
#endif

namespace hapticforge {

std::filesystem::path data_dir() {
    if (const char* env = std::getenv("HAPTICFORGE_DATA_DIR"); env != nullptr && *env != '\0') {
        return std::filesystem::path(env);
    }
    return std::filesystem::path(HAPTICFORGE_DEFAULT_DATA_DIR);
}

} // namespace hapticforge
