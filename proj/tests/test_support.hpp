#pragma once

// torch's logging shim claims the CHECK macro with no guard, so it must be
// included before doctest and the name handed back. Every test file includes
// this header first.
#include <torch/torch.h>

#ifdef CHECK
#undef CHECK
#endif

#include <doctest.h>

#include <filesystem>
#include <string>

namespace ock_test {

// A per-test scratch directory, wiped on entry so reruns start clean.
inline std::filesystem::path fresh_dir(const std::string& name) {
    std::filesystem::path dir = std::filesystem::temp_directory_path() / ("ock_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace ock_test
