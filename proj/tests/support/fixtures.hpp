#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <unistd.h>

namespace examforge::testing {

inline std::filesystem::path source_dir() {
    if (const char* env = std::getenv("EXAMFORGE_SOURCE_DIR")) return env;
    return EXAMFORGE_SOURCE_DIR_DEFAULT;
}

inline std::string fixture(const std::string& relative) {
    return (source_dir() / "fixtures" / relative).string();
}

inline std::filesystem::path temp_dir(const std::string& tag) {
    auto p = std::filesystem::temp_directory_path() /
             ("examforge-" + tag + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace examforge::testing
