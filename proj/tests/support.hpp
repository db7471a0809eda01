#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

namespace testing {

// Fresh directory under the system temp dir; removed by the caller if at all.
inline std::filesystem::path temp_dir(const std::string& tag) {
    static std::random_device rd;
    auto p = std::filesystem::temp_directory_path() / ("ecrp_" + tag + "_" + std::to_string(rd()));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
    std::ofstream f(p, std::ios::binary);
    f << s;
}

}  // namespace testing
