#pragma once

#include "txpert/config.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace txpert {

inline constexpr const char* kVersion = "0.1.0";

/// Missing or malformed input data; maps to exit code 2.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Exit codes of run_cli.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Entry point of the `txpert` executable. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace txpert
