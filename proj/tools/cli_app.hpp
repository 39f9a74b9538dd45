#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace endo::cli {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

/** @brief Environment variable naming the default output directory. */
constexpr const char* kOutputDirEnv = "ENDO_OUTPUT_DIR";

/** @brief Parses argv, runs one experiment and returns the process exit code. */
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace endo::cli
