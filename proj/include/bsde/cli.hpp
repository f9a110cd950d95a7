#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace bsde::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitVerification = 4;

// Runs one task from a JSON config file and writes artifacts into out_dir.
// Returns the process exit status; diagnostics go to stderr.
int run_task(const std::string& config_path, const std::string& out_dir,
             std::optional<std::uint64_t> seed_override, const std::string& task);

} // namespace bsde::cli
