#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace riskcal::cli {

// Exit statuses.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDomainError = 1;
inline constexpr int kExitUsageError = 2;

// Runs one command line; args exclude the program name. Artifacts go to
// `out` unless --out names a directory, logs and errors go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// RISKCAL_DATA_DIR when set, otherwise the bundled data directory.
std::filesystem::path data_dir();

// Existing paths are returned unchanged; bare names are looked up in
// data_dir().
std::filesystem::path resolve_input(const std::string& name);

}  // namespace riskcal::cli
