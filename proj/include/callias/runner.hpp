#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace callias {

// Exit codes of `calliaslab run`.
inline constexpr int kExitOk = 0;
inline constexpr int kExitVerdictFailed = 1;
inline constexpr int kExitSchema = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitIo = 4;

struct RunFlags {
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;  // overrides [output].dir
  std::optional<int> workers;
  std::optional<std::filesystem::path> cache_dir;
  std::vector<std::string> suite;  // check names to run; empty runs all
};

// Validates the config, computes, then writes every output in one go, so a
// failed run leaves nothing behind. Messages go to log.
int run(const RunFlags& flags, std::ostream& log);

}  // namespace callias
