#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "callias/spectral.hpp"

namespace callias {

inline constexpr const char* kVersionTag = "calliaslab-0.3.0/spectral-v1";

struct EngineStats {
  std::size_t solver_calls = 0;
  std::size_t cache_hits = 0;
  std::size_t memo_hits = 0;
};

// Decomposition front end: in-memory memo plus an optional on-disk store
// keyed by operator content hash, options and version tag. Thread safe.
class SpectralEngine {
 public:
  explicit SpectralEngine(SpectralOptions options = {},
                          std::optional<std::filesystem::path> cache_dir = std::nullopt);

  std::shared_ptr<const SpectralData> decompose(const BoundaryOperator& op);
  std::shared_ptr<const SpectralData> decompose(const BoundaryOperator& op, const SpectralOptions& o);

  // Memoised data only; never triggers a solve.
  std::shared_ptr<const SpectralData> peek(const BoundaryOperator& op) const;

  const SpectralOptions& options() const { return options_; }
  EngineStats stats() const;
  std::vector<std::string> warnings() const;
  std::string cache_key(const BoundaryOperator& op, const SpectralOptions& o) const;

 private:
  std::optional<SpectralData> load(const std::string& key);
  void store(const std::string& key, const SpectralData& s);
  void warn(std::string msg);

  SpectralOptions options_;
  std::optional<std::filesystem::path> dir_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<const SpectralData>> memo_;
  std::map<std::string, std::shared_ptr<std::mutex>> key_locks_;
  std::vector<std::string> warnings_;
  std::atomic<std::size_t> solver_calls_{0}, cache_hits_{0}, memo_hits_{0};
};

// Binary (de)serialisation used by the store; exposed for tests.
std::string serialize_spectral(const SpectralData& s, const std::string& key);
std::optional<SpectralData> deserialize_spectral(const std::string& bytes, const std::string& key,
                                                 std::string* why = nullptr);

}  // namespace callias
