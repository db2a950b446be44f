#pragma once

#include <cstddef>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>

#include "json.hpp"
#include "modeltalk/data.hpp"

namespace modeltalk {

struct CacheKey {
  std::string model_hash;
  std::string dataset;
  std::string op;
  InstanceId instance = 0;
  // Canonical clause text plus any seed the result depends on.
  std::string params;

  std::string params_hash() const;
  // File name stem: SHA-256 over all fields.
  std::string digest() const;
  nlohmann::json to_json() const;
  bool operator==(const CacheKey&) const = default;
};

// Content-addressed JSON files, one per key. Each file stores its full key,
// so an entry whose key does not match exactly is never served.
class ExplanationCache {
 public:
  explicit ExplanationCache(std::filesystem::path dir);

  std::optional<nlohmann::json> get(const CacheKey& key) const;
  bool contains(const CacheKey& key) const { return get(key).has_value(); }
  // Returns false when an identical entry already exists. Writes go to a
  // temporary file that is then renamed into place.
  bool put(const CacheKey& key, const nlohmann::json& payload);
  std::size_t size() const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path path_of(const CacheKey& key) const;

  std::filesystem::path dir_;
  mutable std::mutex mutex_;
};

}  // namespace modeltalk
