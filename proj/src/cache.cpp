#include "modeltalk/cache.hpp"

#include <fstream>
#include <sstream>
#include <thread>

#include "modeltalk/errors.hpp"
#include "modeltalk/model.hpp"

namespace modeltalk {

std::string CacheKey::params_hash() const { return sha256_hex(params); }

nlohmann::json CacheKey::to_json() const {
  return {{"model_hash", model_hash},
          {"dataset", dataset},
          {"op", op},
          {"instance", instance},
          {"params_hash", params_hash()}};
}

std::string CacheKey::digest() const { return sha256_hex(to_json().dump()); }

ExplanationCache::ExplanationCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw ConfigError("cannot create cache directory " + dir_.string() + ": " + ec.message());
}

std::filesystem::path ExplanationCache::path_of(const CacheKey& key) const {
  return dir_ / (key.digest() + ".json");
}

std::optional<nlohmann::json> ExplanationCache::get(const CacheKey& key) const {
  std::ifstream in(path_of(key));
  if (!in) return std::nullopt;
  try {
    auto entry = nlohmann::json::parse(in);
    if (entry.at("key") != key.to_json()) return std::nullopt;
    return entry.at("payload");
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

bool ExplanationCache::put(const CacheKey& key, const nlohmann::json& payload) {
  std::lock_guard lock(mutex_);
  if (auto existing = get(key); existing && *existing == payload) return false;
  const auto target = path_of(key);
  std::ostringstream tmp_name;
  tmp_name << ".tmp-" << key.digest() << "-" << std::this_thread::get_id();
  const auto tmp = dir_ / tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write cache entry " + tmp.string());
    out << nlohmann::json{{"key", key.to_json()}, {"payload", payload}}.dump();
    if (!out) throw Error("cannot write cache entry " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
  return true;
}

std::size_t ExplanationCache::size() const {
  std::size_t n = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir_)) {
    if (e.path().extension() == ".json") ++n;
  }
  return n;
}

}  // namespace modeltalk
