#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "modeltalk/cache.hpp"
#include "modeltalk/dialogue.hpp"
#include "modeltalk/executor.hpp"
#include "modeltalk/intent.hpp"
#include "modeltalk/respond.hpp"

namespace httplib {
class Server;
}

namespace modeltalk {

inline constexpr std::size_t kMaxUtteranceBytes = 2048;
inline constexpr const char* kListenEnv = "MODELTALK_LISTEN";

struct DatasetEntry {
  std::filesystem::path config;
  // Loaded when present and train_on_start is false; written after training.
  std::optional<std::filesystem::path> model;
  bool train_on_start = false;
  // Extra synonyms merged into the shared lexicon for this dataset.
  std::optional<std::filesystem::path> synonyms;
};

// JSON config file. Relative paths resolve against the file's directory.
struct AppConfig {
  std::vector<DatasetEntry> datasets;
  std::filesystem::path prompt_bank;
  std::filesystem::path synonyms;
  std::optional<std::filesystem::path> antonyms;
  std::filesystem::path templates;
  double ambiguity_epsilon = 0.05;
  std::uint64_t seed = 7;
  TrainConfig train;
  std::optional<std::string> external_parser_url;
  std::optional<std::string> rationale_url;
  std::string listen = "127.0.0.1:8080";
  std::filesystem::path cache_dir;
  std::filesystem::path log_dir;

  static AppConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  // Applies the listen-address environment override.
  static AppConfig from_file(const std::filesystem::path& path);
  // Throws ConfigError naming the first missing file or bad value.
  void validate() const;
};

struct ApiResponse {
  int status = 200;
  nlohmann::json body = nlohmann::json::object();
};

// Everything a running service holds. Construction loads all files and
// fails on the first problem.
class App {
 public:
  explicit App(AppConfig config);
  ~App();

  ApiResponse chat(const nlohmann::json& request);
  ApiResponse custom_input(const nlohmann::json& request);
  ApiResponse dataset_page(const std::string& name, std::size_t page, const std::string& query,
                           const std::string& conversation_id);
  ApiResponse feedback(const nlohmann::json& request);
  ApiResponse list_datasets() const;

  void register_routes(httplib::Server& server);
  // Blocks until the server stops.
  void serve();

  const AppConfig& config() const { return config_; }
  std::size_t dataset_count() const { return services_.size(); }
  const Executor& executor(const std::string& dataset = "") const;
  const DialogueManager& dialogue(const std::string& dataset = "") const;
  // Precomputes ops for every instance of the dataset; returns new entries.
  std::size_t warm_cache(const std::vector<OpName>& ops, const std::string& dataset = "");
  const ExplanationCache& cache() const { return *cache_; }

 private:
  struct Service;
  struct Conversation {
    std::mutex mutex;
    DialogueState state;
    std::string dataset;
    std::unique_ptr<TurnLog> log;
  };

  const Service* find_service(const std::string& name) const;
  // nullptr when the id is malformed.
  std::shared_ptr<Conversation> conversation(const std::string& id, const std::string& dataset);
  std::shared_ptr<Conversation> existing_conversation(const std::string& id);

  AppConfig config_;
  PromptBank bank_;
  SynonymLexicon lexicon_;
  Responder responder_;
  std::unique_ptr<ExplanationCache> cache_;
  std::unique_ptr<RationaleBackend> rationale_backend_;
  std::unique_ptr<ExternalParser> external_parser_;
  std::vector<std::unique_ptr<Service>> services_;
  std::mutex conversations_mutex_;
  std::map<std::string, std::shared_ptr<Conversation>> conversations_;
};

bool valid_conversation_id(std::string_view id);

}  // namespace modeltalk
