#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "modeltalk/data.hpp"
#include "modeltalk/model.hpp"
#include "modeltalk/server.hpp"

namespace testsupport {

namespace mt = modeltalk;

inline std::filesystem::path data_dir() { return MODELTALK_DATA_DIR; }

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("mt_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path write(const std::string& name, const std::string& content) const {
    auto p = path_ / name;
    std::filesystem::create_directories(p.parent_path());
    std::ofstream(p) << content;
    return p;
  }

 private:
  std::filesystem::path path_;
};

// texts[i] gets id i.
inline mt::Dataset make_dataset(const std::vector<std::pair<std::string, std::size_t>>& rows,
                                std::vector<std::string> classes = {"non-offensive", "offensive"},
                                std::string name = "fixture") {
  std::vector<mt::Instance> instances;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    mt::Instance inst;
    inst.id = static_cast<mt::InstanceId>(i);
    inst.fields = {{"text", rows[i].first}};
    inst.gold_label = rows[i].second;
    instances.push_back(std::move(inst));
  }
  return mt::Dataset(std::move(name), std::move(classes), std::move(instances));
}

// Binary model with weights[1] = offensive weights, class 0 all zero.
inline mt::LinearTextModel make_binary_model(
    const std::vector<std::pair<std::string, double>>& offensive_weights, double bias0 = 0.0,
    double bias1 = 0.0) {
  std::vector<std::string> vocab;
  std::vector<double> w1;
  for (const auto& [t, w] : offensive_weights) {
    vocab.push_back(t);
    w1.push_back(w);
  }
  std::vector<double> w0(vocab.size(), 0.0);
  return mt::LinearTextModel(vocab, {"non-offensive", "offensive"}, {w0, w1}, {bias0, bias1});
}

inline mt::Dataset olid() {
  return mt::load_dataset(mt::DatasetConfig::from_file(data_dir() / "olid" / "dataset.json"));
}

// Bundled app config with cache and logs redirected under `scratch`.
inline mt::AppConfig app_config(const std::filesystem::path& scratch) {
  std::ifstream in(data_dir() / "app.json");
  auto j = nlohmann::json::parse(in);
  j["cache_dir"] = (scratch / "cache").string();
  j["log_dir"] = (scratch / "logs").string();
  return mt::AppConfig::from_json(j, data_dir());
}

}  // namespace testsupport
