#include "modeltalk/server.hpp"

#include <fmt/format.h>

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "httplib.h"
#include "modeltalk/errors.hpp"

namespace modeltalk {

namespace {

using json = nlohmann::json;

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::optional<std::string> optional_string(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<std::string>();
}

void require_file(const std::filesystem::path& p, std::string_view what) {
  if (!std::filesystem::is_regular_file(p)) {
    throw ConfigError(fmt::format("{} not found: {}", what, p.string()));
  }
}

ApiResponse error_response(int status, const std::string& message) {
  return {status, {{"error", message}}};
}

std::pair<std::string, int> split_listen(const std::string& listen) {
  auto colon = listen.rfind(':');
  if (colon == std::string::npos) throw ConfigError("listen address must be host:port");
  const auto port = std::stoi(listen.substr(colon + 1));
  if (port <= 0 || port > 65535) throw ConfigError("listen port out of range");
  return {listen.substr(0, colon), port};
}

json instance_row(const Dataset& ds, const Instance& inst) {
  json fields = json::object();
  for (const auto& [name, text] : inst.fields) fields[name] = text;
  return {{"id", inst.id}, {"fields", fields}, {"label", ds.class_names()[inst.gold_label]}};
}

}  // namespace

AppConfig AppConfig::from_json(const json& j, const std::filesystem::path& base) {
  AppConfig c;
  try {
    for (const auto& d : j.at("datasets")) {
      DatasetEntry e;
      e.config = resolve(base, d.at("config").get<std::string>());
      if (auto m = optional_string(d, "model")) e.model = resolve(base, *m);
      e.train_on_start = d.value("train_on_start", false);
      if (auto s = optional_string(d, "synonyms")) e.synonyms = resolve(base, *s);
      c.datasets.push_back(std::move(e));
    }
    c.prompt_bank = resolve(base, j.at("prompt_bank").get<std::string>());
    c.synonyms = resolve(base, j.at("synonyms").get<std::string>());
    if (auto a = optional_string(j, "antonyms")) c.antonyms = resolve(base, *a);
    c.templates = resolve(base, j.at("templates").get<std::string>());
    c.ambiguity_epsilon = j.value("ambiguity_epsilon", c.ambiguity_epsilon);
    c.seed = j.value("seed", c.seed);
    if (j.contains("train")) {
      const auto& t = j["train"];
      c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
      c.train.epochs = t.value("epochs", c.train.epochs);
      c.train.l2 = t.value("l2", c.train.l2);
      c.train.seed = t.value("seed", c.train.seed);
    }
    c.external_parser_url = optional_string(j, "external_parser_url");
    c.rationale_url = optional_string(j, "rationale_url");
    c.listen = j.value("listen", c.listen);
    c.cache_dir = resolve(base, j.value("cache_dir", std::string("cache")));
    c.log_dir = resolve(base, j.value("log_dir", std::string("logs")));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config: ") + e.what());
  }
  return c;
}

AppConfig AppConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
  auto c = from_json(j, path.parent_path());
  if (const char* env = std::getenv(kListenEnv); env && *env) c.listen = env;
  return c;
}

void AppConfig::validate() const {
  if (datasets.empty()) throw ConfigError("config lists no datasets");
  for (const auto& d : datasets) {
    require_file(d.config, "dataset config");
    if (!d.train_on_start) {
      if (!d.model) throw ConfigError("dataset " + d.config.string() + " has no model and no train_on_start");
      require_file(*d.model, "model");
    }
    if (d.synonyms) require_file(*d.synonyms, "synonym file");
  }
  require_file(prompt_bank, "prompt bank");
  require_file(synonyms, "synonym file");
  if (antonyms) require_file(*antonyms, "antonym file");
  if (!std::filesystem::is_directory(templates)) {
    throw ConfigError("template directory not found: " + templates.string());
  }
  if (!(ambiguity_epsilon >= 0.0 && ambiguity_epsilon < 1.0)) {
    throw ConfigError("ambiguity_epsilon must be in [0, 1)");
  }
  split_listen(listen);
}

bool valid_conversation_id(std::string_view id) {
  if (id.empty() || id.size() > 64) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
  });
}

struct App::Service {
  std::string name;
  std::unique_ptr<Dataset> dataset;
  std::unique_ptr<LinearTextModel> model;
  SynonymLexicon lexicon;
  std::unique_ptr<SimilarityIndex> similarity;
  std::unique_ptr<Executor> executor;
  std::unique_ptr<IntentParser> parser;
  std::unique_ptr<DialogueManager> dialogue;
};

namespace {

AppConfig checked(AppConfig c) {
  c.validate();
  return c;
}

}  // namespace

App::App(AppConfig config)
    : config_(checked(std::move(config))),
      bank_(PromptBank::load(config_.prompt_bank)),
      lexicon_(SynonymLexicon::load(config_.synonyms, config_.antonyms)),
      responder_(TemplateRegistry::load(config_.templates)) {
  cache_ = std::make_unique<ExplanationCache>(config_.cache_dir);
  std::filesystem::create_directories(config_.log_dir);
  if (config_.rationale_url) {
    rationale_backend_ = std::make_unique<HttpRationaleBackend>(*config_.rationale_url);
  }
  if (config_.external_parser_url) {
    external_parser_ = std::make_unique<HttpExternalParser>(*config_.external_parser_url);
  }

  ExecutorConfig exec_config;
  exec_config.seed = config_.seed;
  for (const auto& entry : config_.datasets) {
    auto svc = std::make_unique<Service>();
    const auto ds_config = DatasetConfig::from_file(entry.config);
    svc->dataset = std::make_unique<Dataset>(load_dataset(ds_config));
    svc->name = svc->dataset->name();
    if (find_service(svc->name)) throw ConfigError("duplicate dataset name " + svc->name);
    if (entry.train_on_start) {
      svc->model = std::make_unique<LinearTextModel>(train(*svc->dataset, config_.train));
      if (entry.model) svc->model->save(*entry.model);
    } else {
      svc->model = std::make_unique<LinearTextModel>(LinearTextModel::load(*entry.model));
    }
    svc->lexicon = lexicon_;
    if (entry.synonyms) svc->lexicon.merge(SynonymLexicon::load(*entry.synonyms));
    svc->similarity = std::make_unique<SimilarityIndex>(*svc->dataset);
    svc->executor = std::make_unique<Executor>(*svc->dataset, *svc->model, svc->lexicon,
                                               *svc->similarity, rationale_backend_.get(),
                                               cache_.get(), exec_config);
    IntentConfig intent_config;
    intent_config.ambiguity_epsilon = config_.ambiguity_epsilon;
    svc->parser = std::make_unique<IntentParser>(bank_, svc->dataset.get(), intent_config);
    svc->dialogue = std::make_unique<DialogueManager>(*svc->parser, *svc->executor, responder_,
                                                      external_parser_.get());
    services_.push_back(std::move(svc));
  }
}

App::~App() = default;

const App::Service* App::find_service(const std::string& name) const {
  if (name.empty()) return services_.empty() ? nullptr : services_.front().get();
  for (const auto& s : services_) {
    if (s->name == name) return s.get();
  }
  return nullptr;
}

const Executor& App::executor(const std::string& dataset) const {
  const auto* s = find_service(dataset);
  if (!s) throw ArgumentError("unknown dataset " + dataset);
  return *s->executor;
}

const DialogueManager& App::dialogue(const std::string& dataset) const {
  const auto* s = find_service(dataset);
  if (!s) throw ArgumentError("unknown dataset " + dataset);
  return *s->dialogue;
}

std::size_t App::warm_cache(const std::vector<OpName>& ops, const std::string& dataset) {
  return executor(dataset).warm_cache(*cache_, ops);
}

std::shared_ptr<App::Conversation> App::existing_conversation(const std::string& id) {
  std::lock_guard lock(conversations_mutex_);
  auto it = conversations_.find(id);
  return it == conversations_.end() ? nullptr : it->second;
}

std::shared_ptr<App::Conversation> App::conversation(const std::string& id,
                                                     const std::string& dataset) {
  std::lock_guard lock(conversations_mutex_);
  auto& slot = conversations_[id];
  if (!slot) {
    slot = std::make_shared<Conversation>();
    slot->state = DialogueState(id, config_.seed);
    slot->dataset = find_service(dataset)->name;
    slot->log = std::make_unique<TurnLog>(config_.log_dir / (id + ".jsonl"));
  }
  return slot;
}

ApiResponse App::chat(const json& request) {
  if (!request.is_object() || !request.contains("conversation_id") ||
      !request.contains("utterance") || !request["conversation_id"].is_string() ||
      !request["utterance"].is_string()) {
    return error_response(400, "expected {conversation_id, utterance}");
  }
  const auto id = request["conversation_id"].get<std::string>();
  const auto utterance = request["utterance"].get<std::string>();
  if (!valid_conversation_id(id)) return error_response(400, "invalid conversation_id");
  if (utterance.size() > kMaxUtteranceBytes) {
    return error_response(413, fmt::format("utterance exceeds {} bytes", kMaxUtteranceBytes));
  }
  const auto dataset = request.value("dataset", std::string());
  if (!find_service(dataset)) return error_response(404, "unknown dataset " + dataset);

  auto conv = conversation(id, dataset);
  std::lock_guard lock(conv->mutex);
  const auto& dm = *find_service(conv->dataset)->dialogue;
  TurnResponse response;
  int status = 200;
  try {
    response = dm.handle(conv->state, utterance);
  } catch (const std::exception& e) {
    status = 500;
    // Logged like any other turn so the conversation stays replayable.
    response = responder_.render(make_result(ResultType::error, {{"message", e.what()}}), 0);
    Turn turn;
    turn.ts = utc_timestamp();
    turn.utterance = utterance;
    turn.action = "error";
    turn.response = response;
    conv->state.turns.push_back(turn);
  }
  const auto index = conv->state.turns.size() - 1;
  conv->log->append_turn(index, conv->state.turns.back());
  auto body = response.to_json();
  body["conversation_id"] = id;
  body["turn_index"] = index;
  body["finished"] = conv->state.finished;
  body["dataset"] = conv->dataset;
  return {status, body};
}

ApiResponse App::custom_input(const json& request) {
  if (!request.is_object() || !request.contains("conversation_id") || !request.contains("text") ||
      !request["conversation_id"].is_string() || !request["text"].is_string()) {
    return error_response(400, "expected {conversation_id, text}");
  }
  const auto id = request["conversation_id"].get<std::string>();
  const auto text = request["text"].get<std::string>();
  if (!valid_conversation_id(id)) return error_response(400, "invalid conversation_id");
  if (text.size() > kMaxUtteranceBytes) return error_response(413, "custom input too long");
  const auto dataset = request.value("dataset", std::string());
  if (!find_service(dataset)) return error_response(404, "unknown dataset " + dataset);

  auto conv = conversation(id, dataset);
  std::lock_guard lock(conv->mutex);
  try {
    find_service(conv->dataset)->dialogue->set_custom_input(conv->state, text);
  } catch (const ArgumentError& e) {
    return error_response(400, e.what());
  }
  conv->log->append_custom_input(text);
  return {200, {{"ok", true}, {"conversation_id", id}}};
}

ApiResponse App::dataset_page(const std::string& name, std::size_t page, const std::string& query,
                              const std::string& conversation_id) {
  const auto* svc = find_service(name);
  if (!svc) return error_response(404, "unknown dataset " + name);
  const auto& ds = *svc->dataset;
  auto sel = select_all(ds);
  bool filtered = false;
  if (!conversation_id.empty()) {
    if (auto conv = existing_conversation(conversation_id)) {
      std::lock_guard lock(conv->mutex);
      if (conv->dataset == ds.name() && conv->state.active_filter) {
        sel = *conv->state.active_filter;
        filtered = true;
      }
    }
  }
  if (!trim(query).empty()) sel = filter_substring(ds, sel, query);
  const auto p = show(ds, sel, page);
  json rows = json::array();
  for (const auto* inst : p.instances) rows.push_back(instance_row(ds, *inst));
  return {200,
          {{"name", ds.name()},
           {"page", p.page},
           {"page_size", kDefaultPageSize},
           {"total", p.total},
           {"active_filter", filtered},
           {"instances", rows}}};
}

ApiResponse App::feedback(const json& request) {
  if (!request.is_object() || !request.contains("conversation_id") ||
      !request.contains("turn_index") || !request.contains("rating") ||
      !request["conversation_id"].is_string() || !request["turn_index"].is_number_integer() ||
      !request["rating"].is_number_integer()) {
    return error_response(400, "expected {conversation_id, turn_index, rating}");
  }
  const auto rating = request["rating"].get<long long>();
  if (rating < -1 || rating > 1) return error_response(400, "rating must be -1, 0 or 1");
  auto conv = existing_conversation(request["conversation_id"].get<std::string>());
  if (!conv) return error_response(404, "unknown conversation");
  std::lock_guard lock(conv->mutex);
  const auto index = request["turn_index"].get<long long>();
  if (index < 0 || static_cast<std::size_t>(index) >= conv->state.turns.size()) {
    return error_response(404, "no such turn");
  }
  conv->state.turns[static_cast<std::size_t>(index)].feedback = static_cast<int>(rating);
  conv->log->append_feedback(static_cast<std::size_t>(index), static_cast<int>(rating));
  return {200, {{"ok", true}}};
}

ApiResponse App::list_datasets() const {
  json out = json::array();
  for (const auto& s : services_) {
    out.push_back({{"name", s->name},
                   {"size", s->dataset->size()},
                   {"classes", s->dataset->class_names()}});
  }
  return {200, {{"datasets", out}}};
}

void App::register_routes(httplib::Server& server) {
  auto send = [](httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  auto parse_body = [](const httplib::Request& req) -> std::optional<json> {
    try {
      return json::parse(req.body);
    } catch (const json::exception&) {
      return std::nullopt;
    }
  };
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
  server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  server.Post("/chat", [=, this](const httplib::Request& req, httplib::Response& res) {
    if (req.body.size() > 4 * kMaxUtteranceBytes) {
      return send(res, error_response(413, "request too large"));
    }
    auto body = parse_body(req);
    send(res, body ? chat(*body) : error_response(400, "invalid JSON"));
  });
  server.Post("/custom_input", [=, this](const httplib::Request& req, httplib::Response& res) {
    auto body = parse_body(req);
    send(res, body ? custom_input(*body) : error_response(400, "invalid JSON"));
  });
  server.Post("/feedback", [=, this](const httplib::Request& req, httplib::Response& res) {
    auto body = parse_body(req);
    send(res, body ? feedback(*body) : error_response(400, "invalid JSON"));
  });
  server.Get("/dataset", [=, this](const httplib::Request& req, httplib::Response& res) {
    std::size_t page = 0;
    if (req.has_param("page")) {
      try {
        const auto p = std::stoll(req.get_param_value("page"));
        if (p < 0) return send(res, error_response(400, "page must be non-negative"));
        page = static_cast<std::size_t>(p);
      } catch (const std::exception&) {
        return send(res, error_response(400, "page must be an integer"));
      }
    }
    send(res, dataset_page(req.get_param_value("name"), page, req.get_param_value("q"),
                           req.get_param_value("conversation_id")));
  });
  server.Get("/datasets", [=, this](const httplib::Request&, httplib::Response& res) {
    send(res, list_datasets());
  });
}

void App::serve() {
  httplib::Server server;
  register_routes(server);
  const auto [host, port] = split_listen(config_.listen);
  std::cerr << fmt::format("listening on {}:{}\n", host, port);
  if (!server.listen(host, port)) throw ConfigError("cannot listen on " + config_.listen);
}

}  // namespace modeltalk
