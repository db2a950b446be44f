#include <fmt/format.h>

#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "modeltalk/errors.hpp"
#include "modeltalk/evaluation.hpp"
#include "modeltalk/server.hpp"
#include "modeltalk/text.hpp"

namespace mt = modeltalk;

namespace {

const std::string kDataDir = MODELTALK_DATA_DIR;

void write_reports(const std::string& markdown, const nlohmann::json& json,
                   const std::string& format, const std::string& out_md,
                   const std::string& out_json) {
  if (format == "markdown" || format == "both") std::cout << markdown;
  if (format == "json" || format == "both") std::cout << json.dump(2) << "\n";
  if (!out_md.empty()) {
    std::ofstream(out_md) << markdown;
  }
  if (!out_json.empty()) {
    std::ofstream(out_json) << json.dump(2) << "\n";
  }
}

std::vector<mt::OpName> parse_ops(const std::string& list) {
  std::vector<mt::OpName> ops;
  for (const auto& name : mt::split(list, ',')) {
    auto t = mt::trim(name);
    if (t.empty()) continue;
    auto op = mt::parse_op_name(t);
    if (!op) throw mt::ArgumentError(fmt::format("unknown operation '{}'", t));
    ops.push_back(*op);
  }
  return ops;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conversational model exploration: server, evaluation and tools"};
  app.require_subcommand(1);

  // eval
  auto* eval = app.add_subcommand("eval", "evaluation harness");
  eval->require_subcommand(1);

  auto* eval_parse = eval->add_subcommand("parse", "exact-match parsing accuracy");
  std::string gold_path, split_name, bank_path = kDataDir + "/bank/prompts.tsv",
                                     dataset_path = kDataDir + "/olid/dataset.json";
  std::string format = "markdown", out_md, out_json;
  double epsilon = 0.05;
  bool self_retrieval = false;
  eval_parse->add_option("--gold", gold_path, "gold TSV: utterance<TAB>parse[<TAB>split]");
  eval_parse->add_option("--split", split_name, "only pairs of this split")
      ->check(CLI::IsMember({"dev", "test"}));
  eval_parse->add_flag("--self", self_retrieval, "use the verbatim prompt-bank utterances as gold");
  eval_parse->add_option("--bank", bank_path, "prompt bank TSV")->capture_default_str();
  eval_parse->add_option("--dataset", dataset_path, "dataset config for slot validation")
      ->capture_default_str();
  eval_parse->add_option("--epsilon", epsilon, "ambiguity threshold")->capture_default_str();

  auto* eval_study = eval->add_subcommand("study", "helpfulness and simulatability metrics");
  std::string logs_dir;
  eval_study->add_option("--logs", logs_dir, "directory of *.jsonl study logs")->required();

  for (auto* sub : {eval_parse, eval_study}) {
    sub->add_option("--format", format, "stdout report format")
        ->check(CLI::IsMember({"markdown", "json", "both"}))
        ->capture_default_str();
    sub->add_option("--out-md", out_md, "write the Markdown report here");
    sub->add_option("--out-json", out_json, "write the JSON report here");
  }

  // serve / chat / warm-cache
  std::string config_path = kDataDir + "/app.json";
  auto* serve = app.add_subcommand("serve", "run the HTTP service");
  auto* chat = app.add_subcommand("chat", "interactive dialogue on stdin");
  auto* warm = app.add_subcommand("warm-cache", "precompute explanations into the cache");
  for (auto* sub : {serve, chat, warm}) {
    sub->add_option("--config", config_path, "app config JSON")->capture_default_str();
  }
  std::string conversation_id = "cli", dataset_name;
  chat->add_option("--id", conversation_id, "conversation id")->capture_default_str();
  chat->add_option("--dataset", dataset_name, "dataset name (default: first)");
  std::string ops_list = "nlpattribute,rationalize,similar";
  warm->add_option("--ops", ops_list, "comma-separated operations")->capture_default_str();
  warm->add_option("--dataset", dataset_name, "dataset name (default: first)");

  // train
  auto* train_cmd = app.add_subcommand("train", "train a model on a dataset");
  std::string train_dataset, model_out;
  mt::TrainConfig train_config;
  train_cmd->add_option("--dataset", train_dataset, "dataset config JSON")->required();
  train_cmd->add_option("--out", model_out, "model JSON output")->required();
  train_cmd->add_option("--lr", train_config.learning_rate)->capture_default_str();
  train_cmd->add_option("--epochs", train_config.epochs)->capture_default_str();
  train_cmd->add_option("--l2", train_config.l2)->capture_default_str();
  train_cmd->add_option("--seed", train_config.seed)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*eval_parse) {
      if (gold_path.empty() && !self_retrieval) {
        throw mt::ArgumentError("eval parse needs --gold or --self");
      }
      const auto bank = mt::PromptBank::load(bank_path);
      const auto dataset = mt::load_dataset(mt::DatasetConfig::from_file(dataset_path));
      mt::IntentConfig ic;
      ic.ambiguity_epsilon = epsilon;
      const mt::IntentParser parser(bank, &dataset, ic);
      std::vector<mt::GoldPair> gold;
      if (self_retrieval) {
        for (const auto& e : bank.entries()) {
          auto inst = mt::instantiate_entry(e, &dataset);
          gold.push_back({inst.utterance, inst.parse, std::nullopt, 0});
        }
      } else {
        gold = mt::load_gold(gold_path);
        if (!split_name.empty()) gold = mt::filter_split(gold, *mt::parse_split_tag(split_name));
      }
      const auto report = mt::eval_parsing(gold, mt::bank_parser(parser));
      write_reports(report.to_markdown(), report.to_json(), format, out_md, out_json);
    } else if (*eval_study) {
      const auto report = mt::evaluate_study(mt::load_study_logs(logs_dir));
      write_reports(report.to_markdown(), report.to_json(), format, out_md, out_json);
    } else if (*serve) {
      mt::App service(mt::AppConfig::from_file(config_path));
      service.serve();
    } else if (*warm) {
      mt::App service(mt::AppConfig::from_file(config_path));
      const auto written = service.warm_cache(parse_ops(ops_list), dataset_name);
      std::cout << fmt::format("{} new cache entries in {}\n", written,
                               service.cache().dir().string());
    } else if (*chat) {
      mt::App service(mt::AppConfig::from_file(config_path));
      std::string line;
      std::cout << "> " << std::flush;
      while (std::getline(std::cin, line)) {
        if (mt::trim(line).empty()) {
          std::cout << "> " << std::flush;
          continue;
        }
        nlohmann::json request = {{"conversation_id", conversation_id}, {"utterance", line}};
        if (!dataset_name.empty()) request["dataset"] = dataset_name;
        const auto r = service.chat(request);
        if (r.status != 200 && !r.body.contains("text")) {
          std::cout << "error: " << r.body.value("error", "unknown") << "\n";
        } else {
          if (!r.body["parse"].get<std::string>().empty()) {
            std::cout << "[" << r.body["parse"].get<std::string>() << "]\n";
          }
          std::cout << r.body["text"].get<std::string>() << "\n";
          if (r.body["finished"].get<bool>()) break;
        }
        std::cout << "> " << std::flush;
      }
    } else if (*train_cmd) {
      const auto dataset = mt::load_dataset(mt::DatasetConfig::from_file(train_dataset));
      const auto model = mt::train(dataset, train_config);
      model.save(model_out);
      std::cout << fmt::format("trained on {} instances, vocabulary {}, hash {}\n", dataset.size(),
                               model.vocabulary_size(), model.content_hash());
    }
  } catch (const mt::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
