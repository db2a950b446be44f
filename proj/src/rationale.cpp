#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <set>

#include "json.hpp"
#include "modeltalk/explain.hpp"
#include "modeltalk/http.hpp"

namespace modeltalk {

HttpRationaleBackend::HttpRationaleBackend(std::string url,
                                           std::chrono::milliseconds timeout)
    : url_(std::move(url)), timeout_(timeout) {}

std::optional<std::string> HttpRationaleBackend::complete(const std::string& prompt) {
  nlohmann::json body = {{"prompt", prompt}};
  auto reply = post_json(url_, body.dump(), timeout_);
  if (!reply) return std::nullopt;
  try {
    auto j = nlohmann::json::parse(*reply);
    auto text = j.at("completion").get<std::string>();
    if (trim(text).empty()) return std::nullopt;
    return text;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::string rationale_prompt(std::string_view text, std::string_view label) {
  return fmt::format(
      "Text: {}\nPrediction: {}\nExplain in one or two sentences why the classifier "
      "assigned this label to the text.",
      text, label);
}

namespace {

std::string word_list(const std::vector<std::string>& words) {
  std::vector<std::string> bold;
  for (const auto& w : words) bold.push_back("**" + w + "**");
  if (bold.size() == 1) return "the word " + bold[0];
  std::string head;
  for (std::size_t i = 0; i + 1 < bold.size(); ++i) {
    if (i > 0) head += ", ";
    head += bold[i];
  }
  return "the words " + head + " and " + bold.back();
}

constexpr std::array<std::string_view, 3> kTemplates = {
    "The text was classified as {label} mainly because of {words}.",
    "The model predicted {label}, driven mostly by {words}.",
    "Above all, {words} pushed the model towards {label}.",
};

}  // namespace

Rationale rationalize(std::string_view text, const Prediction& prediction,
                      const Attribution& attribution, RationaleBackend* backend,
                      std::uint64_t seed) {
  Rationale out;
  if (backend) {
    if (auto completion = backend->complete(rationale_prompt(text, prediction.label))) {
      out.text = *completion;
      out.external = true;
      return out;
    }
    out.fallback = true;
  }

  // Distinct positively attributed words, strongest first.
  std::vector<std::size_t> order(attribution.tokens.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return attribution.token_scores[a] > attribution.token_scores[b];
  });
  std::set<std::string> seen;
  for (auto i : order) {
    if (out.cited_tokens.size() == 3) break;
    const auto& tok = attribution.tokens[i];
    if (tok == kFieldSeparator || attribution.token_scores[i] <= 0.0) continue;
    if (seen.insert(tok).second) out.cited_tokens.push_back(tok);
  }

  if (out.cited_tokens.empty()) {
    out.text = fmt::format(
        "The text was classified as {}, but no single word stands out as the reason.",
        prediction.label);
    return out;
  }
  std::mt19937_64 rng(seed);
  const auto tmpl = kTemplates[uniform_below(rng, kTemplates.size())];
  out.text = fmt::format(fmt::runtime(tmpl), fmt::arg("label", prediction.label),
                         fmt::arg("words", word_list(out.cited_tokens)));
  return out;
}

}  // namespace modeltalk
