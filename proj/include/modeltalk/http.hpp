#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace modeltalk {

// POSTs a JSON body to an http(s) URL. nullopt on connection failure,
// timeout or a non-2xx status.
std::optional<std::string> post_json(std::string_view url, const std::string& body,
                                     std::chrono::milliseconds timeout);

}  // namespace modeltalk
