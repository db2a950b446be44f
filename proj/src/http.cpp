#include "modeltalk/http.hpp"

#include "httplib.h"

namespace modeltalk {

std::optional<std::string> post_json(std::string_view url, const std::string& body,
                                     std::chrono::milliseconds timeout) {
  // Split "scheme://host[:port]" from the path.
  auto scheme_end = url.find("://");
  auto path_start = url.find('/', scheme_end == std::string_view::npos ? 0 : scheme_end + 3);
  std::string origin(url.substr(0, path_start));
  std::string path = path_start == std::string_view::npos ? "/" : std::string(url.substr(path_start));

  httplib::Client client(origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  auto res = client.Post(path, body, "application/json");
  if (!res || res->status < 200 || res->status >= 300) return std::nullopt;
  return res->body;
}

}  // namespace modeltalk
