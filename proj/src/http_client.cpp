#include "http_client.hpp"

#include <cstdlib>

#include "httplib.h"

namespace tad::detail {

Json PostJson(const std::string& base_url, const std::string& path, const Json& body,
              const std::string& auth_token_env, std::chrono::milliseconds timeout) {
  httplib::Client client(base_url);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers headers;
  if (!auth_token_env.empty()) {
    if (const char* token = std::getenv(auth_token_env.c_str())) {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
  }
  auto res = client.Post(path, headers, body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorKind::kUnavailable,
                base_url + path + ": " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw Error(ErrorKind::kUnavailable,
                base_url + path + ": HTTP " + std::to_string(res->status));
  }
  try {
    return Json::parse(res->body);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorKind::kCorrupted, base_url + path + ": malformed reply: " + e.what());
  }
}

}  // namespace tad::detail
